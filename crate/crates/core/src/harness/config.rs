use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::instances::{make_synthetic_instance, ArmSet, BanditInstance};
use crate::policies::StoppingConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    FairLinUcb,
    FairLinPe,
    PlainLinUcb,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::FairLinUcb => "fair_lin_ucb",
            Algo::FairLinPe => "fair_lin_pe",
            Algo::PlainLinUcb => "plain_lin_ucb",
        }
    }
}

/// Parameters for [`make_synthetic_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub d: usize,
    pub n_arms: usize,
    pub sparsity: usize,
    pub instance_seed: u64,
}

/// Instance document as written in configs and instance files. `theta_star`
/// and `sigma` may be omitted where only the arms matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub d: usize,
    pub arms: Vec<Vec<f64>>,
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl InstanceFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!(
            "cannot read instance {}: {e}",
            path.display()
        )))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("instance {}: {e}", path.display())))
    }

    pub fn arm_set(&self) -> Result<ArmSet<f64>, HarnessError> {
        ArmSet::new(self.d, self.arms.clone()).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn instance(&self, sigma: Option<f64>) -> Result<BanditInstance<f64>, HarnessError> {
        let theta = self
            .theta_star
            .clone()
            .ok_or_else(|| HarnessError::Config("instance has no theta_star".into()))?;
        let sigma = sigma
            .or(self.sigma)
            .ok_or_else(|| HarnessError::Config("no sigma in config or instance".into()))?;
        BanditInstance::new(self.arm_set()?, theta, sigma)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Inline(InstanceFile),
    /// Path to an instance file, relative to the config file's directory.
    File(PathBuf),
    Generate(GeneratorParams),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingOverrides {
    pub c_lower: Option<f64>,
    pub c_upper: Option<f64>,
    pub width_exponent: Option<f64>,
}

impl StoppingOverrides {
    pub fn apply(&self) -> StoppingConstants {
        let base = StoppingConstants::default();
        StoppingConstants {
            c_lower: self.c_lower.unwrap_or(base.c_lower),
            c_upper: self.c_upper.unwrap_or(base.c_upper),
            width_exponent: self.width_exponent.unwrap_or(base.width_exponent),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}

fn default_runs() -> usize {
    10
}

fn default_checkpoints() -> usize {
    64
}

/// One experiment: an instance, an algorithm and a seeded batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algo: Algo,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub p_list: Vec<f64>,
    /// Noise scale. Overrides the instance's own; required for generated
    /// instances.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default)]
    pub stopping: StoppingOverrides,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fairness parameter given to the algorithm; defaults to `min(p_list)`.
    #[serde(default)]
    pub algo_p: Option<f64>,
    /// Fill `wall_ms` in the run sidecar. Off by default so that outputs
    /// stay byte-identical across executions.
    #[serde(default)]
    pub record_timing: bool,
    /// Directory that relative instance paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!(
            "cannot read config {}: {e}",
            path.display()
        )))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn algo_p(&self) -> f64 {
        self.algo_p
            .unwrap_or_else(|| self.p_list.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.checkpoints == 0 {
            return bad("checkpoints must be at least 1".into());
        }
        if self.p_list.is_empty() {
            return bad("p_list must be nonempty".into());
        }
        let mut seen = HashSet::new();
        for &p in &self.p_list {
            if !p.is_finite() {
                return bad(format!("p_list entry {p} is not finite"));
            }
            if !seen.insert(format_p(p)) {
                return bad(format!("p_list repeats {p}"));
            }
        }
        if let Some(p) = self.algo_p {
            if !p.is_finite() {
                return bad("algo_p must be finite".into());
            }
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("sigma must be finite and non-negative, got {s}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        self.stopping.apply().validate().map_err(HarnessError::Config)?;
        if let InstanceSpec::Generate(g) = &self.instance {
            if g.d == 0 || g.n_arms == 0 || g.sparsity == 0 || g.sparsity > g.d {
                return bad("generator needs d, n_arms ≥ 1 and 1 ≤ sparsity ≤ d".into());
            }
            if self.sigma.is_none() {
                return bad("sigma is required for generated instances".into());
            }
        }
        Ok(())
    }

    /// Builds (or loads) the instance with the effective noise scale.
    pub fn build_instance(&self) -> Result<BanditInstance<f64>, HarnessError> {
        match &self.instance {
            InstanceSpec::Generate(g) => {
                let sigma = self
                    .sigma
                    .ok_or_else(|| HarnessError::Config("sigma is required".into()))?;
                make_synthetic_instance(g.d, g.n_arms, g.sparsity, g.instance_seed)
                    .and_then(|i| i.with_sigma(sigma))
                    .map_err(|e| HarnessError::Config(e.to_string()))
            }
            InstanceSpec::Inline(doc) => doc.instance(self.sigma),
            InstanceSpec::File(path) => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                InstanceFile::load(&full)?.instance(self.sigma)
            }
        }
    }
}

/// A list of experiments to run side by side on one instance and seed
/// schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub experiments: Vec<ExperimentConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl CompareConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!(
            "cannot read config {}: {e}",
            path.display()
        )))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for e in &mut cfg.experiments {
            e.base_dir = path.parent().map(Path::to_path_buf);
        }
        Ok(cfg)
    }
}

/// Shortest decimal form of `p`, as used in CSV column names (`-0` prints as `0`).
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else {
        format!("{p}")
    }
}

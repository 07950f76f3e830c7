//! Experiment orchestration: seeded parallel runs, aggregation and the
//! CSV/JSON outputs behind the CLI.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::welfare_floor_check;
use crate::instances::BanditInstance;
use crate::metrics::{aggregate_runs, log_checkpoints, regret_report, ExpectedRewardTrace, RegretReport};
use crate::policies::{
    run_plain_lin_ucb_baseline, BanditConfig, FairLinBandit, Phase2Policy, PolicyError,
};

pub use config::{
    format_p, Algo, CompareConfig, ExperimentConfig, GeneratorParams, InstanceFile, InstanceSpec,
    StoppingOverrides,
};
pub use output::{compare_csv, regret_csv, write_compare_outputs, write_experiment_outputs};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<PolicyError<f64>> for HarnessError {
    fn from(e: PolicyError<f64>) -> Self {
        match e {
            PolicyError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

/// Per-run Phase-I diagnostics, one entry of the sidecar JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub run: usize,
    pub seed: u64,
    pub t_phase1: usize,
    pub tau_reported: usize,
    /// `None` for the plain baseline or when `μ* = 0`.
    pub floor_ratio: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub algo: Algo,
    pub instance: BanditInstance<f64>,
    pub aggregate: ExpectedRewardTrace<f64>,
    pub report: RegretReport<f64>,
    pub runs: Vec<RunDiagnostics>,
}

/// Seed of run `run` under `master_seed` (SplitMix64 finalizer over both).
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    let mut z = master_seed
        .wrapping_add((run as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Worker cap from `FAIRLIN_THREADS`; `None` lets rayon decide.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("FAIRLIN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn bandit_config(cfg: &ExperimentConfig, sigma: f64) -> BanditConfig<f64> {
    let phase2 = match cfg.algo {
        Algo::FairLinPe => Phase2Policy::LinPe,
        _ => Phase2Policy::LinUcb,
    };
    let mut bc = BanditConfig::new(cfg.horizon, sigma, phase2);
    bc.p = cfg.algo_p();
    bc.alpha = cfg.alpha;
    bc.stopping = cfg.stopping.apply();
    bc
}

struct RunResult {
    means: Vec<f64>,
    diag: RunDiagnostics,
}

/// Runs the experiment on the worker count from `FAIRLIN_THREADS`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    run_experiment_with_threads(cfg, threads_from_env())
}

/// Executes `cfg.runs` independently seeded runs and aggregates them in run
/// index order. The result does not depend on `threads`.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let bc = bandit_config(cfg, instance.sigma());
    let fair = match cfg.algo {
        Algo::PlainLinUcb => None,
        _ => Some(FairLinBandit::new(instance.arm_set(), bc.clone())?),
    };
    let floor = fair
        .as_ref()
        .map(|f| welfare_floor_check(f.john(), &instance))
        .filter(|r| r.is_finite());

    let one_run = |run: usize| -> Result<RunResult, HarnessError> {
        let seed = run_seed(cfg.master_seed, run);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let start = Instant::now();
        let trace = match &fair {
            Some(f) => f.run(&instance, &mut rng)?,
            None => run_plain_lin_ucb_baseline(&instance, &bc, &mut rng)?,
        };
        let wall_ms = cfg
            .record_timing
            .then(|| start.elapsed().as_secs_f64() * 1e3);
        Ok(RunResult {
            means: trace.true_means(),
            diag: RunDiagnostics {
                run,
                seed,
                t_phase1: trace.t_phase1,
                tau_reported: trace.tau_reported,
                floor_ratio: floor,
                wall_ms,
            },
        })
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let results: Vec<RunResult> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(one_run)
            .collect::<Result<Vec<_>, _>>()
    })?;

    let (means, runs): (Vec<_>, Vec<_>) = results.into_iter().map(|r| (r.means, r.diag)).unzip();
    let aggregate = aggregate_runs(&means, instance.mu_star())
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let checkpoints = log_checkpoints(cfg.horizon, cfg.checkpoints);
    let report = regret_report(&aggregate, &checkpoints, &cfg.p_list)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    Ok(ExperimentOutcome {
        algo: cfg.algo,
        instance,
        aggregate,
        report,
        runs,
    })
}

/// Runs every experiment of `cfg`. All must resolve to the same instance
/// and master seed.
pub fn compare(cfg: &CompareConfig) -> Result<Vec<ExperimentOutcome>, HarnessError> {
    compare_with_threads(cfg, threads_from_env())
}

pub fn compare_with_threads(
    cfg: &CompareConfig,
    threads: Option<usize>,
) -> Result<Vec<ExperimentOutcome>, HarnessError> {
    let first = cfg
        .experiments
        .first()
        .ok_or_else(|| HarnessError::Config("compare needs at least one experiment".into()))?;
    for e in &cfg.experiments {
        e.validate()?;
    }
    let reference = first.build_instance()?;
    for (i, e) in cfg.experiments.iter().enumerate().skip(1) {
        if e.build_instance()? != reference {
            return Err(HarnessError::Config(format!(
                "experiment {i} uses a different instance than experiment 0"
            )));
        }
        if e.master_seed != first.master_seed {
            return Err(HarnessError::Config(format!(
                "experiment {i} uses a different master_seed than experiment 0"
            )));
        }
    }
    cfg.experiments
        .iter()
        .map(|e| run_experiment_with_threads(e, threads))
        .collect()
}

/// Resolves the output directory: explicit override, then the config, then
/// `results`.
pub fn output_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    cli.or(config)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("results"))
}

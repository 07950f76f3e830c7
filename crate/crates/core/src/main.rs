use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fairlin::design::{d_optimal_design_with, DesignError, DesignOptions};
use fairlin::geometry::{default_n_dirs, floor_ratio, john_distribution};
use fairlin::harness::{
    compare, output_dir, run_experiment, write_compare_outputs, write_experiment_outputs,
    CompareConfig, ExperimentConfig, HarnessError, InstanceFile,
};
use fairlin::real::dot;

#[derive(Parser)]
#[command(name = "fairlin", version, about = "Fairness-aware linear bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write regret.csv and runs.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several experiments on one instance and write compare.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the D-optimal design of an instance's arm set.
    Design {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Chebyshev center and John distribution of an instance's arm set.
    Geometry {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        n_dirs: Option<usize>,
    },
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json output"));
}

fn cmd_run(config: &Path, out: Option<&Path>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(config)?;
    let outcome = run_experiment(&cfg)?;
    let dir = output_dir(out, cfg.output.as_deref());
    let (csv, sidecar) = write_experiment_outputs(&outcome, &dir)?;
    let last = outcome.report.last().expect("at least one checkpoint");
    print(json!({
        "csv": csv,
        "sidecar": sidecar,
        "algo": outcome.algo.name(),
        "mu_star": outcome.instance.mu_star(),
        "final": last,
    }));
    Ok(())
}

fn cmd_compare(config: &Path) -> Result<(), HarnessError> {
    let cfg = CompareConfig::load(config)?;
    let outcomes = compare(&cfg)?;
    let dir = output_dir(None, cfg.output.as_deref());
    let (csv, sidecar) = write_compare_outputs(&outcomes, &dir)?;
    let finals: Vec<_> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| json!({"config": i, "algo": o.algo.name(), "final": o.report.last()}))
        .collect();
    print(json!({"csv": csv, "sidecar": sidecar, "experiments": finals}));
    Ok(())
}

fn cmd_design(instance: &Path, eps: f64) -> Result<(), HarnessError> {
    let arms = InstanceFile::load(instance)?.arm_set()?;
    let opts = DesignOptions::with_eps(eps);
    let (w, converged) = match d_optimal_design_with(&arms, &opts, None) {
        Ok(w) => (w, true),
        Err(DesignError::IterationBudgetExceeded(best)) => (*best, false),
        Err(e @ DesignError::InvalidEps) => return Err(HarnessError::Config(e.to_string())),
        Err(e) => return Err(HarnessError::Runtime(e.to_string())),
    };
    print(json!({
        "d": arms.dim(),
        "converged": converged,
        "g_value": w.g_value,
        "iterations_used": w.iterations_used,
        "support": w.support(),
        "weights": w.weights,
    }));
    Ok(())
}

fn cmd_geometry(instance: &Path, n_dirs: Option<usize>) -> Result<(), HarnessError> {
    let doc = InstanceFile::load(instance)?;
    let arms = doc.arm_set()?;
    let n = n_dirs.unwrap_or_else(|| default_n_dirs(arms.dim()));
    let john = john_distribution(&arms, n).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let ratio = doc.theta_star.as_ref().and_then(|theta| {
        if theta.len() != arms.dim() {
            return None;
        }
        let mu_star = arms
            .iter()
            .map(|x| dot(x, theta).max(0.0))
            .fold(0.0, f64::max);
        Some(floor_ratio(&john.center, theta, mu_star)).filter(|r| r.is_finite())
    });
    print(json!({
        "d": arms.dim(),
        "n_dirs": n,
        "c": john.center,
        "r": john.radius,
        "support": john.support(),
        "rho": john.rho,
        "floor_ratio": ratio,
    }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out.as_deref()),
        Command::Compare { config } => cmd_compare(config),
        Command::Design { instance, eps } => cmd_design(instance, *eps),
        Command::Geometry { instance, n_dirs } => cmd_geometry(instance, *n_dirs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

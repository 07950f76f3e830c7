use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{format_p, ExperimentOutcome, HarnessError, RunDiagnostics};
use crate::metrics::{RegretReport, RegretRow};

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

fn row_values(out: &mut String, row: &RegretRow<f64>) {
    let _ = write!(out, "{}", row.t);
    num(out, row.mean_expected_reward);
    num(out, row.avg_regret);
    num(out, row.nash_regret);
}

/// `t,mean_expected_reward,avg_regret,nash_regret,p_regret_{p}...`, values
/// with 17 significant digits.
pub fn regret_csv(report: &RegretReport<f64>) -> String {
    let mut out = String::from("t,mean_expected_reward,avg_regret,nash_regret");
    for &p in &report.p_list {
        let _ = write!(out, ",p_regret_{}", format_p(p));
    }
    out.push('\n');
    for row in &report.rows {
        row_values(&mut out, row);
        for &v in &row.p_regret {
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Stacks several reports with leading `config,algo` columns. The p columns
/// are the union of all requested p in order of first appearance; cells for
/// p a config did not request are empty.
pub fn compare_csv(outcomes: &[ExperimentOutcome]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for o in outcomes {
        for &p in &o.report.p_list {
            let name = format_p(p);
            if !columns.contains(&name) {
                columns.push(name);
            }
        }
    }
    let mut out = String::from("config,algo,t,mean_expected_reward,avg_regret,nash_regret");
    for c in &columns {
        let _ = write!(out, ",p_regret_{c}");
    }
    out.push('\n');
    for (i, o) in outcomes.iter().enumerate() {
        let names: Vec<String> = o.report.p_list.iter().map(|&p| format_p(p)).collect();
        for row in &o.report.rows {
            let _ = write!(out, "{i},{},", o.algo.name());
            row_values(&mut out, row);
            for c in &columns {
                match names.iter().position(|n| n == c) {
                    Some(k) => num(&mut out, row.p_regret[k]),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("diagnostics serialize");
    s.push('\n');
    s
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `regret.csv` and `runs.json` into `dir`.
pub fn write_experiment_outputs(
    outcome: &ExperimentOutcome,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    ensure_dir(dir)?;
    let csv = dir.join("regret.csv");
    let sidecar = dir.join("runs.json");
    write_file(&csv, &regret_csv(&outcome.report))?;
    write_file(&sidecar, &json(&outcome.runs))?;
    Ok((csv, sidecar))
}

#[derive(Serialize)]
struct CompareSidecar<'a> {
    config: usize,
    algo: &'static str,
    runs: &'a [RunDiagnostics],
}

/// Writes `compare.csv` and `runs.json` into `dir`.
pub fn write_compare_outputs(
    outcomes: &[ExperimentOutcome],
    dir: &Path,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    ensure_dir(dir)?;
    let csv = dir.join("compare.csv");
    let sidecar = dir.join("runs.json");
    write_file(&csv, &compare_csv(outcomes))?;
    let side: Vec<CompareSidecar> = outcomes
        .iter()
        .enumerate()
        .map(|(config, o)| CompareSidecar {
            config,
            algo: o.algo.name(),
            runs: &o.runs,
        })
        .collect();
    write_file(&sidecar, &json(&side))?;
    Ok((csv, sidecar))
}

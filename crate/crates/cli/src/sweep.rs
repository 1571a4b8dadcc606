use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use qdrl_core::agent::{greedy_rollout, AgentError, Trainer};
use qdrl_core::lfc::{LfcError, TrajectorySummary};
use rayon::prelude::*;

use crate::commands::{create_dir, write_log_csv, LOG_FILE};
use crate::{CliError, CommonArgs, Result};

pub const SWEEP_COLUMNS: [&str; 7] = ["param", "value", "final_freq_hz", "nadir_hz", "return", "episodes", "status"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: u64,
    /// Greedy post-training rollout on the configured scenario; `None` when the run failed.
    pub summary: Option<TrajectorySummary>,
    pub episodes: usize,
    /// `ok`, `config_error`, `diverged` or `failed`.
    pub status: String,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let f = |g: fn(&TrajectorySummary) -> f64| self.summary.map(|s| format!("{:.6}", g(&s))).unwrap_or_default();
        vec![
            self.param.clone(),
            self.value.to_string(),
            f(|s| s.final_freq_hz),
            f(|s| s.nadir_hz),
            f(|s| s.total_return),
            self.episodes.to_string(),
            self.status.clone(),
        ]
    }
}

fn config_key(param: &str) -> Result<&'static str> {
    match param {
        "layers" => Ok("circuit.layers"),
        "policy_update_interval" => Ok("trainer.policy_update_interval"),
        other => Err(CliError::Invalid(format!(
            "cannot sweep `{other}` (expected layers or policy_update_interval)"
        ))),
    }
}

fn failure_status(e: &AgentError) -> &'static str {
    match e {
        AgentError::Grid(LfcError::Divergence { .. }) => "diverged",
        AgentError::Config(_) => "config_error",
        _ => "failed",
    }
}

fn run_one(common: &CommonArgs, param: &str, key: &str, value: u64, out_dir: &Path) -> SweepRow {
    let row = |summary, episodes, status: &str| SweepRow {
        param: param.to_string(),
        value,
        summary,
        episodes,
        status: status.to_string(),
    };
    let mut args = common.clone();
    args.set.push(format!("{key}={value}"));
    let config = match args.load_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{param} = {value}: {e}");
            return row(None, 0, "config_error");
        }
    };
    let result = Trainer::new(config.clone()).and_then(|mut t| {
        let outcome = t.train()?;
        let traj = greedy_rollout(t.actor(), &config.grid, &config.scenario)?;
        Ok((outcome.log, traj.summary()))
    });
    match result {
        Ok((log, summary)) => {
            let dir = out_dir.join(format!("{param}_{value}"));
            if let Err(e) = create_dir(&dir).and_then(|_| write_log_csv(&log, &dir.join(LOG_FILE))) {
                eprintln!("{param} = {value}: {e}");
                return row(Some(summary), log.len(), "failed");
            }
            eprintln!("{param} = {value}: final {:.4} Hz, return {:.4}", summary.final_freq_hz, summary.total_return);
            row(Some(summary), log.len(), "ok")
        }
        Err(e) => {
            eprintln!("{param} = {value}: {e}");
            row(None, 0, failure_status(&e))
        }
    }
}

/// Runs one training per value with the seed held fixed and writes
/// `sweep_<param>.csv`. Failed runs become rows with a non-`ok` status.
pub fn run(common: &CommonArgs, param: &str, values: &[u64], parallel: bool) -> Result<(PathBuf, Vec<SweepRow>)> {
    let key = config_key(param)?;
    if values.len() < 2 {
        return Err(CliError::Invalid("a sweep needs at least two values".into()));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = values.iter().find(|v| !seen.insert(**v)) {
        return Err(CliError::Invalid(format!("duplicate sweep value {dup}")));
    }
    let base = common.load_config()?;
    let out_dir = common.out_dir(&base);
    create_dir(&out_dir)?;

    let rows: Vec<SweepRow> = if parallel {
        values.par_iter().map(|&v| run_one(common, param, key, v, &out_dir)).collect()
    } else {
        values.iter().map(|&v| run_one(common, param, key, v, &out_dir)).collect()
    };

    let path = out_dir.join(format!("sweep_{param}.csv"));
    let mut w = csv::Writer::from_path(&path).map_err(CliError::csv(&path))?;
    w.write_record(SWEEP_COLUMNS).map_err(CliError::csv(&path))?;
    for r in &rows {
        w.write_record(r.record()).map_err(CliError::csv(&path))?;
    }
    w.flush().map_err(CliError::io(&path))?;
    println!("sweep over {param}: {} runs written to {}", rows.len(), path.display());
    Ok((path, rows))
}

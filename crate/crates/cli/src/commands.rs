use std::fs;
use std::path::{Path, PathBuf};

use qdrl_core::agent::{greedy_rollout, Checkpoint, LogRow, Trainer, LOG_COLUMNS};
use qdrl_core::config::ExperimentConfig;
use qdrl_core::lfc::{run_pi_baseline, write_trajectory_csv, Trajectory, TrajectorySummary};
use serde_json::json;

use crate::{CliError, CommonArgs, Result, ScenarioArg};

pub const SNAPSHOT_FILE: &str = "config-resolved.snapshot";
pub const LOG_FILE: &str = "training_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const FIRST_TRAJECTORY_FILE: &str = "first_episode_trajectory.csv";
pub const LAST_TRAJECTORY_FILE: &str = "last_episode_trajectory.csv";

pub struct TrainReport {
    pub out_dir: PathBuf,
    pub log: Vec<LogRow>,
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_summary(path: &Path, label: &str, s: &TrajectorySummary) -> Result<()> {
    let body = json!({
        "scenario": label,
        "return": s.total_return,
        "nadir_hz": s.nadir_hz,
        "final_freq_hz": s.final_freq_hz,
        "steps": s.steps,
    });
    let text = serde_json::to_string_pretty(&body).expect("plain JSON values");
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

fn print_summary(label: &str, s: &TrajectorySummary) {
    println!(
        "{label}: return {:.6}, nadir {:.4} Hz, final {:.4} Hz over {} steps",
        s.total_return, s.nadir_hz, s.final_freq_hz, s.steps
    );
}

/// Writes the resolved configuration so that reloading it reproduces `config`.
pub fn write_snapshot(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let path = dir.join(SNAPSHOT_FILE);
    fs::write(&path, config.to_toml_string()).map_err(CliError::io(&path))
}

struct LogWriter {
    path: PathBuf,
    inner: csv::Writer<fs::File>,
}

impl LogWriter {
    fn create(path: PathBuf) -> Result<Self> {
        let mut inner = csv::Writer::from_path(&path).map_err(CliError::csv(&path))?;
        inner.write_record(LOG_COLUMNS).map_err(CliError::csv(&path))?;
        Ok(Self { path, inner })
    }

    /// Rows are flushed one by one so a failed run keeps its partial log.
    fn push(&mut self, row: &LogRow) -> Result<()> {
        self.inner.write_record(row.to_record()).map_err(CliError::csv(&self.path))?;
        self.inner.flush().map_err(CliError::io(&self.path))
    }
}

/// Writes a complete training log (all [`LOG_COLUMNS`]).
pub fn write_log_csv(rows: &[LogRow], path: &Path) -> Result<()> {
    let mut w = LogWriter::create(path.to_path_buf())?;
    rows.iter().try_for_each(|r| w.push(r))
}

fn write_trajectory(traj: Option<&Trajectory>, path: &Path) -> Result<()> {
    match traj {
        Some(t) => Ok(write_trajectory_csv(t, path)?),
        None => Ok(()),
    }
}

pub fn train(common: &CommonArgs, resume: Option<&Path>) -> Result<TrainReport> {
    let config = common.load_config()?;
    let out_dir = common.out_dir(&config);
    let mut trainer = match resume {
        Some(path) => Trainer::from_checkpoint(config.clone(), Checkpoint::load(path)?)?,
        None => Trainer::new(config.clone())?,
    };

    create_dir(&out_dir)?;
    write_snapshot(&ExperimentConfig { output_dir: Some(out_dir.clone()), ..config.clone() }, &out_dir)?;
    let mut log = LogWriter::create(out_dir.join(LOG_FILE))?;
    for row in trainer.history() {
        log.push(row)?;
    }
    let total = config.trainer.episodes;
    let mut write_err = None;
    let outcome = trainer.train_with(|row| {
        if write_err.is_none() {
            write_err = log.push(row).err();
        }
        if (row.episode + 1) % 10 == 0 || row.episode + 1 == total {
            eprintln!("episode {}/{total}: return {:.4}, final {:.4} Hz", row.episode + 1, row.episode_return, row.freq_final_hz);
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let outcome = outcome?;

    trainer.checkpoint().save(&out_dir.join(CHECKPOINT_FILE))?;
    write_trajectory(outcome.first_trajectory.as_ref(), &out_dir.join(FIRST_TRAJECTORY_FILE))?;
    write_trajectory(outcome.last_trajectory.as_ref(), &out_dir.join(LAST_TRAJECTORY_FILE))?;
    if let Some(last) = outcome.log.last() {
        println!(
            "trained {} episodes: last return {:.6}, final {:.4} Hz; artifacts in {}",
            outcome.log.len(),
            last.episode_return,
            last.freq_final_hz,
            out_dir.display()
        );
    }
    Ok(TrainReport { out_dir, log: outcome.log })
}

fn scenario_label(s: ScenarioArg) -> &'static str {
    match s {
        ScenarioArg::Default => "default",
        ScenarioArg::NoDisturbance => "no-disturbance",
    }
}

/// Noise-free greedy rollout of the checkpoint's actor. The grid comes from
/// `--config` when given, otherwise from the configuration stored in the checkpoint.
pub fn evaluate(common: &CommonArgs, checkpoint: &Path, scenario: ScenarioArg) -> Result<TrajectorySummary> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let config = match common.config {
        Some(_) => common.load_config()?,
        None => ExperimentConfig::from_toml_str(&ckpt.config.to_toml_string(), &common.overrides())?,
    };
    let scen = match scenario {
        ScenarioArg::Default => config.scenario.clone(),
        ScenarioArg::NoDisturbance => config.scenario.without_disturbance(),
    };
    let traj = greedy_rollout(&ckpt.actor, &config.grid, &scen)?;
    let summary = traj.summary();
    let out_dir = common.out_dir(&config);
    create_dir(&out_dir)?;
    let label = scenario_label(scenario);
    write_trajectory_csv(&traj, &out_dir.join(format!("evaluate_{label}_trajectory.csv")))?;
    write_summary(&out_dir.join(format!("evaluate_{label}_summary.json")), label, &summary)?;
    print_summary(&format!("evaluate ({label})"), &summary);
    Ok(summary)
}

pub fn baseline(common: &CommonArgs, k_p: Option<f64>, k_i: Option<f64>) -> Result<TrajectorySummary> {
    let config = common.load_config()?;
    let k_p = k_p.unwrap_or(config.baseline.k_p);
    let k_i = k_i.unwrap_or(config.baseline.k_i);
    let traj = run_pi_baseline(&config.grid, &config.scenario, k_p, k_i, config.grid.control_interval)?;
    let summary = traj.summary();
    let out_dir = common.out_dir(&config);
    create_dir(&out_dir)?;
    write_trajectory_csv(&traj, &out_dir.join("baseline_trajectory.csv"))?;
    write_summary(&out_dir.join("baseline_summary.json"), &config.scenario.name, &summary)?;
    print_summary(&format!("PI baseline (K_P {k_p}, K_I {k_i})"), &summary);
    Ok(summary)
}

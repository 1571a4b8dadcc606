//! `qdrl` command-line front end: training, evaluation, PI baseline, sweeps and plots.

pub mod commands;
pub mod error;
pub mod plot;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdrl_core::config::ExperimentConfig;

pub use error::{CliError, Result};

pub const OUT_DIR_ENV: &str = "QDRL_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qdrl-out";

#[derive(Debug, Parser)]
#[command(name = "qdrl", version, about = "Quantum DDPG for load frequency control")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradArg {
    ParameterShift,
    Adjoint,
    FiniteDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    Nisq,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; falls back to the config, then $QDRL_OUT_DIR, then ./qdrl-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub grad: Option<GradArg>,
    #[arg(long, global = true, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Override a config entry, e.g. `--set trainer.episodes=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Default,
    NoDisturbance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the agent and write the log, checkpoint and trajectories.
    Train {
        /// Continue from a checkpoint written under the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy noise-free rollout of a trained checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        scenario: ScenarioArg,
    },
    /// Closed-loop PI AGC baseline.
    Baseline {
        #[arg(long)]
        kp: Option<f64>,
        #[arg(long)]
        ki: Option<f64>,
    },
    /// One training run per value of a circuit or trainer setting.
    Sweep {
        #[arg(long, value_parser = ["layers", "policy_update_interval"])]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        /// Run the trainings concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Render a training log, trajectory or sweep CSV as SVG.
    Plot {
        input: PathBuf,
        output: PathBuf,
    },
}

impl CommonArgs {
    /// `--set` entries followed by the dedicated flags, which take precedence.
    pub fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(seed) = self.seed {
            o.push(format!("seed={seed}"));
        }
        if let Some(g) = self.grad {
            let name = match g {
                GradArg::ParameterShift => "parameter-shift",
                GradArg::Adjoint => "adjoint",
                GradArg::FiniteDiff => "finite-diff",
            };
            o.push(format!("trainer.grad_method=\"{name}\""));
        }
        if let Some(n) = self.noise {
            let name = match n {
                NoiseArg::None => "none",
                NoiseArg::Nisq => "nisq",
            };
            o.push(format!("noise.model=\"{name}\""));
        }
        o
    }

    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let overrides = self.overrides();
        let config = match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides)?,
            None => ExperimentConfig::from_toml_str("", &overrides)?,
        };
        Ok(config)
    }

    pub fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Train { resume } => commands::train(c, resume.as_deref()).map(|_| ()),
        Command::Evaluate { checkpoint, scenario } => commands::evaluate(c, checkpoint, *scenario).map(|_| ()),
        Command::Baseline { kp, ki } => commands::baseline(c, *kp, *ki).map(|_| ()),
        Command::Sweep { param, values, parallel } => sweep::run(c, param, values, *parallel).map(|_| ()),
        Command::Plot { input, output } => plot::render_file(input, output),
    }
}

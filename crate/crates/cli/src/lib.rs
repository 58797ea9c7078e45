//! Command-line front end for training and evaluating recurrent U-Net models.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::CliResult;
pub use config::{ConfigError, RunConfig};
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "r2unet", version, about = "Recurrent and recurrent-residual U-Net segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "r2unet-out")]
    pub out: PathBuf,
    /// Accepted for compatibility; every kernel is already single-threaded
    /// with a fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Overrides one config key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes model.ckpt, runlog.csv, curves.svg.
    Train,
    /// Score a checkpoint; writes metrics.csv, roc.csv, summary.txt.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides `eval.fov`.
        #[arg(long, value_enum)]
        fov: Option<OnOff>,
    },
    /// Probability map and binary mask per input image.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides `eval.threshold`.
        #[arg(long)]
        threshold: Option<f32>,
        /// Zero-pad inputs to the model divisor and crop outputs back.
        #[arg(long)]
        auto_pad: bool,
        #[arg(long, default_value = "png")]
        format: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Parameter counts and the audit table.
    Params,
    /// Finite-difference gradient check of the configured model.
    Gradcheck,
    /// Write a packed patch set (patches.bin).
    SamplePatches {
        /// Overrides `data.patches`.
        #[arg(long)]
        count: Option<usize>,
    },
}

/// Config file, then `--set` overrides, then `--seed`.
pub fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::from_pairs(BTreeMap::new())?,
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg = cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg = cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Train => commands::cmd_train(&cfg, &cli.out),
        Command::Evaluate { checkpoint, fov } => {
            if let Some(f) = fov {
                cfg = cfg.set("eval.fov", if *f == OnOff::On { "on" } else { "off" })?;
            }
            commands::cmd_evaluate(&cfg, checkpoint, &cli.out)
        }
        Command::Predict {
            checkpoint,
            threshold,
            auto_pad,
            format,
            inputs,
        } => {
            let args = commands::PredictArgs {
                checkpoint: checkpoint.clone(),
                inputs: inputs.clone(),
                threshold: threshold.unwrap_or(cfg.eval.threshold),
                auto_pad: *auto_pad,
                format: format.clone(),
            };
            commands::cmd_predict(&cfg, &args, &cli.out)
        }
        Command::Params => commands::cmd_params(&cfg),
        Command::Gradcheck => commands::cmd_gradcheck(&cfg).map(|_| ()),
        Command::SamplePatches { count } => commands::cmd_sample_patches(&cfg, *count, &cli.out),
    }
}

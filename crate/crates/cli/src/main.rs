//! `stardr`: staged transfer-learning experiments from a TOML config.
//!
//! Exit codes: 0 on success, 1 when the config, inputs or phase order are
//! invalid, 2 when a run fails after validation (I/O, divergence).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stardr::Error;

use config::{ExperimentConfig, Overrides};
use manifest::Run;

#[derive(Parser)]
#[command(
    name = "stardr",
    version,
    about = "Staged transfer learning for drug-response prediction"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command. Flags beat config keys, which beat defaults.
#[derive(Args)]
struct Common {
    /// Experiment config (TOML); unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $STARDR_OUT, else ./out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for fold and few-shot grids; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Model file read by align, adapt, eval and analyze.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a source and a shifted target dataset.
    Synth {
        #[arg(long)]
        shift_delta: Option<f64>,
    },
    /// Phase 1: autoencoder pretraining on unlabeled source features.
    Pretrain,
    /// Phase 2: supervised alignment of a pretrained checkpoint.
    Align,
    /// Few-shot adaptation grid on the target data.
    Adapt,
    /// Single-phase baseline with the same architecture.
    Baseline,
    /// Cross-validation under a split protocol.
    Eval {
        /// pair, lco or ldo
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        /// staged, baseline or both
        #[arg(long)]
        method: Option<String>,
        /// Also score the checkpoint zero-shot on the target data.
        #[arg(long)]
        cross_dataset: bool,
    },
    /// PCA and distance diagnostics of source vs target.
    Analyze,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Pretrain => "pretrain",
            Command::Align => "align",
            Command::Adapt => "adapt",
            Command::Baseline => "baseline",
            Command::Eval { .. } => "eval",
            Command::Analyze => "analyze",
        }
    }

    fn default_checkpoint(&self) -> Option<&'static str> {
        match self {
            Command::Align => Some("pretrained.ckpt"),
            Command::Adapt | Command::Eval { .. } => Some("aligned.ckpt"),
            _ => None,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::NonFinite { .. }
        | Error::NonFiniteLoss { .. }
        | Error::StaleCache(_)
        | Error::Singular(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> stardr::Result<PathBuf> {
    let c = &cli.common;
    let mut o = Overrides {
        out: c.out.clone(),
        seed: c.seed,
        jobs: c.jobs,
        epochs: c.epochs,
        checkpoint: c.checkpoint.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Synth { shift_delta } => o.shift_delta = *shift_delta,
        Command::Eval {
            protocol,
            folds,
            method,
            ..
        } => {
            o.protocol = protocol.clone();
            o.folds = *folds;
            o.method = method.clone();
        }
        _ => {}
    }
    let file = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = file.resolve(&o, cli.command.default_checkpoint())?;
    let mut run = Run::start(cli.command.name(), cfg.out_dir(), cfg.seed, cfg.jobs)?;
    if let Some(p) = &c.config {
        run.input(p);
    }
    match &cli.command {
        Command::Synth { .. } => commands::synth(&cfg, &mut run)?,
        Command::Pretrain => commands::pretrain(&cfg, &mut run)?,
        Command::Align => commands::align(&cfg, &mut run)?,
        Command::Adapt => commands::adapt(&cfg, &mut run)?,
        Command::Baseline => commands::baseline(&cfg, &mut run)?,
        Command::Eval { cross_dataset, .. } => commands::eval(&cfg, &mut run, *cross_dataset)?,
        Command::Analyze => commands::analyze(&cfg, &mut run)?,
    }
    run.finish(&cfg.to_toml())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

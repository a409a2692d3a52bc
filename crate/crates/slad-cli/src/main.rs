//! `slad` command line: train a toy diffusion teacher, distill it into a
//! few-step generator over linear sub-paths, sample, evaluate, and run the
//! ablation sweeps.

mod commands;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "slad", version, about = "Sub-path linear approximation distillation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output run directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the noise-prediction teacher on the configured dataset.
    TrainTeacher {
        #[command(flatten)]
        common: CommonArgs,
        /// Resume from this checkpoint (config hash must match).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Distill the teacher into a few-step consistency generator.
    Distill {
        #[command(flatten)]
        common: CommonArgs,
        /// Teacher checkpoint to distill from.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Resume student training from this checkpoint (config hash must
        /// match).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Draw samples from a distilled checkpoint (EMA weights).
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        /// Student checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sampling steps (1, 2, 4, or 8).
        #[arg(long, default_value_t = 4)]
        steps: usize,
        /// Number of samples.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Fixed class label; labels cycle through all classes when absent.
        #[arg(long)]
        label: Option<usize>,
    },
    /// Evaluate a distilled checkpoint: energy distance, mode coverage,
    /// adjacent-point mapping error.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Student checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Ablation sweeps.
    Ablate {
        /// Which sweep to run.
        #[arg(value_enum)]
        which: AblateKind,
        #[command(flatten)]
        common: CommonArgs,
        /// Teacher checkpoint (required for every sweep except
        /// error-surface).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AblateKind {
    /// Skipping step size x estimation strategy grid.
    StepSize,
    /// Deviation-schedule gap over (t, k, gamma).
    ErrorSurface,
    /// Guidance-scale sweep.
    GuidanceScale,
    /// SL vs DL vs consistency-baseline objectives.
    SlVsDl,
}

fn run(cli: Cli) -> slad_core::Result<()> {
    match cli.command {
        Command::TrainTeacher { common, checkpoint } => {
            let ctx = rundir::prepare(&common.config, &common.out, common.seed)?;
            commands::train_teacher::run(&ctx, checkpoint.as_deref())
        }
        Command::Distill { common, checkpoint, resume } => {
            let ctx = rundir::prepare(&common.config, &common.out, common.seed)?;
            commands::distill::run(&ctx, &checkpoint, resume.as_deref())
        }
        Command::Sample { common, checkpoint, steps, count, label } => {
            let ctx = rundir::prepare(&common.config, &common.out, common.seed)?;
            commands::sample::run(&ctx, &checkpoint, steps, count, label)
        }
        Command::Eval { common, checkpoint } => {
            let ctx = rundir::prepare(&common.config, &common.out, common.seed)?;
            commands::eval::run(&ctx, &checkpoint)
        }
        Command::Ablate { which, common, checkpoint } => {
            let ctx = rundir::prepare(&common.config, &common.out, common.seed)?;
            match which {
                AblateKind::StepSize => {
                    commands::ablate::step_size(&ctx, commands::ablate::required(checkpoint)?)
                }
                AblateKind::ErrorSurface => commands::ablate::error_surface(&ctx),
                AblateKind::GuidanceScale => {
                    commands::ablate::guidance_scale(&ctx, commands::ablate::required(checkpoint)?)
                }
                AblateKind::SlVsDl => {
                    commands::ablate::sl_vs_dl(&ctx, commands::ablate::required(checkpoint)?)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

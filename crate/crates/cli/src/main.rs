mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fobj_core::{par, Error};

use crate::commands::{CenterArgs, DiscoverArgs, Features, TrainArgs};
use crate::manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::Numeric(_) => 4,
                _ => 3,
            },
        }
    }
}

/// Label-free 3D object discovery on point clouds.
#[derive(Parser)]
#[command(name = "fobj", version)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes.
    Gen {
        /// Engine config; its [scene] and [features] tables are used.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Index of the first scene.
        #[arg(long, default_value_t = 0)]
        first: usize,
    },
    /// Over-segment scenes into superpoints.
    Superpoints {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the center-offset regressor on synthetic views.
    CenterTrain {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 32)]
        context: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the merging policies with PPO.
    Train {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Learned center regressor; the ground-truth field is used otherwise.
        #[arg(long)]
        center_ckpt: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Save parameters every this many epochs (0 = never).
        #[arg(long, default_value_t = 50)]
        checkpoint_every: usize,
    },
    /// Discover objects with trained policies.
    Discover {
        #[arg(long)]
        scenes: PathBuf,
        /// Training output directory or a parameter file.
        #[arg(long)]
        policies: PathBuf,
        #[arg(long, default_value_t = 40)]
        rollouts: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        center_ckpt: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Class-agnostic AP of predictions against scene labels.
    Eval {
        /// Prediction list, pseudo-mask file or pseudo-mask directory.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        /// Also score the predictions after label-guided cleaning.
        #[arg(long)]
        clean: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Discovery counts and accuracy per checkpoint epoch.
    Stats {
        /// Pseudo-mask directory written by `train`.
        #[arg(long)]
        banks: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,150,200")]
        checkpoints: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Colour scenes by predicted mask for viewing.
    ExportPly {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate on a generated dataset for several seeds.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
#[group(multiple = false)]
struct FeatureArgs {
    /// Regenerate semantic features from each scene's class list.
    #[arg(long)]
    oracle_features: bool,
    /// Use the feature block stored in the scene files (default).
    #[arg(long)]
    feat_files: bool,
}

impl FeatureArgs {
    fn get(&self) -> Features {
        if self.oracle_features {
            Features::Oracle
        } else {
            Features::Files
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli.workers;
    let name = match &cli.command {
        Command::Gen { .. } => "gen",
        Command::Superpoints { .. } => "superpoints",
        Command::CenterTrain { .. } => "center-train",
        Command::Train { .. } => "train",
        Command::Discover { .. } => "discover",
        Command::Eval { .. } => "eval",
        Command::Stats { .. } => "stats",
        Command::ExportPly { .. } => "export-ply",
        Command::Benchmark { .. } => "benchmark",
    };
    let m = RunManifest::new(name, workers);
    par::with_workers(workers, move || match cli.command {
        Command::Gen {
            spec,
            out,
            n,
            seed,
            first,
        } => commands::gen(&spec, &out, n, seed, first, m),
        Command::Superpoints { scenes, config, out } => commands::superpoints(&scenes, &config, &out, m),
        Command::CenterTrain {
            out,
            samples,
            epochs,
            hidden,
            context,
            lr,
            seed,
        } => commands::center_train(
            &out,
            &CenterArgs {
                samples,
                epochs,
                hidden,
                context,
                lr,
                seed,
            },
            m,
        ),
        Command::Train {
            scenes,
            config,
            out,
            center_ckpt,
            features,
            epochs,
            seed,
            checkpoint_every,
        } => commands::train_cmd(
            &TrainArgs {
                scenes: &scenes,
                config: &config,
                out: &out,
                center_ckpt: center_ckpt.as_deref(),
                features: features.get(),
                epochs,
                seed,
                checkpoint_every,
            },
            m,
        ),
        Command::Discover {
            scenes,
            policies,
            rollouts,
            out,
            config,
            center_ckpt,
            features,
            seed,
        } => commands::discover(
            &DiscoverArgs {
                scenes: &scenes,
                policies: &policies,
                rollouts,
                out: &out,
                config: config.as_deref(),
                center_ckpt: center_ckpt.as_deref(),
                features: features.get(),
                seed,
            },
            m,
        ),
        Command::Eval {
            pred,
            scenes,
            clean,
            out,
            csv,
        } => commands::eval(&pred, &scenes, clean, &out, csv.as_deref(), m),
        Command::Stats {
            banks,
            scenes,
            checkpoints,
            out,
        } => commands::stats(&banks, &scenes, &checkpoints, out.as_deref(), m),
        Command::ExportPly { scenes, pred, out } => commands::export(&scenes, &pred, &out, m),
        Command::Benchmark { config, seeds, out } => commands::benchmark(config.as_deref(), seeds, &out, m),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FOBJ_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use denc::delta::{Precision, Variant};

#[derive(Debug, Parser)]
#[command(name = "denc", version, about = "Delta-encoder sample synthesis for few-shot classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then DENC_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for episodes. Never changes results.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenFlags {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub unseen: Option<usize>,
    #[arg(long = "samples-per-class")]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub basis_dim: Option<usize>,
    #[arg(long)]
    pub center_dim: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub class_mode_scale: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    /// Use the identity instead of tanh on deformations.
    #[arg(long)]
    pub linear: bool,
    #[arg(long)]
    pub attribute_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub z_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub input_dropout: Option<f64>,
    #[arg(long)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalFlags {
    /// Classes per episode (N).
    #[arg(long)]
    pub way: Option<usize>,
    /// Support samples per class (k).
    #[arg(long)]
    pub shot: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Synthesized samples per class.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    Nn,
    LinearOffset,
}

#[derive(Debug, Clone, Args)]
pub struct Scorer {
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Element type for baselines; checkpoints carry their own.
    #[arg(long)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic benchmark dataset (dataset.dencfs).
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenFlags,
    },
    /// Train a model on the seen classes (model.dencmd, loss.csv).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a model or baseline on unseen-class episodes (report.json, report.csv).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        scorer: Scorer,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Train and score every variant (ablation.csv, ablation.json).
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated subset of variants.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Accuracy against synthesis budget on shared episodes (sweep.csv).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        scorer: Scorer,
        #[command(flatten)]
        eval: EvalFlags,
        /// Comma-separated budgets, e.g. 16,32,64.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Anchors and synthesized samples of one episode as CSV (embeddings.csv).
    ExportEmbeddings {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        eval: EvalFlags,
        /// Also write the episode's real query samples.
        #[arg(long)]
        include_real: bool,
    },
}

/// 2 for usage and configuration, 3 for data and formats, 4 for numerics.
fn exit_code(err: &anyhow::Error) -> u8 {
    use denc::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Numerical { .. }) => 4,
        Some(Error::Config(_) | Error::Argument(_) | Error::State(_)) => 2,
        Some(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { common, gen } => commands::gen(&common, &gen),
        Command::Train {
            common,
            data,
            model,
            train,
        } => commands::train(&common, data, &model, &train),
        Command::Eval {
            common,
            data,
            scorer,
            eval,
        } => commands::eval(&common, data, &scorer, &eval),
        Command::Ablate {
            common,
            data,
            variants,
            model,
            train,
            eval,
        } => commands::ablate(&common, data, &variants, &model, &train, &eval),
        Command::Sweep {
            common,
            data,
            scorer,
            eval,
            counts,
        } => commands::sweep(&common, data, &scorer, &eval, counts),
        Command::ExportEmbeddings {
            common,
            data,
            model,
            eval,
            include_real,
        } => commands::export_embeddings(&common, data, model, &eval, include_real),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

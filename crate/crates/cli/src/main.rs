//! Command-line front end: train, eval, attn, bench and stats subcommands
//! wired over the core crate.
//!
//! Every value flag can also come from a `key=value` config file passed with
//! `--config`; explicit flags win on conflict. Exit codes are scriptable:
//! 0 ok, 2 missing input, 3 parse error, 4 checkpoint/config mismatch,
//! 1 anything else.

mod commands;
mod settings;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "memnet",
    about = "Deep memory network for aspect-level sentiment classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a training log.
    Train(CommonArgs),
    /// Evaluate a checkpoint or a baseline on a test set.
    Eval(EvalArgs),
    /// Write per-instance attention weight reports from a checkpoint.
    Attn(AttnArgs),
    /// Time training epochs across hop counts.
    Bench(BenchArgs),
    /// Print per-split class counts.
    Stats(CommonArgs),
}

#[derive(Args, Clone, Default)]
pub struct CommonArgs {
    /// Optional key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Training corpus (SemEval-2014 task 4 XML).
    #[arg(long)]
    train_xml: Option<PathBuf>,

    /// Test corpus (SemEval-2014 task 4 XML).
    #[arg(long)]
    test_xml: Option<PathBuf>,

    /// Word vectors in GloVe text format.
    #[arg(long)]
    glove: Option<PathBuf>,

    /// Number of computational layers (default 1).
    #[arg(long)]
    hops: Option<usize>,

    /// Location encoding: none, 1, 2, 3 or 4 (default none).
    #[arg(long)]
    location_mode: Option<String>,

    /// Rows in the learned location table (default 100).
    #[arg(long)]
    max_len: Option<usize>,

    /// Learning rate (default 0.01).
    #[arg(long)]
    lr: Option<f64>,

    /// Training epochs (default 100).
    #[arg(long)]
    epochs: Option<usize>,

    /// RNG seed for init, shuffling and OOV vectors (default 42).
    #[arg(long)]
    seed: Option<u64>,

    /// Disable the per-epoch shuffle.
    #[arg(long)]
    no_shuffle: bool,

    /// Checkpoint path (written by train, read by eval/attn).
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Output directory for checkpoints, logs and reports (default "out").
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Write an intermediate checkpoint every N epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Evaluate a baseline instead of a checkpoint: majority or contextavg.
    #[arg(long)]
    baseline: Option<String>,
}

#[derive(Args)]
pub struct AttnArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Restrict reports to these 0-based test instance indices (repeatable;
    /// default all).
    #[arg(long)]
    index: Vec<usize>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated hop counts to time (default 1,2,3,4,5,6,7,8,9).
    #[arg(long)]
    hop_list: Option<String>,

    /// Timed epochs per hop count; the median is reported (default 3).
    #[arg(long)]
    reps: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Attn(args) => commands::attn(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::Stats(args) => commands::stats(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

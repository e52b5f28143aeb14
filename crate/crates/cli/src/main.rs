//! `kdebias`: fit bias subspaces, rewrite embeddings and run bias benchmarks.
//!
//! Exit status: 0 on success, 2 for configuration or I/O problems, 3 when
//! the data is insufficient (out-of-vocabulary sets, too few pairs), 4 on
//! numerical failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "kdebias",
    version,
    about = "Linear and kernelized bias removal for word embeddings"
)]
struct Cli {
    /// Seed for every random choice (pre-image sample, permutations, splits).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a linear or kernel bias model from defining sets.
    Fit(FitArgs),
    /// Write debiased embeddings using a fitted model.
    Apply(ApplyArgs),
    /// Print raw and corrected cosine similarities for word pairs.
    Sim(SimArgs),
    /// Run a bias or quality benchmark.
    Eval(EvalArgs),
    /// Emit the two-dimensional nonlinear removal demo as CSV.
    DemoToy(ToyArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel family name or inline JSON spec; omit for the linear subspace model.
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel width or scale; defaults to 1/d.
    #[arg(long)]
    gamma: Option<f64>,
    /// Offset c0 of the sigmoid and polynomial kernels (default 1).
    #[arg(long)]
    coef0: Option<f64>,
    /// Polynomial degree (default 2).
    #[arg(long)]
    degree: Option<u32>,
}

#[derive(Args)]
struct FitArgs {
    /// Embedding text file, or `-` for stdin.
    #[arg(long)]
    embeddings: PathBuf,
    /// JSON file with `defining_sets` and optional `equality_sets`.
    #[arg(long)]
    sets: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Number of bias components K.
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Keep vectors as loaded instead of scaling them to unit length.
    #[arg(long)]
    no_normalize: bool,
    /// Vocabulary words added to the defining words when fitting the pre-image map.
    #[arg(long, default_value_t = 500)]
    preimage_sample: usize,
    /// Ridge penalty of the pre-image regression.
    #[arg(long, default_value_t = kdebias::preimage::DEFAULT_RIDGE_LAMBDA)]
    ridge_lambda: f64,
    /// Skip the pre-image map (the model can then only correct the metric).
    #[arg(long)]
    no_preimage: bool,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Sets file supplying `equality_sets` for `--equalize`.
    #[arg(long)]
    sets: Option<PathBuf>,
    /// Also equalize the equality sets (linear models only).
    #[arg(long)]
    equalize: bool,
    /// Embedding text output, or `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    /// Keep vectors as loaded instead of scaling them to unit length.
    #[arg(long)]
    no_normalize: bool,
    /// Digits after the decimal point; 17 writes exact round-trip values.
    #[arg(long, default_value_t = 17)]
    precision: usize,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Keep vectors as loaded instead of scaling them to unit length.
    #[arg(long)]
    no_normalize: bool,
    /// Words in pairs: A1 B1 [A2 B2 ...].
    #[arg(required = true)]
    words: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(subcommand)]
    command: EvalCommand,
}

#[derive(Args)]
struct EvalCommon {
    #[arg(long)]
    embeddings: PathBuf,
    /// Model to evaluate next to the raw embeddings.
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSON results; a CSV with the same stem is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep vectors as loaded instead of scaling them to unit length.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Word embedding association test.
    Weat {
        #[command(flatten)]
        common: EvalCommon,
        /// JSON with X, Y, A, B and optional permutations/seed.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Correlation between male-neighbour counts and original bias.
    Professions {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long)]
        professions: PathBuf,
        #[arg(long)]
        male: PathBuf,
        #[arg(long)]
        female: PathBuf,
        #[arg(long, default_value_t = 100)]
        neighbors: usize,
        /// Draw neighbours from professions and lexicons only, not the vocabulary.
        #[arg(long)]
        lexicon_pool: bool,
    },
    /// Recover original gender labels with a kernel SVM.
    Classify {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, default_value_t = 5000)]
        most_biased: usize,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 4000)]
        test: usize,
    },
    /// Spearman correlation with human similarity ratings.
    Simlex {
        #[command(flatten)]
        common: EvalCommon,
        /// Tab-separated word1, word2, score.
        #[arg(long)]
        pairs: PathBuf,
    },
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// CSV output, or `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, seed),
        Command::Apply(a) => commands::apply(a),
        Command::Sim(a) => commands::sim(a),
        Command::Eval(a) => commands::eval(a, cli.seed),
        Command::DemoToy(a) => commands::demo_toy(a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

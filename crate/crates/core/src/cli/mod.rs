//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 numerical
//! failure, 3 finished without converging (outputs are still written).

mod commands;
mod config;

use std::ffi::OsString;

use clap::{Args, Parser, Subcommand};

pub use config::{sha256_file, Manifest, Resolver};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kgretro", version, about = "Retrofit entity embeddings to a typed knowledge graph")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Retrofit embeddings to a graph.
    Retrofit(RetrofitArgs),
    /// Leave-one-relation-out link prediction for several models.
    EvalLinkpred(LinkpredArgs),
    /// Word similarity and analogy scores of an embedding set.
    EvalLexical(LexicalArgs),
    /// Generate a planted-relation synthetic graph with noisy embeddings.
    Synth(SynthArgs),
    /// Relation counts and class signatures of a graph.
    Stats(StatsArgs),
    /// Sample non-edges, or check a negatives file against a graph.
    SampleNeg(SampleNegArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// `src<TAB>rel<TAB>dst` edge list.
    #[arg(long)]
    pub graph: Option<String>,
    /// `id<TAB>class` file.
    #[arg(long)]
    pub vertex_classes: Option<String>,
    /// Embedding file, optionally as `class=path`; repeatable.
    #[arg(long)]
    pub embeddings: Vec<String>,
    /// word2vec-text or tsv, for reading and writing.
    #[arg(long)]
    pub embedding_format: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value file; flags override it. A run manifest works here.
    #[arg(long)]
    pub config: Option<String>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct EngineArgs {
    /// identity, translation, linear or neural.
    #[arg(long)]
    pub kind: Option<String>,
    /// Per-relation kind as `R=kind`; repeatable.
    #[arg(long)]
    pub relation_kind: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta_pos: Option<f64>,
    #[arg(long)]
    pub beta_neg: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Keep linear A unconstrained.
    #[arg(long)]
    pub no_orthogonalize: bool,
    /// gauss-seidel or jacobi.
    #[arg(long)]
    pub update_mode: Option<String>,
    /// same-source or class-restricted.
    #[arg(long)]
    pub neg_strategy: Option<String>,
    #[arg(long)]
    pub sgd_lr: Option<f64>,
    #[arg(long)]
    pub sgd_epochs: Option<usize>,
    #[arg(long)]
    pub sgd_batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RetrofitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Comma-separated alphas; one output set per value, suffixed `_alpha-<value>`.
    #[arg(long)]
    pub alpha_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct LinkpredArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Held-out relation.
    #[arg(long)]
    pub relation: Option<String>,
    /// Comma-separated: none, identity, translation, linear, neural.
    #[arg(long)]
    pub models: Vec<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Classifier features: linear or quadratic.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub classifier_l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LexicalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `w1<TAB>w2<TAB>score` file; repeatable.
    #[arg(long)]
    pub similarity: Vec<String>,
    /// `a b c d` file; repeatable.
    #[arg(long)]
    pub analogies: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_vertices: Option<usize>,
    #[arg(long)]
    pub n_relations: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub mean_degree: Option<f64>,
    #[arg(long)]
    pub translation_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SampleNegArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Restrict to these relations (comma-separated).
    #[arg(long)]
    pub relations: Vec<String>,
    /// same-source or class-restricted.
    #[arg(long)]
    pub neg_strategy: Option<String>,
    /// Verify that this negatives file shares no edge with the graph instead of sampling.
    #[arg(long)]
    pub check: Option<String>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parses `args` (including the program name), runs the subcommand and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let outcome = match &cli.command {
        Command::Retrofit(a) => commands::retrofit(a),
        Command::EvalLinkpred(a) => commands::eval_linkpred(a),
        Command::EvalLexical(a) => commands::eval_lexical(a),
        Command::Synth(a) => commands::synth(a),
        Command::Stats(a) => commands::stats(a),
        Command::SampleNeg(a) => commands::sample_neg(a),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("warning: stopped at max_sweeps without converging");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! `sse`: train, apply and evaluate the two-stage document classifier.

mod commands;
mod config;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "sse",
    version,
    about = "Two-stage semi-supervised document classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override fields of a run configuration file.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Replace the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the output directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replace the corpus path
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Replace the embeddings path
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Replace the TF-IDF vocabulary size
    #[arg(long)]
    max_features: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled + unlabeled corpus
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        labeled: usize,
        #[arg(long, default_value_t = 2000)]
        unlabeled: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Probability of flipping a labeled document's sale label
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Class balance of the labeled subset: stratified or uniform
        #[arg(long, default_value = "stratified")]
        sampling: String,
    },
    /// Write the manual feature block of every document as JSONL
    ExtractFeatures {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit TF-IDF and write document vectors in the shared vector format
    FitEmbeddings {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        max_features: usize,
        /// Split manifest; test documents are then excluded from fitting
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Train both stages and write a model bundle
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Label every document of a corpus with a trained bundle
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Vector file, required for bundles trained on table embeddings
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a bundle on the labeled documents of a corpus
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Split manifest restricting evaluation to one part
        #[arg(long)]
        split: Option<PathBuf>,
        /// Part of the split to score: train, validation or test
        #[arg(long, default_value = "test")]
        part: String,
        /// Report path; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain on growing fractions of the labeled training data
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated fractions in (0, 1]
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Comma-separated seeds
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// CSV path; the full report is written next to it as JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Friedman ranking of models from a run,model,accuracy,f1,tmcc table
    Rank {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a configuration file with the default settings
    InitConfig {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use sse_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => 1,
                E::Parse { .. }
                | E::Schema { .. }
                | E::Format(_)
                | E::Join(_)
                | E::Io { .. }
                | E::Shape(_)
                | E::Fit(_)
                | E::Domain(_) => 2,
            };
        }
        if cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<std::io::Error>()
        {
            return 2;
        }
    }
    3
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SSE_LOG", "warn"))
        .format_timestamp_millis()
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match std::panic::catch_unwind(|| commands::run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}

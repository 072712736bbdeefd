use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifact;
mod cmd;
mod corpus;

/// Find intermediate merge residue in BPE tokenizers and build pruned tokenizers.
#[derive(Parser)]
#[command(name = "litetoken", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a small BPE model on a corpus
    Train(cmd::train::TrainArgs),
    /// Import a vocab.json/merges.txt pair or a tiktoken file into the native format
    Convert(cmd::train::ConvertArgs),
    /// Count final and intermediate token frequencies and neighbors over a corpus
    Analyze(cmd::analyze::AnalyzeArgs),
    /// Sum stats shards produced with --shard-index
    MergeStats(cmd::analyze::MergeStatsArgs),
    /// Score every token and select the residue set
    Identify(cmd::identify::IdentifyArgs),
    /// List tokens from an identify report
    Report(cmd::identify::ReportArgs),
    /// Count the residue set over a grid of thresholds (CSV)
    Sweep(cmd::identify::SweepArgs),
    /// Write the pruned tokenizer and its output mask
    Prune(cmd::prune::PruneArgs),
    /// Encode text line by line
    Encode(cmd::prune::EncodeArgs),
    /// Estimate parameter and compute savings of a smaller vocabulary
    Savings(cmd::savings::SavingsArgs),
    /// Render the merge tree of a token as DOT or JSON
    Graph(cmd::graph::GraphArgs),
}

/// Bad or missing arguments (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Malformed or mismatched input data (exit code 3).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use litetoken_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<DataError>() || cause.is::<serde_json::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidInput(_) | E::UnsupportedFlavor(_) => 2,
                E::Io(_) => 1,
                _ => 3,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd::train::train(a),
        Command::Convert(a) => cmd::train::convert(a),
        Command::Analyze(a) => cmd::analyze::analyze(a),
        Command::MergeStats(a) => cmd::analyze::merge_stats(a),
        Command::Identify(a) => cmd::identify::identify(a),
        Command::Report(a) => cmd::identify::report(a),
        Command::Sweep(a) => cmd::identify::sweep(a),
        Command::Prune(a) => cmd::prune::prune(a),
        Command::Encode(a) => cmd::prune::encode(a),
        Command::Savings(a) => cmd::savings::savings(a),
        Command::Graph(a) => cmd::graph::graph(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

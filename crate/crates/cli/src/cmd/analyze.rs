use std::path::PathBuf;
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Mutex;
use std::thread;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use litetoken_core::stats::{merge_shards, StatsFile};
use litetoken_core::{AccumulateOptions, Accumulator, CorpusStats, F2Mode, NeighborScope, TokenizerModel};
use serde::Serialize;

use crate::artifact::{self, RunConfig, TokenizerArgs};
use crate::corpus::CorpusArgs;
use crate::UsageError;

const BATCH: usize = 256;
pub const THREADS_ENV: &str = "LITETOKEN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum F2ModeArg {
    /// Count merge operands while encoding
    Trace,
    /// Propagate final counts down the merge tree
    Tree,
    /// As tree, counting each descendant once
    TreeDistinct,
}

impl From<F2ModeArg> for F2Mode {
    fn from(m: F2ModeArg) -> Self {
        match m {
            F2ModeArg::Trace => F2Mode::Trace,
            F2ModeArg::Tree => F2Mode::Tree,
            F2ModeArg::TreeDistinct => F2Mode::TreeDistinct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ScopeArg {
    /// Neighbors anywhere in the same document
    Document,
    /// Neighbors inside the same pretoken only
    Pretoken,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Intermediate frequency counting; trace for rank tables, tree otherwise
    #[arg(long, value_enum)]
    pub f2_mode: Option<F2ModeArg>,

    #[arg(long, value_enum, default_value_t = ScopeArg::Document)]
    pub neighbor_scope: ScopeArg,

    /// Worker threads [default: $LITETOKEN_THREADS, else available cores]
    #[arg(long)]
    pub threads: Option<usize>,

    /// Process only documents whose index is this value modulo --shard-count
    #[arg(long, requires = "shard_count")]
    pub shard_index: Option<usize>,

    #[arg(long, requires = "shard_index")]
    pub shard_count: Option<usize>,

    #[arg(short, long)]
    pub output: PathBuf,
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| UsageError(format!("{THREADS_ENV}={v:?} is not a number")).into()),
        Err(_) => Ok(thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn analyze(mut args: AnalyzeArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    args.corpus.resolve()?;
    artifact::output(&mut args.output)?;
    let shard = match (args.shard_index, args.shard_count) {
        (Some(i), Some(n)) if i < n => Some((i, n)),
        (Some(i), Some(n)) => return Err(UsageError(format!("shard index {i} is not below shard count {n}")).into()),
        _ => None,
    };
    let threads = thread_count(args.threads)?;
    let model = args.tokenizer.load()?.model;
    let mut options = AccumulateOptions::for_model(&model);
    if let Some(m) = args.f2_mode {
        options.f2_mode = m.into();
    }
    options.neighbor_scope = match args.neighbor_scope {
        ScopeArg::Document => NeighborScope::Document,
        ScopeArg::Pretoken => NeighborScope::Pretoken,
    };
    let config = RunConfig::new("analyze", &args)?;

    let stats = run_parallel(&model, options, &args.corpus, shard, threads)?;
    artifact::write_compact_json(&args.output, &StatsFile::from_stats(&stats, config.to_value()))?;
    eprintln!(
        "{} documents, {} tokens; f2 mode {:?}",
        stats.total_docs, stats.total_tokens, stats.f2_mode
    );
    Ok(())
}

/// Streams the corpus to `threads` workers in batches and sums their counters.
fn run_parallel(
    model: &TokenizerModel,
    options: AccumulateOptions,
    corpus: &CorpusArgs,
    shard: Option<(usize, usize)>,
    threads: usize,
) -> Result<CorpusStats> {
    Accumulator::new(model, options)?;
    let (tx, rx) = sync_channel::<Vec<Vec<u8>>>(threads * 2);
    let rx = Mutex::new(rx);
    thread::scope(|s| {
        let workers: Vec<_> = (0..threads).map(|_| s.spawn(|| worker(model, options, &rx))).collect();
        let mut batch = Vec::with_capacity(BATCH);
        let mut index = 0usize;
        let read = corpus.for_each(|doc| {
            let keep = shard.is_none_or(|(i, n)| index % n == i);
            index += 1;
            if keep {
                batch.push(doc);
                if batch.len() == BATCH {
                    tx.send(std::mem::replace(&mut batch, Vec::with_capacity(BATCH)))
                        .context("worker stopped")?;
                }
            }
            Ok(())
        });
        if !batch.is_empty() && read.is_ok() {
            let _ = tx.send(batch);
        }
        drop(tx);
        let shards = workers
            .into_iter()
            .map(|w| w.join().expect("worker panicked"))
            .collect::<Result<Vec<_>>>();
        read?;
        Ok(merge_shards(shards?)?)
    })
}

fn worker(model: &TokenizerModel, options: AccumulateOptions, rx: &Mutex<Receiver<Vec<Vec<u8>>>>) -> Result<CorpusStats> {
    let mut acc = Accumulator::new(model, options)?;
    let mut failure = None;
    loop {
        let batch = rx.lock().expect("queue lock").recv();
        let Ok(batch) = batch else { break };
        if failure.is_some() {
            continue;
        }
        for doc in batch {
            if let Err(e) = acc.add_document(&doc) {
                failure = Some(e);
                break;
            }
        }
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(acc.finish()?),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MergeStatsArgs {
    /// Stats files to combine
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn merge_stats(mut args: MergeStatsArgs) -> Result<()> {
    args.inputs.iter_mut().try_for_each(artifact::input)?;
    artifact::output(&mut args.output)?;
    let config = RunConfig::new("merge-stats", &args)?;
    let shards = args
        .inputs
        .iter()
        .map(|p| {
            let file: StatsFile = artifact::read_json(p)?;
            file.into_stats().with_context(|| format!("in {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = merge_shards(shards)?;
    artifact::write_compact_json(&args.output, &StatsFile::from_stats(&stats, config.to_value()))?;
    eprintln!("{} documents, {} tokens", stats.total_docs, stats.total_tokens);
    Ok(())
}

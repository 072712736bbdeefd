//! Corpus input: plain text with one document per line, or JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifact;
use crate::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum CorpusFormat {
    /// JSON lines for .jsonl/.json files, plain lines otherwise
    Auto,
    Lines,
    Jsonl,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Corpus file; repeat for several
    #[arg(short, long = "corpus", value_name = "FILE", required = true)]
    pub corpus: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = CorpusFormat::Auto)]
    pub corpus_format: CorpusFormat,

    /// Field holding the document text in JSON lines
    #[arg(long, default_value = "text")]
    pub text_field: String,

    /// Keep a uniform random sample of this many documents
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,

    /// Seed for --sample
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl CorpusArgs {
    pub fn resolve(&mut self) -> Result<()> {
        self.corpus.iter_mut().try_for_each(artifact::input)
    }

    /// Calls `f` for every document in corpus order. With `--sample` the
    /// sampled documents keep their original relative order.
    pub fn for_each(&self, mut f: impl FnMut(Vec<u8>) -> Result<()>) -> Result<()> {
        let Some(k) = self.sample else {
            return self.scan(f);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut reservoir: Vec<(usize, Vec<u8>)> = Vec::with_capacity(k);
        let mut seen = 0usize;
        self.scan(|doc| {
            if reservoir.len() < k {
                reservoir.push((seen, doc));
            } else {
                let j = rng.gen_range(0..=seen);
                if j < k {
                    reservoir[j] = (seen, doc);
                }
            }
            seen += 1;
            Ok(())
        })?;
        reservoir.sort_by_key(|(i, _)| *i);
        reservoir.into_iter().try_for_each(|(_, doc)| f(doc))
    }

    pub fn collect(&self) -> Result<Vec<Vec<u8>>> {
        let mut docs = Vec::new();
        self.for_each(|d| {
            docs.push(d);
            Ok(())
        })?;
        Ok(docs)
    }

    fn scan(&self, mut f: impl FnMut(Vec<u8>) -> Result<()>) -> Result<()> {
        for path in &self.corpus {
            let jsonl = match self.corpus_format {
                CorpusFormat::Jsonl => true,
                CorpusFormat::Lines => false,
                CorpusFormat::Auto => matches!(
                    path.extension().and_then(|e| e.to_str()),
                    Some("jsonl" | "json" | "ndjson")
                ),
            };
            read_file(path, jsonl, &self.text_field, &mut f)?;
        }
        Ok(())
    }
}

fn read_file(path: &Path, jsonl: bool, field: &str, f: &mut impl FnMut(Vec<u8>) -> Result<()>) -> Result<()> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    for (i, line) in BufReader::new(file).split(b'\n').enumerate() {
        let mut line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if line.is_empty() {
            continue;
        }
        if !jsonl {
            f(line)?;
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let value: serde_json::Value =
            serde_json::from_slice(&line).map_err(|e| DataError(format!("{}: {e}", at())))?;
        let text = value
            .get(field)
            .and_then(|v| v.as_str())
            .ok_or_else(|| DataError(format!("{}: no string field {field:?}", at())))?;
        f(text.as_bytes().to_vec())?;
    }
    Ok(())
}

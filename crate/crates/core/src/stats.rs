//! Corpus statistics behind residue scoring: final counts, intermediate
//! (consumed) counts and left/right neighbor counters.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MergeGraph;
use crate::model::{Flavor, TokenId, TokenizerModel};
use crate::pretokenize::{segment_specials, Segment};

const CACHE_LIMIT: usize = 1 << 20;

pub const STATS_FORMAT: &str = "litetoken-stats";
pub const STATS_VERSION: u32 = 1;

/// How intermediate counts are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F2Mode {
    /// Count operands consumed by merges actually applied while encoding.
    Trace,
    /// Derive from final counts through the merge tree, counting a token
    /// once per occurrence inside each descendant.
    Tree,
    /// As `Tree`, but each descendant counts once.
    TreeDistinct,
}

impl F2Mode {
    pub fn default_for(flavor: Flavor) -> Self {
        match flavor {
            Flavor::Standard => F2Mode::Tree,
            Flavor::RankGreedy => F2Mode::Trace,
        }
    }
}

/// Where neighbor pairs may be taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NeighborScope {
    /// Adjacent final tokens anywhere in a document.
    #[default]
    Document,
    /// Only adjacent tokens inside the same pretoken.
    Pretoken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccumulateOptions {
    pub f2_mode: F2Mode,
    pub neighbor_scope: NeighborScope,
}

impl AccumulateOptions {
    pub fn for_model(model: &TokenizerModel) -> Self {
        AccumulateOptions {
            f2_mode: F2Mode::default_for(model.flavor()),
            neighbor_scope: NeighborScope::Document,
        }
    }
}

type Neighbors = HashMap<TokenId, HashMap<TokenId, u64>>;

/// Accumulated counters for one model over a corpus (or a shard of one).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub model_hash: String,
    pub f2_mode: F2Mode,
    pub neighbor_scope: NeighborScope,
    pub total_docs: u64,
    pub total_tokens: u64,
    pub f1: Vec<u64>,
    pub f2: Vec<u64>,
    /// `left[t][s]`: times `s` immediately preceded `t`.
    pub left: Neighbors,
    /// `right[t][s]`: times `s` immediately followed `t`.
    pub right: Neighbors,
}

/// Shards carry the same counters as a full run.
pub type StatsShard = CorpusStats;

impl CorpusStats {
    pub fn empty(model: &TokenizerModel, options: AccumulateOptions) -> Self {
        CorpusStats {
            model_hash: model.content_hash().to_string(),
            f2_mode: options.f2_mode,
            neighbor_scope: options.neighbor_scope,
            total_docs: 0,
            total_tokens: 0,
            f1: vec![0; model.vocab_size()],
            f2: vec![0; model.vocab_size()],
            left: HashMap::new(),
            right: HashMap::new(),
        }
    }

    pub fn f1(&self, t: TokenId) -> u64 {
        self.f1.get(t.index()).copied().unwrap_or(0)
    }

    pub fn f2(&self, t: TokenId) -> u64 {
        self.f2.get(t.index()).copied().unwrap_or(0)
    }

    pub fn left_neighbors(&self, t: TokenId) -> Option<&HashMap<TokenId, u64>> {
        self.left.get(&t)
    }

    pub fn right_neighbors(&self, t: TokenId) -> Option<&HashMap<TokenId, u64>> {
        self.right.get(&t)
    }

    pub fn check_model(&self, model: &TokenizerModel) -> Result<()> {
        if self.model_hash != model.content_hash() {
            return Err(Error::HashMismatch {
                expected: model.content_hash().to_string(),
                found: self.model_hash.clone(),
            });
        }
        Ok(())
    }
}

/// Streams documents through a model, returning per-shard statistics.
pub struct Accumulator<'m> {
    model: &'m TokenizerModel,
    graph: Option<MergeGraph>,
    stats: CorpusStats,
    // per-pretoken memo: final ids and consumed operands
    cache: HashMap<Vec<u8>, (Vec<TokenId>, Vec<TokenId>)>,
}

impl<'m> Accumulator<'m> {
    pub fn new(model: &'m TokenizerModel, options: AccumulateOptions) -> Result<Self> {
        let graph = match options.f2_mode {
            F2Mode::Trace => None,
            F2Mode::Tree | F2Mode::TreeDistinct => {
                if model.flavor() != Flavor::Standard {
                    return Err(Error::UnsupportedFlavor(model.flavor().name()));
                }
                Some(MergeGraph::build(model)?)
            }
        };
        Ok(Accumulator {
            model,
            graph,
            stats: CorpusStats::empty(model, options),
            cache: HashMap::new(),
        })
    }

    pub fn add_document(&mut self, doc: &[u8]) -> Result<()> {
        let model = self.model;
        let stats = &mut self.stats;
        stats.total_docs += 1;
        let crosses = stats.neighbor_scope == NeighborScope::Document;
        let mut prev: Option<TokenId> = None;
        for segment in segment_specials(doc, model.special_bytes()) {
            let pieces: Vec<std::ops::Range<usize>> = match segment {
                Segment::Special(id, _) => {
                    record_final(stats, &mut prev, id, crosses);
                    continue;
                }
                Segment::Text(range) => model
                    .pretokenizer()
                    .split(&doc[range.clone()])
                    .into_iter()
                    .map(|r| r.start + range.start..r.end + range.start)
                    .collect(),
            };
            for piece in pieces {
                let bytes = &doc[piece.clone()];
                if !self.cache.contains_key(bytes) {
                    if self.cache.len() >= CACHE_LIMIT {
                        self.cache.clear();
                    }
                    let trace = model.encode_pretoken(bytes).map_err(|e| match e {
                        Error::UnknownByte { byte, offset } => Error::UnknownByte {
                            byte,
                            offset: offset + piece.start,
                        },
                        e => e,
                    })?;
                    let consumed = trace.consumed().collect();
                    self.cache.insert(bytes.to_vec(), (trace.final_ids(), consumed));
                }
                let (finals, consumed) = &self.cache[bytes];
                if stats.f2_mode == F2Mode::Trace {
                    for t in consumed {
                        stats.f2[t.index()] += 1;
                    }
                }
                for (k, &t) in finals.iter().enumerate() {
                    record_final(stats, &mut prev, t, k > 0 || crosses);
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<CorpusStats> {
        let mut stats = self.stats;
        if let Some(graph) = &self.graph {
            stats.f2 = match stats.f2_mode {
                F2Mode::Tree => graph.consumed_from_finals(&stats.f1)?,
                F2Mode::TreeDistinct => graph.consumed_from_finals_distinct(&stats.f1)?,
                F2Mode::Trace => unreachable!("no graph in trace mode"),
            };
        }
        Ok(stats)
    }
}

fn record_final(stats: &mut CorpusStats, prev: &mut Option<TokenId>, t: TokenId, link: bool) {
    stats.f1[t.index()] += 1;
    stats.total_tokens += 1;
    if let (Some(p), true) = (*prev, link) {
        *stats.right.entry(p).or_default().entry(t).or_insert(0) += 1;
        *stats.left.entry(t).or_default().entry(p).or_insert(0) += 1;
    }
    *prev = Some(t);
}

pub fn accumulate<D: AsRef<[u8]>>(
    model: &TokenizerModel,
    docs: impl IntoIterator<Item = D>,
    options: AccumulateOptions,
) -> Result<CorpusStats> {
    let mut acc = Accumulator::new(model, options)?;
    for doc in docs {
        acc.add_document(doc.as_ref())?;
    }
    acc.finish()
}

/// Element-wise sum of shards built with the same model and options.
pub fn merge_shards(shards: Vec<StatsShard>) -> Result<CorpusStats> {
    let mut iter = shards.into_iter();
    let mut out = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("no shards to merge".into()))?;
    for shard in iter {
        if shard.model_hash != out.model_hash {
            return Err(Error::HashMismatch {
                expected: out.model_hash.clone(),
                found: shard.model_hash,
            });
        }
        if shard.f2_mode != out.f2_mode || shard.neighbor_scope != out.neighbor_scope {
            return Err(Error::Integrity("shards were built with different options".into()));
        }
        if shard.f1.len() != out.f1.len() {
            return Err(Error::Integrity("shards disagree on vocabulary size".into()));
        }
        out.total_docs += shard.total_docs;
        out.total_tokens += shard.total_tokens;
        for (a, b) in out.f1.iter_mut().zip(&shard.f1) {
            *a += b;
        }
        for (a, b) in out.f2.iter_mut().zip(&shard.f2) {
            *a += b;
        }
        for (side, other) in [(&mut out.left, shard.left), (&mut out.right, shard.right)] {
            for (t, counter) in other {
                let dst = side.entry(t).or_default();
                for (s, c) in counter {
                    *dst.entry(s).or_insert(0) += c;
                }
            }
        }
    }
    Ok(out)
}

/// Entropy in nats of the maximum-likelihood distribution given by `counts`.
pub fn entropy<'a>(counts: impl IntoIterator<Item = &'a u64> + Clone) -> f64 {
    let total: u64 = counts.clone().into_iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    0.0 - counts
        .into_iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `(S_left, S_right)` in nats; an unobserved side has entropy zero.
pub fn neighbor_entropy(stats: &CorpusStats, t: TokenId) -> (f64, f64) {
    let side = |m: Option<&HashMap<TokenId, u64>>| m.map(|c| entropy(c.values())).unwrap_or(0.0);
    (side(stats.left.get(&t)), side(stats.right.get(&t)))
}

/// On-disk form with sorted sparse counters.
#[derive(Debug, Serialize, Deserialize)]
pub struct StatsFile {
    pub format: String,
    pub version: u32,
    pub model_hash: String,
    pub f2_mode: F2Mode,
    pub neighbor_scope: NeighborScope,
    pub vocab_size: usize,
    pub total_docs: u64,
    pub total_tokens: u64,
    pub f1: BTreeMap<TokenId, u64>,
    pub f2: BTreeMap<TokenId, u64>,
    pub left: BTreeMap<TokenId, BTreeMap<TokenId, u64>>,
    pub right: BTreeMap<TokenId, BTreeMap<TokenId, u64>>,
    /// Free-form record of how the file was produced.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl StatsFile {
    pub fn from_stats(stats: &CorpusStats, config: serde_json::Value) -> Self {
        let sparse = |v: &[u64]| {
            v.iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(i, c)| (TokenId(i as u32), *c))
                .collect()
        };
        let sorted = |m: &Neighbors| {
            m.iter()
                .map(|(t, c)| (*t, c.iter().map(|(s, n)| (*s, *n)).collect()))
                .collect()
        };
        StatsFile {
            format: STATS_FORMAT.into(),
            version: STATS_VERSION,
            model_hash: stats.model_hash.clone(),
            f2_mode: stats.f2_mode,
            neighbor_scope: stats.neighbor_scope,
            vocab_size: stats.f1.len(),
            total_docs: stats.total_docs,
            total_tokens: stats.total_tokens,
            f1: sparse(&stats.f1),
            f2: sparse(&stats.f2),
            left: sorted(&stats.left),
            right: sorted(&stats.right),
            config,
        }
    }

    pub fn into_stats(self) -> Result<CorpusStats> {
        if self.format != STATS_FORMAT || self.version != STATS_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported stats file {} v{}",
                self.format, self.version
            )));
        }
        let dense = |m: BTreeMap<TokenId, u64>| -> Result<Vec<u64>> {
            let mut v = vec![0; self.vocab_size];
            for (t, c) in m {
                *v.get_mut(t.index()).ok_or(Error::UnknownId(t.0))? = c;
            }
            Ok(v)
        };
        let unsort = |m: BTreeMap<TokenId, BTreeMap<TokenId, u64>>| -> Neighbors {
            m.into_iter().map(|(t, c)| (t, c.into_iter().collect())).collect()
        };
        Ok(CorpusStats {
            model_hash: self.model_hash,
            f2_mode: self.f2_mode,
            neighbor_scope: self.neighbor_scope,
            total_docs: self.total_docs,
            total_tokens: self.total_tokens,
            f1: dense(self.f1)?,
            f2: dense(self.f2)?,
            left: unsort(self.left),
            right: unsort(self.right),
        })
    }
}

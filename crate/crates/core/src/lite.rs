//! The pruned tokenizer: residue tokens are split back into their parts
//! and the affected pretokens are re-merged using only surviving merges.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::encode::{merge_sequence, EncodeTrace};
use crate::error::{Error, Result};
use crate::format::NativeModel;
use crate::model::{Flavor, MergeRule, TokenId, TokenizerModel};
use crate::pretokenize::{segment_specials, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodeMode {
    /// The unmodified base encoding.
    Original,
    SplitOnly,
    SplitRemerge,
    /// Split-only, emitted pretoken by pretoken so that output already
    /// produced is never revised.
    Incremental,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteEncoding {
    pub ids: Vec<TokenId>,
    pub mode: EncodeMode,
}

/// A token sequence partitioned by pretoken.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segmented {
    pub ids: Vec<TokenId>,
    pub spans: Vec<SegmentSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSpan {
    pub tokens: Range<usize>,
    /// At least one removed token was split inside this span.
    pub split: bool,
    pub special: bool,
}

#[derive(Debug, Clone)]
pub struct LiteTokenizer {
    base: TokenizerModel,
    imr: BTreeSet<TokenId>,
    removed: Vec<bool>,
}

impl LiteTokenizer {
    pub fn new(base: TokenizerModel, imr: BTreeSet<TokenId>) -> Result<Self> {
        let mut removed = vec![false; base.vocab_size()];
        for &t in &imr {
            base.check_id(t)?;
            if base.is_base(t) {
                return Err(Error::InvalidInput(format!("cannot remove base token {t}")));
            }
            if base.is_special(t) {
                return Err(Error::InvalidInput(format!("cannot remove special token {t}")));
            }
            removed[t.index()] = true;
        }
        Ok(LiteTokenizer { base, imr, removed })
    }

    pub fn base(&self) -> &TokenizerModel {
        &self.base
    }

    pub fn imr(&self) -> &BTreeSet<TokenId> {
        &self.imr
    }

    pub fn is_removed(&self, t: TokenId) -> bool {
        self.removed.get(t.index()).copied().unwrap_or(false)
    }

    /// Removed ids in ascending order.
    pub fn removed_ids(&self) -> Vec<TokenId> {
        self.imr.iter().copied().collect()
    }

    pub fn effective_vocab_size(&self) -> usize {
        self.base.vocab_size() - self.imr.len()
    }

    /// Base merges whose result is kept (standard flavor; empty otherwise).
    pub fn surviving_merges(&self) -> Vec<MergeRule> {
        self.base
            .merges()
            .iter()
            .filter(|m| !self.is_removed(m.result))
            .copied()
            .collect()
    }

    /// `(token, rank)` for every kept token (rank-greedy flavor; empty otherwise).
    pub fn surviving_ranks(&self) -> Vec<(TokenId, u32)> {
        self.base
            .ids()
            .filter(|t| !self.is_removed(*t))
            .filter_map(|t| self.base.rank(t).map(|r| (t, r)))
            .collect()
    }

    pub fn pair_merge(&self, left: TokenId, right: TokenId) -> Option<(u32, TokenId)> {
        self.base
            .pair_merge(left, right)
            .filter(|(_, t)| !self.is_removed(*t))
    }

    /// Replaces every removed token in the base encoding by the pair it was
    /// merged from, recursively, using the decomposition recorded in the trace.
    pub fn split(&self, trace: &EncodeTrace) -> Segmented {
        let mut out = Segmented::default();
        for span in &trace.spans {
            let start = out.ids.len();
            let mut split = false;
            for &node in &trace.final_nodes[span.tokens.clone()] {
                split |= self.expand(trace, node, &mut out.ids);
            }
            out.spans.push(SegmentSpan {
                tokens: start..out.ids.len(),
                split,
                special: span.special,
            });
        }
        out
    }

    fn expand(&self, trace: &EncodeTrace, node: usize, out: &mut Vec<TokenId>) -> bool {
        let mut stack = vec![node];
        let mut split = false;
        while let Some(n) = stack.pop() {
            let node = &trace.nodes[n];
            match node.parts {
                Some((l, r)) if self.is_removed(node.token) => {
                    split = true;
                    stack.push(r);
                    stack.push(l);
                }
                _ => out.push(node.token),
            }
        }
        split
    }

    /// Re-runs merge resolution with removed results masked, inside each
    /// span that had a split. Other spans are copied unchanged.
    pub fn remerge(&self, segmented: &Segmented) -> Segmented {
        let mut out = Segmented::default();
        for span in &segmented.spans {
            let start = out.ids.len();
            let mut ids = segmented.ids[span.tokens.clone()].to_vec();
            if span.split && !span.special {
                merge_sequence(&mut ids, |t| *t, |l, r| self.pair_merge(l, r), |_, _, _, t| t);
            }
            out.ids.extend(ids);
            out.spans.push(SegmentSpan {
                tokens: start..out.ids.len(),
                ..span.clone()
            });
        }
        out
    }

    pub fn encode(&self, text: &[u8], mode: EncodeMode) -> Result<LiteEncoding> {
        let trace = self.base.encode(text)?;
        let ids = match mode {
            EncodeMode::Original => trace.final_ids(),
            EncodeMode::SplitOnly | EncodeMode::Incremental => self.split(&trace).ids,
            EncodeMode::SplitRemerge => self.remerge(&self.split(&trace)).ids,
        };
        Ok(LiteEncoding { ids, mode })
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        self.base.decode(ids)
    }

    pub fn incremental(&self) -> IncrementalEncoder<'_> {
        IncrementalEncoder {
            lite: self,
            buffer: Vec::new(),
        }
    }

    pub fn export_mask(&self) -> MaskExport {
        let mut bitmask = vec![0u8; self.base.vocab_size().div_ceil(8)];
        for t in &self.imr {
            bitmask[t.index() / 8] |= 1 << (t.index() % 8);
        }
        MaskExport {
            ids: self.removed_ids(),
            bitmask,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NativeModel::from_model(&self.base, Some(&self.imr)))?)
    }

    /// Reads a native model; a document without an `imr` field yields an
    /// identity pruning.
    pub fn from_json(text: &str) -> Result<Self> {
        let native: NativeModel = serde_json::from_str(text)?;
        let (model, imr) = native.into_model()?;
        LiteTokenizer::new(model, imr.unwrap_or_default())
    }
}

/// Removed ids as a sorted list and as a dense bitmask (bit `i % 8` of
/// byte `i / 8`, least significant bit first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskExport {
    pub ids: Vec<TokenId>,
    pub bitmask: Vec<u8>,
}

impl MaskExport {
    pub fn is_set(&self, t: TokenId) -> bool {
        self.bitmask
            .get(t.index() / 8)
            .is_some_and(|b| b & (1 << (t.index() % 8)) != 0)
    }

    pub fn count_ones(&self) -> usize {
        self.bitmask.iter().map(|b| b.count_ones() as usize).sum()
    }
}

/// Streaming split-only encoder. A pretoken is emitted once the next one
/// has begun (or on [`IncrementalEncoder::finish`]), so emitted ids are final.
pub struct IncrementalEncoder<'a> {
    lite: &'a LiteTokenizer,
    buffer: Vec<u8>,
}

impl IncrementalEncoder<'_> {
    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<TokenId>> {
        self.buffer.extend_from_slice(bytes);
        let complete = incomplete_utf8_start(&self.buffer);
        let pieces = self.pieces(complete);
        let mut hold = match pieces.last() {
            Some((range, false)) => range.start,
            _ => complete,
        };
        if let Some(partial) = self.partial_special_start() {
            hold = hold.min(partial);
        }
        let ready = pieces.iter().take_while(|(r, _)| r.end <= hold).count();
        let cut = if ready == 0 { 0 } else { pieces[ready - 1].0.end };
        self.emit(&pieces[..ready], cut)
    }

    pub fn finish(mut self) -> Result<Vec<TokenId>> {
        let end = self.buffer.len();
        let pieces = self.pieces(end);
        self.emit(&pieces, end)
    }

    fn pieces(&self, end: usize) -> Vec<(Range<usize>, bool)> {
        let base = self.lite.base();
        let mut out = Vec::new();
        for segment in segment_specials(&self.buffer[..end], base.special_bytes()) {
            match segment {
                Segment::Special(_, r) => out.push((r, true)),
                Segment::Text(r) => out.extend(
                    base.pretokenizer()
                        .split(&self.buffer[r.clone()])
                        .into_iter()
                        .map(|p| (p.start + r.start..p.end + r.start, false)),
                ),
            }
        }
        out
    }

    /// Start of the longest buffer suffix that is a proper prefix of a special token.
    fn partial_special_start(&self) -> Option<usize> {
        let specials = self.lite.base().special_bytes();
        (0..self.buffer.len()).find(|&i| {
            let tail = &self.buffer[i..];
            specials
                .iter()
                .any(|(s, _)| s.len() > tail.len() && s.starts_with(tail))
        })
    }

    fn emit(&mut self, pieces: &[(Range<usize>, bool)], cut: usize) -> Result<Vec<TokenId>> {
        let base = self.lite.base();
        let mut ids = Vec::new();
        for (range, special) in pieces {
            let bytes = &self.buffer[range.clone()];
            if *special {
                ids.extend(base.token_id(bytes));
                continue;
            }
            let trace = base.encode_pretoken(bytes)?;
            ids.extend(self.lite.split(&trace).ids);
        }
        self.buffer.drain(..cut);
        Ok(ids)
    }
}

/// Start of a truncated UTF-8 sequence at the end of `bytes`, or `bytes.len()`.
fn incomplete_utf8_start(bytes: &[u8]) -> usize {
    let n = bytes.len();
    for back in 1..=n.min(3) {
        let b = bytes[n - back];
        if b & 0xC0 == 0x80 {
            continue;
        }
        let need = match b {
            0xC0..=0xDF => 2,
            0xE0..=0xEF => 3,
            0xF0..=0xF7 => 4,
            _ => 1,
        };
        return if need > back { n - back } else { n };
    }
    n
}

/// Removal set bound to a model hash, as written by the identify step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImrFile {
    pub format: String,
    pub model_hash: String,
    pub flavor: Flavor,
    pub imr: Vec<TokenId>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ImrFile {
    pub const FORMAT: &'static str = "litetoken-imr";

    pub fn new(model: &TokenizerModel, imr: &BTreeSet<TokenId>, config: serde_json::Value) -> Self {
        ImrFile {
            format: Self::FORMAT.into(),
            model_hash: model.content_hash().to_string(),
            flavor: model.flavor(),
            imr: imr.iter().copied().collect(),
            config,
        }
    }

    pub fn check(&self, model: &TokenizerModel) -> Result<BTreeSet<TokenId>> {
        if self.format != Self::FORMAT {
            return Err(Error::Integrity(format!("unknown removal file format {:?}", self.format)));
        }
        if self.model_hash != model.content_hash() {
            return Err(Error::HashMismatch {
                expected: model.content_hash().to_string(),
                found: self.model_hash.clone(),
            });
        }
        Ok(self.imr.iter().copied().collect())
    }
}

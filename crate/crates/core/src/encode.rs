//! Encoding with a full record of the merges that were applied.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{TokenId, TokenizerModel};
use crate::pretokenize::{segment_specials, Segment};

/// One token instance produced while encoding: either an atom taken from
/// the input or the product of merging two earlier nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceNode {
    pub token: TokenId,
    /// Indices of the left and right operand nodes, for merged tokens.
    pub parts: Option<(usize, usize)>,
    pub rank: Option<u32>,
}

/// A pretoken (or special token) and the final tokens covering it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretokenSpan {
    /// Range over [`EncodeTrace::final_nodes`].
    pub tokens: Range<usize>,
    /// Range over the input bytes.
    pub bytes: Range<usize>,
    pub special: bool,
}

/// An applied merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formation {
    pub token: TokenId,
    pub left: TokenId,
    pub right: TokenId,
    pub rank: u32,
    /// Whether the product is one of the final tokens.
    pub survived: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodeTrace {
    pub nodes: Vec<TraceNode>,
    pub final_nodes: Vec<usize>,
    pub spans: Vec<PretokenSpan>,
}

impl EncodeTrace {
    pub fn final_ids(&self) -> Vec<TokenId> {
        self.final_nodes.iter().map(|&n| self.nodes[n].token).collect()
    }

    pub fn len(&self) -> usize {
        self.final_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.final_nodes.is_empty()
    }

    pub fn formations(&self) -> Vec<Formation> {
        let mut survived = vec![false; self.nodes.len()];
        for &n in &self.final_nodes {
            survived[n] = true;
        }
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, node)| {
                let (l, r) = node.parts?;
                Some(Formation {
                    token: node.token,
                    left: self.nodes[l].token,
                    right: self.nodes[r].token,
                    rank: node.rank.unwrap_or(0),
                    survived: survived[i],
                })
            })
            .collect()
    }

    /// Every token instance that was consumed by a later merge, including
    /// base atoms.
    pub fn consumed(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.nodes.iter().filter_map(|n| n.parts).flat_map(move |(l, r)| {
            [self.nodes[l].token, self.nodes[r].token]
        })
    }

    /// Number of atoms (nodes without parts) in the trace.
    pub fn atom_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parts.is_none()).count()
    }
}

/// Repeatedly merges the adjacent pair with the lowest rank (leftmost on
/// ties) until no pair is mergeable.
pub(crate) fn merge_sequence<T>(
    items: &mut Vec<T>,
    id_of: impl Fn(&T) -> TokenId,
    lookup: impl Fn(TokenId, TokenId) -> Option<(u32, TokenId)>,
    mut combine: impl FnMut(T, T, u32, TokenId) -> T,
) {
    if items.len() < 2 {
        return;
    }
    let mut pairs: Vec<Option<(u32, TokenId)>> = items
        .windows(2)
        .map(|w| lookup(id_of(&w[0]), id_of(&w[1])))
        .collect();
    loop {
        let best = pairs
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|(rank, _)| (rank, i)))
            .min();
        let Some((rank, pos)) = best else { break };
        let result = pairs[pos].expect("selected pair exists").1;
        let right = items.remove(pos + 1);
        let left = items.remove(pos);
        items.insert(pos, combine(left, right, rank, result));
        pairs.remove(pos);
        if pos > 0 {
            pairs[pos - 1] = lookup(id_of(&items[pos - 1]), id_of(&items[pos]));
        }
        if pos < pairs.len() {
            pairs[pos] = lookup(id_of(&items[pos]), id_of(&items[pos + 1]));
        }
    }
}

impl TokenizerModel {
    /// Encodes `text`, recording every merge.
    pub fn encode(&self, text: &[u8]) -> Result<EncodeTrace> {
        let mut trace = EncodeTrace::default();
        for segment in segment_specials(text, self.special_bytes()) {
            match segment {
                Segment::Special(id, bytes) => {
                    let start = trace.final_nodes.len();
                    trace.nodes.push(TraceNode {
                        token: id,
                        parts: None,
                        rank: None,
                    });
                    trace.final_nodes.push(trace.nodes.len() - 1);
                    trace.spans.push(PretokenSpan {
                        tokens: start..start + 1,
                        bytes,
                        special: true,
                    });
                }
                Segment::Text(range) => {
                    let base = range.start;
                    for piece in self.pretokenizer().split(&text[range]) {
                        let bytes = piece.start + base..piece.end + base;
                        let start = trace.final_nodes.len();
                        self.encode_piece_into(&text[bytes.clone()], bytes.start, &mut trace)?;
                        trace.spans.push(PretokenSpan {
                            tokens: start..trace.final_nodes.len(),
                            bytes,
                            special: false,
                        });
                    }
                }
            }
        }
        Ok(trace)
    }

    /// Encodes one pretoken as-is, without special-token matching or
    /// further splitting.
    pub fn encode_pretoken(&self, piece: &[u8]) -> Result<EncodeTrace> {
        let mut trace = EncodeTrace::default();
        self.encode_piece_into(piece, 0, &mut trace)?;
        if !piece.is_empty() {
            trace.spans.push(PretokenSpan {
                tokens: 0..trace.final_nodes.len(),
                bytes: 0..piece.len(),
                special: false,
            });
        }
        Ok(trace)
    }

    /// Final token ids only.
    pub fn encode_ids(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        Ok(self.encode(text)?.final_ids())
    }

    /// Splits a pretoken into its initial base atoms.
    pub(crate) fn atoms(&self, piece: &[u8], offset: usize) -> Result<Vec<TokenId>> {
        let mut atoms = Vec::with_capacity(piece.len());
        let mut i = 0;
        while i < piece.len() {
            if let Some((id, len)) = self.multibyte_base_prefix(&piece[i..]) {
                atoms.push(id);
                i += len;
            } else if let Some(id) = self.byte_base(piece[i]) {
                atoms.push(id);
                i += 1;
            } else {
                return Err(Error::UnknownByte {
                    byte: piece[i],
                    offset: offset + i,
                });
            }
        }
        Ok(atoms)
    }

    fn encode_piece_into(&self, piece: &[u8], offset: usize, trace: &mut EncodeTrace) -> Result<()> {
        let atoms = self.atoms(piece, offset)?;
        let nodes = &mut trace.nodes;
        let mut items: Vec<(TokenId, usize)> = atoms
            .into_iter()
            .map(|token| {
                nodes.push(TraceNode {
                    token,
                    parts: None,
                    rank: None,
                });
                (token, nodes.len() - 1)
            })
            .collect();
        merge_sequence(
            &mut items,
            |item| item.0,
            |l, r| self.pair_merge(l, r),
            |left, right, rank, result| {
                nodes.push(TraceNode {
                    token: result,
                    parts: Some((left.1, right.1)),
                    rank: Some(rank),
                });
                (result, nodes.len() - 1)
            },
        );
        trace.final_nodes.extend(items.into_iter().map(|(_, n)| n));
        Ok(())
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            let bytes = self.token_bytes(id).ok_or(Error::UnknownId(id.0))?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Flavor, ModelParts};
    use crate::pretokenize::PretokenizerConfig;

    pub(crate) fn abab_model() -> TokenizerModel {
        // a b c ab abab abc
        TokenizerModel::from_parts(ModelParts {
            vocab: ["a", "b", "c", "ab", "abab", "abc"]
                .iter()
                .map(|s| s.as_bytes().to_vec())
                .collect(),
            base_ids: [0, 1, 2].into_iter().map(TokenId).collect(),
            merges: vec![
                (TokenId(0), TokenId(1), TokenId(3)),
                (TokenId(3), TokenId(3), TokenId(4)),
                (TokenId(3), TokenId(2), TokenId(5)),
            ],
            pretokenizer: PretokenizerConfig::None,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn replay_ababc() {
        let model = abab_model();
        let trace = model.encode(b"ababc").unwrap();
        assert_eq!(trace.final_ids(), vec![TokenId(4), TokenId(2)]);
        let formations = trace.formations();
        let ab: Vec<_> = formations.iter().filter(|f| f.token == TokenId(3)).collect();
        assert_eq!(ab.len(), 2);
        assert!(ab.iter().all(|f| !f.survived));
        let abab: Vec<_> = formations.iter().filter(|f| f.token == TokenId(4)).collect();
        assert_eq!(abab.len(), 1);
        assert!(abab[0].survived);
        assert_eq!(model.decode(&trace.final_ids()).unwrap(), b"ababc");
    }

    #[test]
    fn empty_text() {
        let model = abab_model();
        let trace = model.encode(b"").unwrap();
        assert!(trace.is_empty());
        assert!(trace.spans.is_empty());
        assert_eq!(model.decode(&[]).unwrap(), b"");
    }

    #[test]
    fn decode_rejects_bad_id() {
        assert!(matches!(abab_model().decode(&[TokenId(99)]), Err(Error::UnknownId(99))));
    }

    #[test]
    fn uncovered_byte_is_reported() {
        let err = abab_model().encode(b"abz").unwrap_err();
        assert!(matches!(err, Error::UnknownByte { byte: b'z', offset: 2 }));
    }

    #[test]
    fn each_formation_reduces_count_by_one() {
        let model = abab_model();
        for text in [&b"ababab"[..], b"abcabc", b"cab", b"aabb"] {
            let trace = model.encode(text).unwrap();
            assert_eq!(trace.atom_count() - trace.formations().len(), trace.len());
            assert_eq!(trace.atom_count(), text.len());
        }
    }

    #[test]
    fn rank_greedy_records_decomposition() {
        // a b c d ab cd bcd abcd; "ab"+"cd" cannot form before "bcd" grabs b
        let vocab = ["a", "b", "c", "d", "bc", "bcd", "ab", "abcd"];
        let model = TokenizerModel::from_parts(ModelParts {
            vocab: vocab.iter().map(|s| s.as_bytes().to_vec()).collect(),
            base_ids: [0, 1, 2, 3].into_iter().map(TokenId).collect(),
            ranks: (0..vocab.len() as u32).collect(),
            flavor: Some(Flavor::RankGreedy),
            pretokenizer: PretokenizerConfig::None,
            ..Default::default()
        })
        .unwrap();
        let trace = model.encode(b"abcd").unwrap();
        assert_eq!(trace.final_ids(), vec![TokenId(7)]);
        let top = trace.formations().into_iter().find(|f| f.token == TokenId(7)).unwrap();
        assert_eq!((top.left, top.right), (TokenId(0), TokenId(5)));
    }
}

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pretokenize::{Pretokenizer, PretokenizerConfig};

/// Dense index into a model's vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a model resolves merges at encode time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Replays an explicit ranked merge list; each token has one recorded parent pair.
    Standard,
    /// tiktoken-style: merges any adjacent pair whose concatenation is the
    /// lowest-ranked token in the vocabulary.
    RankGreedy,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Standard => "standard",
            Flavor::RankGreedy => "rank_greedy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub rank: u32,
    pub left: TokenId,
    pub right: TokenId,
    pub result: TokenId,
}

/// Raw pieces from which a [`TokenizerModel`] is validated and built.
#[derive(Debug, Clone, Default)]
pub struct ModelParts {
    pub vocab: Vec<Vec<u8>>,
    pub base_ids: BTreeSet<TokenId>,
    /// `(left, right, result)` in rank order; standard flavor only.
    pub merges: Vec<(TokenId, TokenId, TokenId)>,
    /// Per-token rank; rank-greedy flavor only.
    pub ranks: Vec<u32>,
    pub flavor: Option<Flavor>,
    pub pretokenizer: PretokenizerConfig,
    pub specials: BTreeSet<TokenId>,
}

/// An immutable BPE model.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    vocab: Vec<Vec<u8>>,
    is_base: Vec<bool>,
    is_special: Vec<bool>,
    merges: Vec<MergeRule>,
    ranks: Vec<u32>,
    flavor: Flavor,
    pretokenizer: Pretokenizer,
    index: HashMap<Vec<u8>, TokenId>,
    byte_base: [Option<TokenId>; 256],
    multibyte_base: HashMap<Vec<u8>, TokenId>,
    max_base_len: usize,
    pair_rules: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    producing_rule: Vec<Option<u32>>,
    special_bytes: Vec<(Vec<u8>, TokenId)>,
    hash: String,
}

impl TokenizerModel {
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let ModelParts {
            vocab,
            base_ids,
            merges,
            ranks,
            flavor,
            pretokenizer,
            specials,
        } = parts;
        let flavor = flavor.unwrap_or(Flavor::Standard);
        let n = vocab.len();
        if n > u32::MAX as usize {
            return Err(Error::Integrity("vocabulary too large".into()));
        }
        let check_id = |id: TokenId| -> Result<()> {
            if id.index() < n {
                Ok(())
            } else {
                Err(Error::Integrity(format!("token id {id} out of range")))
            }
        };

        let mut is_special = vec![false; n];
        for &id in &specials {
            check_id(id)?;
            is_special[id.index()] = true;
        }
        let mut is_base = vec![false; n];
        for &id in &base_ids {
            check_id(id)?;
            if is_special[id.index()] {
                return Err(Error::Integrity(format!("token {id} is both base and special")));
            }
            is_base[id.index()] = true;
        }

        let mut index = HashMap::with_capacity(n);
        let mut special_bytes = Vec::new();
        for (i, bytes) in vocab.iter().enumerate() {
            if bytes.is_empty() {
                return Err(Error::Integrity(format!("token {i} has empty bytes")));
            }
            if is_special[i] {
                special_bytes.push((bytes.clone(), TokenId(i as u32)));
                continue;
            }
            if index.insert(bytes.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate token bytes {:?}",
                    String::from_utf8_lossy(bytes)
                )));
            }
        }

        let mut byte_base = [None; 256];
        let mut multibyte_base = HashMap::new();
        let mut max_base_len = 1;
        for (i, bytes) in vocab.iter().enumerate() {
            if !is_base[i] {
                continue;
            }
            if bytes.len() == 1 {
                byte_base[bytes[0] as usize] = Some(TokenId(i as u32));
            } else if std::str::from_utf8(bytes).is_ok_and(|s| s.chars().count() == 1) {
                // only single characters act as atoms; other unproduced tokens stay inert
                max_base_len = max_base_len.max(bytes.len());
                multibyte_base.insert(bytes.clone(), TokenId(i as u32));
            }
        }

        let mut rules = Vec::new();
        let mut pair_rules = HashMap::new();
        let mut producing_rule = vec![None; n];
        let mut token_ranks = Vec::new();
        match flavor {
            Flavor::Standard => {
                if !ranks.is_empty() {
                    return Err(Error::Integrity("standard flavor takes no rank table".into()));
                }
                for (rank, &(left, right, result)) in merges.iter().enumerate() {
                    check_id(left)?;
                    check_id(right)?;
                    check_id(result)?;
                    let rank = rank as u32;
                    for id in [left, right, result] {
                        if is_special[id.index()] {
                            return Err(Error::Integrity(format!(
                                "merge rank {rank} involves special token {id}"
                            )));
                        }
                    }
                    if is_base[result.index()] {
                        return Err(Error::Integrity(format!(
                            "merge rank {rank} produces base token {result}"
                        )));
                    }
                    let mut joined = vocab[left.index()].clone();
                    joined.extend_from_slice(&vocab[right.index()]);
                    if joined != vocab[result.index()] {
                        return Err(Error::Integrity(format!(
                            "merge rank {rank}: bytes of {left} ++ {right} differ from {result}"
                        )));
                    }
                    if producing_rule[result.index()].is_some() {
                        return Err(Error::Integrity(format!(
                            "token {result} is produced by more than one merge"
                        )));
                    }
                    if pair_rules.insert((left, right), (rank, result)).is_some() {
                        return Err(Error::Integrity(format!(
                            "pair ({left}, {right}) appears in more than one merge"
                        )));
                    }
                    producing_rule[result.index()] = Some(rank);
                    rules.push(MergeRule {
                        rank,
                        left,
                        right,
                        result,
                    });
                }
                for i in 0..n {
                    if !is_base[i] && !is_special[i] && producing_rule[i].is_none() {
                        return Err(Error::Integrity(format!(
                            "non-base token {i} is not produced by any merge"
                        )));
                    }
                }
            }
            Flavor::RankGreedy => {
                if !merges.is_empty() {
                    return Err(Error::Integrity("rank-greedy flavor takes no merge list".into()));
                }
                if ranks.len() != n {
                    return Err(Error::Integrity(format!(
                        "rank table has {} entries for {n} tokens",
                        ranks.len()
                    )));
                }
                let mut seen = HashMap::with_capacity(n);
                for (i, &rank) in ranks.iter().enumerate() {
                    if let Some(prev) = seen.insert(rank, i) {
                        return Err(Error::Integrity(format!(
                            "tokens {prev} and {i} share rank {rank}"
                        )));
                    }
                }
                for (i, bytes) in vocab.iter().enumerate() {
                    if is_special[i] {
                        continue;
                    }
                    if (bytes.len() == 1) != is_base[i] {
                        return Err(Error::Integrity(format!(
                            "rank-greedy base set must be exactly the single-byte tokens (token {i})"
                        )));
                    }
                    if let Some(b) = bytes.iter().find(|b| byte_base[**b as usize].is_none()) {
                        return Err(Error::Integrity(format!(
                            "token {i} uses byte 0x{b:02x} with no single-byte token"
                        )));
                    }
                }
                token_ranks = ranks;
            }
        }

        let pretokenizer = Pretokenizer::new(&pretokenizer)?;
        let mut model = TokenizerModel {
            vocab,
            is_base,
            is_special,
            merges: rules,
            ranks: token_ranks,
            flavor,
            pretokenizer,
            index,
            byte_base,
            multibyte_base,
            max_base_len,
            pair_rules,
            producing_rule,
            special_bytes,
            hash: String::new(),
        };
        let native = crate::format::NativeModel::from_model(&model, None);
        model.hash = native.content_hash()?;
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.vocab.get(id.index()).map(Vec::as_slice)
    }

    /// Bytes of a token known to be valid.
    pub(crate) fn bytes_of(&self, id: TokenId) -> &[u8] {
        &self.vocab[id.index()]
    }

    pub fn token_id(&self, bytes: &[u8]) -> Option<TokenId> {
        self.index
            .get(bytes)
            .copied()
            .or_else(|| self.special_bytes.iter().find(|(b, _)| b == bytes).map(|(_, id)| *id))
    }

    pub fn is_base(&self, id: TokenId) -> bool {
        self.is_base.get(id.index()).copied().unwrap_or(false)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.is_special.get(id.index()).copied().unwrap_or(false)
    }

    pub fn base_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.ids().filter(|id| self.is_base(*id))
    }

    pub fn specials(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.special_bytes.iter().map(|(_, id)| *id)
    }

    pub(crate) fn special_bytes(&self) -> &[(Vec<u8>, TokenId)] {
        &self.special_bytes
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> {
        (0..self.vocab.len() as u32).map(TokenId)
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    /// Rank of a token in a rank-greedy model.
    pub fn rank(&self, id: TokenId) -> Option<u32> {
        self.ranks.get(id.index()).copied()
    }

    pub(crate) fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// The merge that produces `id` (standard flavor).
    pub fn producing_rule(&self, id: TokenId) -> Option<MergeRule> {
        let rank = (*self.producing_rule.get(id.index())?)?;
        Some(self.merges[rank as usize])
    }

    pub fn pretokenizer(&self) -> &Pretokenizer {
        &self.pretokenizer
    }

    /// Hex SHA-256 of the model's canonical native serialization.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    /// True when every byte value maps to a single-byte base token, so any
    /// input can be encoded.
    pub fn covers_all_bytes(&self) -> bool {
        self.byte_base.iter().all(Option::is_some)
    }

    pub(crate) fn byte_base(&self, b: u8) -> Option<TokenId> {
        self.byte_base[b as usize]
    }

    /// Longest multi-byte base token that prefixes `bytes`.
    pub(crate) fn multibyte_base_prefix(&self, bytes: &[u8]) -> Option<(TokenId, usize)> {
        if self.multibyte_base.is_empty() {
            return None;
        }
        (2..=self.max_base_len.min(bytes.len()))
            .rev()
            .find_map(|len| self.multibyte_base.get(&bytes[..len]).map(|id| (*id, len)))
    }

    /// The rank and result of merging the adjacent pair `(left, right)`,
    /// if this model allows it.
    pub fn pair_merge(&self, left: TokenId, right: TokenId) -> Option<(u32, TokenId)> {
        match self.flavor {
            Flavor::Standard => self.pair_rules.get(&(left, right)).copied(),
            Flavor::RankGreedy => {
                let (l, r) = (self.bytes_of(left), self.bytes_of(right));
                let mut joined = Vec::with_capacity(l.len() + r.len());
                joined.extend_from_slice(l);
                joined.extend_from_slice(r);
                let id = *self.index.get(&joined)?;
                Some((self.ranks[id.index()], id))
            }
        }
    }

    pub fn check_id(&self, id: TokenId) -> Result<()> {
        if id.index() < self.vocab.len() {
            Ok(())
        } else {
            Err(Error::UnknownId(id.0))
        }
    }

    /// True when every byte of the token is ASCII.
    pub fn is_ascii(&self, id: TokenId) -> bool {
        self.token_bytes(id).is_some_and(|b| b.is_ascii())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(vocab: &[&str], base: &[u32], merges: &[(u32, u32, u32)]) -> ModelParts {
        ModelParts {
            vocab: vocab.iter().map(|s| s.as_bytes().to_vec()).collect(),
            base_ids: base.iter().map(|&i| TokenId(i)).collect(),
            merges: merges
                .iter()
                .map(|&(l, r, o)| (TokenId(l), TokenId(r), TokenId(o)))
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn rejects_bad_concatenation() {
        let err = TokenizerModel::from_parts(parts(&["a", "b", "ba"], &[0, 1], &[(0, 1, 2)]));
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_orphan_non_base() {
        let err = TokenizerModel::from_parts(parts(&["a", "b", "ab"], &[0, 1], &[]));
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_double_production() {
        let err = TokenizerModel::from_parts(parts(
            &["a", "b", "ab", "c", "abc", "bc"],
            &[0, 1, 3],
            &[(0, 1, 2), (2, 3, 4), (1, 3, 5), (0, 5, 4)],
        ));
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = TokenizerModel::from_parts(parts(&["a", "b", "ab"], &[0, 1], &[(0, 1, 2)])).unwrap();
        let b = TokenizerModel::from_parts(parts(&["a", "b", "ab"], &[0, 1], &[(0, 1, 2)])).unwrap();
        let c = TokenizerModel::from_parts(parts(&["a", "b", "ba"], &[0, 1], &[(1, 0, 2)])).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}

//! A small deterministic BPE trainer for fixtures and experiments.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{Flavor, ModelParts, TokenId, TokenizerModel};
use crate::pretokenize::{Pretokenizer, PretokenizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alphabet {
    /// Only byte values that occur in the corpus.
    #[default]
    Observed,
    /// All 256 byte values, so the model can encode any input.
    AllBytes,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub target_vocab: usize,
    pub pretokenizer: PretokenizerConfig,
    pub alphabet: Alphabet,
}

/// Trains over the observed byte alphabet.
pub fn train_tiny<D: AsRef<[u8]>>(
    docs: &[D],
    target_vocab: usize,
    pretokenizer: &PretokenizerConfig,
) -> Result<TokenizerModel> {
    train(
        docs,
        &TrainOptions {
            target_vocab,
            pretokenizer: pretokenizer.clone(),
            alphabet: Alphabet::Observed,
        },
    )
}

/// Learns merges by maximal pair frequency over pretoken occurrences.
/// Ties go to the lexicographically smaller `(left bytes, right bytes)`.
pub fn train<D: AsRef<[u8]>>(docs: &[D], options: &TrainOptions) -> Result<TokenizerModel> {
    if docs.iter().all(|d| d.as_ref().is_empty()) {
        return Err(Error::InvalidInput("empty training corpus".into()));
    }
    let pretokenizer = Pretokenizer::new(&options.pretokenizer)?;
    let mut word_counts: HashMap<&[u8], u64> = HashMap::new();
    for doc in docs {
        let doc = doc.as_ref();
        for r in pretokenizer.split(doc) {
            *word_counts.entry(&doc[r]).or_insert(0) += 1;
        }
    }

    let alphabet: BTreeSet<u8> = match options.alphabet {
        Alphabet::AllBytes => (0..=255).collect(),
        Alphabet::Observed => word_counts.keys().flat_map(|w| w.iter().copied()).collect(),
    };
    if options.target_vocab < alphabet.len() {
        return Err(Error::InvalidInput(format!(
            "target vocabulary {} is smaller than the alphabet ({})",
            options.target_vocab,
            alphabet.len()
        )));
    }
    let mut vocab: Vec<Vec<u8>> = alphabet.iter().map(|b| vec![*b]).collect();
    let mut byte_id = [TokenId(0); 256];
    for (i, b) in alphabet.iter().enumerate() {
        byte_id[*b as usize] = TokenId(i as u32);
    }

    // sorted for determinism of the word list; counts are order independent anyway
    let mut words: Vec<(Vec<TokenId>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| (w.iter().map(|b| byte_id[*b as usize]).collect(), c))
        .collect();
    words.sort();

    let mut index: HashSet<Vec<u8>> = vocab.iter().cloned().collect();
    let mut forbidden: HashSet<(TokenId, TokenId)> = HashSet::new();
    let mut merges = Vec::new();
    while vocab.len() < options.target_vocab {
        let mut counts: HashMap<(TokenId, TokenId), u64> = HashMap::new();
        for (word, c) in &words {
            for w in word.windows(2) {
                *counts.entry((w[0], w[1])).or_insert(0) += c;
            }
        }
        let best = counts
            .into_iter()
            .filter(|(pair, _)| !forbidden.contains(pair))
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let ka = (&vocab[pa.0.index()], &vocab[pa.1.index()]);
                    let kb = (&vocab[pb.0.index()], &vocab[pb.1.index()]);
                    kb.cmp(&ka)
                })
            });
        let Some(((left, right), _)) = best else { break };
        let mut bytes = vocab[left.index()].clone();
        bytes.extend_from_slice(&vocab[right.index()]);
        if !index.insert(bytes.clone()) {
            // the same bytes were already built from another pair; keep one producer per token
            forbidden.insert((left, right));
            continue;
        }
        let new = TokenId(vocab.len() as u32);
        vocab.push(bytes);
        merges.push((left, right, new));
        for (word, _) in &mut words {
            apply_merge(word, left, right, new);
        }
    }

    let base_ids = (0..alphabet.len() as u32).map(TokenId).collect();
    TokenizerModel::from_parts(ModelParts {
        vocab,
        base_ids,
        merges,
        ranks: Vec::new(),
        flavor: Some(Flavor::Standard),
        pretokenizer: options.pretokenizer.clone(),
        specials: BTreeSet::new(),
    })
}

fn apply_merge(word: &mut Vec<TokenId>, left: TokenId, right: TokenId, new: TokenId) {
    if word.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == left && word[i + 1] == right {
            out.push(new);
            i += 2;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    *word = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_merge_bytes(model: &TokenizerModel) -> (Vec<u8>, Vec<u8>) {
        let m = model.merges()[0];
        (
            model.token_bytes(m.left).unwrap().to_vec(),
            model.token_bytes(m.right).unwrap().to_vec(),
        )
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // pretokens "aaab" and " aaab": a+a occurs 2x2 = 4 times
        let docs = [b"aaab aaab"];
        let model = train_tiny(&docs, 6, &PretokenizerConfig::WhitespacePrefix).unwrap();
        assert_eq!(model.base_ids().count(), 3);
        assert_eq!(model.merges().len(), 3);
        assert_eq!(first_merge_bytes(&model), (b"a".to_vec(), b"a".to_vec()));
    }

    #[test]
    fn alphabet_sized_target_means_no_merges() {
        let docs = [b"aaab aaab"];
        let model = train_tiny(&docs, 3, &PretokenizerConfig::WhitespacePrefix).unwrap();
        assert!(model.merges().is_empty());
        assert!(train_tiny(&docs, 2, &PretokenizerConfig::WhitespacePrefix).is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        // "xy" and "ab" both occur twice; "ab" sorts first
        let docs = [b"xyab xyab"];
        let model = train_tiny(&docs, 6, &PretokenizerConfig::None).unwrap();
        assert_eq!(first_merge_bytes(&model), (b"a".to_vec(), b"b".to_vec()));
        let again = train_tiny(&docs, 6, &PretokenizerConfig::None).unwrap();
        assert_eq!(model.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let docs: [&[u8]; 1] = [b""];
        assert!(train_tiny(&docs, 10, &PretokenizerConfig::WhitespacePrefix).is_err());
        let none: [&[u8]; 0] = [];
        assert!(train_tiny(&none, 10, &PretokenizerConfig::WhitespacePrefix).is_err());
    }

    #[test]
    fn all_bytes_alphabet_covers_everything() {
        let docs = [b"hello world"];
        let model = train(
            &docs,
            &TrainOptions {
                target_vocab: 260,
                pretokenizer: PretokenizerConfig::WhitespacePrefix,
                alphabet: Alphabet::AllBytes,
            },
        )
        .unwrap();
        assert!(model.covers_all_bytes());
        assert_eq!(model.vocab_size(), 260);
    }
}

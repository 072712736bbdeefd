#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::OnceLock;

use litetoken_core::{
    train, train_tiny, Alphabet, ModelParts, PretokenizerConfig, TokenId, TokenizerModel, TrainOptions,
};

pub const FIXTURE: &str = include_str!("../fixtures/corpus.txt");

pub fn fixture_docs() -> Vec<&'static str> {
    FIXTURE.lines().collect()
}

/// The 200-token tokenizer trained on the fixture corpus.
pub fn fixture_model() -> &'static TokenizerModel {
    static MODEL: OnceLock<TokenizerModel> = OnceLock::new();
    MODEL.get_or_init(|| train_tiny(&fixture_docs(), 200, &PretokenizerConfig::default()).unwrap())
}

/// A fixture tokenizer over all 256 bytes, able to encode arbitrary input.
pub fn fixture_model_all_bytes() -> &'static TokenizerModel {
    static MODEL: OnceLock<TokenizerModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let options = TrainOptions {
            target_vocab: 400,
            pretokenizer: PretokenizerConfig::default(),
            alphabet: Alphabet::AllBytes,
        };
        train(&fixture_docs(), &options).unwrap()
    })
}

/// Straight-line BPE: scan every adjacent pair, merge the leftmost pair of
/// lowest rank, repeat. Returns final tokens and every merge operand.
pub fn naive_encode_piece(model: &TokenizerModel, piece: &[u8]) -> (Vec<TokenId>, Vec<TokenId>) {
    let rules: HashMap<(TokenId, TokenId), (u32, TokenId)> = model
        .merges()
        .iter()
        .map(|m| ((m.left, m.right), (m.rank, m.result)))
        .collect();
    let mut seq: Vec<TokenId> = piece.iter().map(|b| model.token_id(&[*b]).unwrap()).collect();
    let mut consumed = Vec::new();
    loop {
        let mut best: Option<(u32, usize, TokenId)> = None;
        for i in 0..seq.len().saturating_sub(1) {
            if let Some(&(rank, result)) = rules.get(&(seq[i], seq[i + 1])) {
                if best.is_none_or(|(r, _, _)| rank < r) {
                    best = Some((rank, i, result));
                }
            }
        }
        let Some((_, i, result)) = best else { break };
        consumed.push(seq[i]);
        consumed.push(seq[i + 1]);
        seq.splice(i..i + 2, [result]);
    }
    (seq, consumed)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct NaiveCounts {
    pub f1: HashMap<TokenId, u64>,
    pub f2: HashMap<TokenId, u64>,
    /// `(left, right)` adjacent pairs of final tokens within a document.
    pub pairs: HashMap<(TokenId, TokenId), u64>,
    pub tokens: u64,
}

pub fn naive_counts(model: &TokenizerModel, docs: &[&str]) -> NaiveCounts {
    let mut out = NaiveCounts::default();
    for doc in docs {
        let doc = doc.as_bytes();
        let mut finals = Vec::new();
        for r in model.pretokenizer().split(doc) {
            let (f, consumed) = naive_encode_piece(model, &doc[r]);
            finals.extend(f);
            for t in consumed {
                *out.f2.entry(t).or_default() += 1;
            }
        }
        for t in &finals {
            *out.f1.entry(*t).or_default() += 1;
        }
        for w in finals.windows(2) {
            *out.pairs.entry((w[0], w[1])).or_default() += 1;
        }
        out.tokens += finals.len() as u64;
    }
    out
}

/// Vocabulary around " corruptions", which encodes as `[" cor", "ruptions"]`
/// while " disruptions" absorbs "ruptions" into a longer token.
pub fn corruption_model() -> TokenizerModel {
    let base = [" ", "c", "o", "r", "u", "p", "t", "i", "n", "s", "d"];
    let merges = [
        (" ", "c"),
        (" c", "o"),
        (" co", "r"),
        ("r", "u"),
        ("o", "n"),
        ("t", "i"),
        ("ti", "on"),
        ("p", "tion"),
        ("ru", "ption"),
        ("ruption", "s"),
        (" cor", "ru"),
        (" corru", "ption"),
        (" ", "d"),
        (" d", "i"),
        (" di", "s"),
        (" dis", "ruptions"),
    ];
    let mut vocab: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    let mut triples = Vec::new();
    for (l, r) in merges {
        let id = |s: &str, v: &[String]| TokenId(v.iter().position(|w| w == s).unwrap() as u32);
        let (li, ri) = (id(l, &vocab), id(r, &vocab));
        vocab.push(format!("{l}{r}"));
        triples.push((li, ri, TokenId(vocab.len() as u32 - 1)));
    }
    TokenizerModel::from_parts(ModelParts {
        vocab: vocab.into_iter().map(String::into_bytes).collect(),
        base_ids: (0..base.len() as u32).map(TokenId).collect(),
        merges: triples,
        pretokenizer: PretokenizerConfig::WhitespacePrefix,
        ..Default::default()
    })
    .unwrap()
}

pub fn ids(model: &TokenizerModel, words: &[&str]) -> Vec<TokenId> {
    words.iter().map(|w| model.token_id(w.as_bytes()).unwrap()).collect()
}

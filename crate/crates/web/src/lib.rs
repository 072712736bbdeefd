//! Browser playground: train a small tokenizer on pasted text, flag residue
//! tokens with adjustable thresholds and compare encodings.
//!
//! [`Session`] holds the logic and is usable natively; [`Playground`] is the
//! JavaScript-facing wrapper.

use std::collections::BTreeSet;

use litetoken_core::display::{display_bytes, display_token};
use litetoken_core::{
    accumulate, classify, train_tiny, AccumulateOptions, Category, ClassifyOptions, CorpusStats, EncodeMode,
    LiteTokenizer, PretokenizerConfig, Thresholds, TokenId, TokenizerModel,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub struct Session {
    model: TokenizerModel,
    stats: CorpusStats,
    lite: LiteTokenizer,
}

#[derive(Debug, Serialize)]
pub struct Flagged {
    pub id: u32,
    pub text: String,
    pub f1: u64,
    pub f2: u64,
    pub ratio: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Identification {
    pub vocab_size: usize,
    pub ascii_vocab: usize,
    pub low_ratio: usize,
    pub residue: usize,
    pub residue_pct: f64,
    pub tokens: Vec<Flagged>,
}

#[derive(Debug, Serialize)]
pub struct Encoded {
    pub mode: EncodeMode,
    pub ids: Vec<u32>,
    pub tokens: Vec<String>,
    /// Whether each token was affected by the removal set.
    pub changed: Vec<bool>,
}

impl Session {
    /// Trains on the non-empty lines of `corpus`.
    pub fn train(corpus: &str, vocab_size: usize) -> Result<Self, String> {
        let docs: Vec<&str> = corpus.lines().filter(|l| !l.is_empty()).collect();
        let model = train_tiny(&docs, vocab_size, &PretokenizerConfig::WhitespacePrefix).map_err(|e| e.to_string())?;
        let stats = accumulate(&model, &docs, AccumulateOptions::for_model(&model)).map_err(|e| e.to_string())?;
        let lite = LiteTokenizer::new(model.clone(), BTreeSet::new()).map_err(|e| e.to_string())?;
        Ok(Session { model, stats, lite })
    }

    pub fn vocab_size(&self) -> usize {
        self.model.vocab_size()
    }

    /// Classifies the vocabulary and makes the flagged set the active removal set.
    pub fn identify(&mut self, ratio: f64, entropy: f64) -> Result<Identification, String> {
        let report = classify(&self.stats, &self.model, ClassifyOptions::new(Thresholds { ratio, entropy }))
            .map_err(|e| e.to_string())?;
        self.lite = LiteTokenizer::new(self.model.clone(), report.imr.clone()).map_err(|e| e.to_string())?;
        let mut tokens: Vec<Flagged> = report
            .records
            .iter()
            .filter(|r| r.category == Category::Residue)
            .map(|r| Flagged {
                id: r.token.0,
                text: r.text.clone(),
                f1: r.f1,
                f2: r.f2,
                ratio: r.ratio,
                score: r.score,
            })
            .collect();
        tokens.sort_by(|a, b| b.f2.cmp(&a.f2).then(a.id.cmp(&b.id)));
        Ok(Identification {
            vocab_size: report.summary.vocab_size,
            ascii_vocab: report.summary.ascii_vocab,
            low_ratio: report.summary.low_ratio,
            residue: report.summary.residue,
            residue_pct: report.summary.residue_pct,
            tokens,
        })
    }

    pub fn encode(&self, text: &str, mode: EncodeMode) -> Result<Encoded, String> {
        let encoding = self.lite.encode(text.as_bytes(), mode).map_err(|e| e.to_string())?;
        let original: BTreeSet<TokenId> = self
            .lite
            .encode(text.as_bytes(), EncodeMode::Original)
            .map_err(|e| e.to_string())?
            .ids
            .into_iter()
            .collect();
        Ok(Encoded {
            mode,
            ids: encoding.ids.iter().map(|t| t.0).collect(),
            tokens: encoding.ids.iter().map(|t| display_token(&self.model, *t)).collect(),
            changed: encoding.ids.iter().map(|t| !original.contains(t)).collect(),
        })
    }

    pub fn removed_texts(&self) -> Vec<String> {
        self.lite
            .removed_ids()
            .into_iter()
            .filter_map(|t| self.model.token_bytes(t).map(display_bytes))
            .collect()
    }
}

fn parse_mode(mode: &str) -> Result<EncodeMode, String> {
    serde_json::from_value(serde_json::Value::String(mode.to_string())).map_err(|_| format!("unknown mode {mode:?}"))
}

#[wasm_bindgen]
pub struct Playground {
    session: Session,
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(corpus: &str, vocab_size: usize) -> Result<Playground, JsError> {
        Ok(Playground {
            session: Session::train(corpus, vocab_size).map_err(|e| JsError::new(&e))?,
        })
    }

    #[wasm_bindgen(js_name = vocabSize)]
    pub fn vocab_size(&self) -> usize {
        self.session.vocab_size()
    }

    /// Returns the classification summary and flagged tokens as JSON.
    pub fn identify(&mut self, ratio: f64, entropy: f64) -> Result<String, JsError> {
        let result = self.session.identify(ratio, entropy).map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&result).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Encodes `text` in `original`, `split-only`, `split-remerge` or `incremental` mode; returns JSON.
    pub fn encode(&self, text: &str, mode: &str) -> Result<String, JsError> {
        let mode = parse_mode(mode).map_err(|e| JsError::new(&e))?;
        let result = self.session.encode(text, mode).map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&result).map_err(|e| JsError::new(&e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "the disruptions and the corruptions\nno disruptions today\nmore disruptions\n";

    #[test]
    fn modes_parse() {
        assert_eq!(parse_mode("split-remerge").unwrap(), EncodeMode::SplitRemerge);
        assert!(parse_mode("fast").is_err());
    }

    #[test]
    fn identify_then_encode() {
        let mut session = Session::train(&TEXT.repeat(5), 60).unwrap();
        let loose = session.identify(1.0, 100.0).unwrap();
        assert_eq!(loose.residue, loose.tokens.len());
        assert_eq!(session.removed_texts().len(), loose.residue);
        for mode in [EncodeMode::Original, EncodeMode::SplitOnly, EncodeMode::SplitRemerge] {
            let out = session.encode(" the disruptions", mode).unwrap();
            assert_eq!(out.tokens.join("").replace('␣', " "), " the disruptions");
            if mode == EncodeMode::Original {
                assert!(out.changed.iter().all(|c| !c));
            }
        }
        let none = session.identify(0.0, 0.0).unwrap();
        assert!(none.residue <= loose.residue);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(Session::train("", 10).is_err());
        let session = Session::train("abc abc", 8).unwrap();
        assert!(session.encode("xyz", EncodeMode::Original).is_err());
    }
}

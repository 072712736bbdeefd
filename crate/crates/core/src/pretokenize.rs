//! Pretokenization: partitioning raw bytes into the units merges may not
//! cross.
//!
//! Every mode is a partition: concatenating the produced ranges in order
//! reproduces the input exactly. Special tokens are matched first and
//! never reach the pretokenizer.

use std::ops::Range;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TokenId;

/// The pattern used by GPT-2 style byte-level tokenizers.
pub const GPT2_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PretokenizerConfig {
    /// Maximal runs of non-whitespace, each optionally carrying the single
    /// space that precedes it. Other whitespace forms its own pretokens.
    #[default]
    WhitespacePrefix,
    /// Regex split over valid UTF-8 stretches; invalid bytes become
    /// single-byte pretokens.
    ByteLevelRegex {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<String>,
    },
    /// The whole text is one pretoken.
    None,
}

impl PretokenizerConfig {
    pub fn gpt2() -> Self {
        PretokenizerConfig::ByteLevelRegex { pattern: None }
    }
}

/// Compiled form of a [`PretokenizerConfig`].
#[derive(Debug, Clone)]
pub struct Pretokenizer {
    config: PretokenizerConfig,
    regex: Option<Regex>,
}

impl Pretokenizer {
    pub fn new(config: &PretokenizerConfig) -> Result<Self> {
        let regex = match config {
            PretokenizerConfig::ByteLevelRegex { pattern } => {
                let pattern = pattern.as_deref().unwrap_or(GPT2_PATTERN);
                let regex = Regex::new(pattern)
                    .map_err(|e| Error::InvalidInput(format!("bad pretokenizer pattern: {e}")))?;
                Some(regex)
            }
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            regex,
        })
    }

    pub fn config(&self) -> &PretokenizerConfig {
        &self.config
    }

    /// Splits `text` into pretoken byte ranges.
    pub fn split(&self, text: &[u8]) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        self.split_into(text, 0, &mut out);
        out
    }

    fn split_into(&self, text: &[u8], base: usize, out: &mut Vec<Range<usize>>) {
        if text.is_empty() {
            return;
        }
        match &self.config {
            PretokenizerConfig::None => out.push(base..base + text.len()),
            PretokenizerConfig::WhitespacePrefix => split_whitespace_prefix(text, base, out),
            PretokenizerConfig::ByteLevelRegex { .. } => {
                let regex = self.regex.as_ref().expect("compiled in new");
                split_regex(regex, text, base, out)
            }
        }
    }
}

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

fn split_whitespace_prefix(text: &[u8], base: usize, out: &mut Vec<Range<usize>>) {
    let n = text.len();
    let mut i = 0;
    while i < n {
        let start = i;
        if is_ws(text[i]) {
            let mut j = i;
            while j < n && is_ws(text[j]) {
                j += 1;
            }
            if j < n && text[j - 1] == b' ' {
                // the final space belongs to the following word
                if j - 1 > start {
                    out.push(base + start..base + j - 1);
                }
                i = j - 1;
            } else {
                out.push(base + start..base + j);
                i = j;
                continue;
            }
        }
        let word_start = i;
        if text[i] == b' ' {
            i += 1;
        }
        while i < n && !is_ws(text[i]) {
            i += 1;
        }
        out.push(base + word_start..base + i);
    }
}

fn split_regex(regex: &Regex, text: &[u8], base: usize, out: &mut Vec<Range<usize>>) {
    let mut offset = 0;
    for chunk in text.utf8_chunks() {
        let valid = chunk.valid();
        let chunk_base = base + offset;
        let mut last = 0;
        for m in regex.find_iter(valid) {
            // a failing match (backtrack limit) degrades to one pretoken for the rest
            let Ok(m) = m else { break };
            if m.start() > last {
                out.push(chunk_base + last..chunk_base + m.start());
            }
            if m.end() > m.start() {
                out.push(chunk_base + m.start()..chunk_base + m.end());
            }
            last = m.end();
        }
        if last < valid.len() {
            out.push(chunk_base + last..chunk_base + valid.len());
        }
        offset += valid.len();
        for k in 0..chunk.invalid().len() {
            out.push(base + offset + k..base + offset + k + 1);
        }
        offset += chunk.invalid().len();
    }
}

/// A stretch of input that is either a special token or ordinary text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Special(TokenId, Range<usize>),
    Text(Range<usize>),
}

/// Cuts `text` around occurrences of special tokens (leftmost, then longest).
pub fn segment_specials(text: &[u8], specials: &[(Vec<u8>, TokenId)]) -> Vec<Segment> {
    if specials.is_empty() {
        return if text.is_empty() {
            Vec::new()
        } else {
            vec![Segment::Text(0..text.len())]
        };
    }
    let mut out = Vec::new();
    let mut text_start = 0;
    let mut i = 0;
    while i < text.len() {
        let hit = specials
            .iter()
            .filter(|(bytes, _)| !bytes.is_empty() && text[i..].starts_with(bytes))
            .max_by_key(|(bytes, _)| bytes.len());
        match hit {
            Some((bytes, id)) => {
                if i > text_start {
                    out.push(Segment::Text(text_start..i));
                }
                out.push(Segment::Special(*id, i..i + bytes.len()));
                i += bytes.len();
                text_start = i;
            }
            None => i += 1,
        }
    }
    if text.len() > text_start {
        out.push(Segment::Text(text_start..text.len()));
    }
    out
}

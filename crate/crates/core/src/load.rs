//! Readers for Hugging Face style (`vocab.json` + `merges.txt`) and
//! tiktoken style (`base64 rank` lines) tokenizer assets.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use base64::Engine;

use crate::error::{Error, Result};
use crate::model::{Flavor, ModelParts, TokenId, TokenizerModel};
use crate::pretokenize::PretokenizerConfig;

/// GPT-2's reversible byte to printable-character table.
fn byte_to_char() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..256u32 {
            let direct = matches!(b, 0x21..=0x7e | 0xa1..=0xac | 0xae..=0xff);
            let cp = if direct {
                b
            } else {
                extra += 1;
                255 + extra
            };
            table[b as usize] = char::from_u32(cp).expect("valid code point");
        }
        table
    })
}

fn char_to_byte() -> &'static HashMap<char, u8> {
    static MAP: OnceLock<HashMap<char, u8>> = OnceLock::new();
    MAP.get_or_init(|| {
        byte_to_char()
            .iter()
            .enumerate()
            .map(|(b, c)| (*c, b as u8))
            .collect()
    })
}

/// Decodes a byte-level token string, or `None` if it uses characters
/// outside the byte alphabet.
pub fn decode_byte_level(token: &str) -> Option<Vec<u8>> {
    let map = char_to_byte();
    token.chars().map(|c| map.get(&c).copied()).collect()
}

pub fn encode_byte_level(bytes: &[u8]) -> String {
    let table = byte_to_char();
    bytes.iter().map(|b| table[*b as usize]).collect()
}

#[derive(Debug, Clone, Default)]
pub struct HfOptions {
    /// Force (or forbid) the byte-level character mapping. Detected when unset.
    pub byte_level: Option<bool>,
    /// Defaults to the GPT-2 regex for byte-level vocabularies and
    /// whitespace-prefix splitting otherwise.
    pub pretokenizer: Option<PretokenizerConfig>,
    /// Vocabulary entries to treat as special tokens.
    pub specials: Vec<String>,
}

fn json_parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        message: e.to_string(),
    }
}

pub fn load_hf(vocab_file: &[u8], merges_file: &[u8]) -> Result<TokenizerModel> {
    load_hf_with(vocab_file, merges_file, &HfOptions::default())
}

pub fn load_hf_with(vocab_file: &[u8], merges_file: &[u8], options: &HfOptions) -> Result<TokenizerModel> {
    let raw: HashMap<String, u32> = serde_json::from_slice(vocab_file).map_err(json_parse_error)?;
    let n = raw.len();
    let mut by_id: Vec<Option<&str>> = vec![None; n];
    for (token, &id) in &raw {
        let slot = by_id
            .get_mut(id as usize)
            .ok_or_else(|| Error::Integrity(format!("vocab ids are not dense: {id} >= {n}")))?;
        if slot.replace(token).is_some() {
            return Err(Error::Integrity(format!("vocab id {id} assigned twice")));
        }
    }
    let names: Vec<&str> = by_id.into_iter().map(|t| t.expect("dense ids")).collect();
    let special_names: BTreeSet<&str> = options.specials.iter().map(String::as_str).collect();

    let byte_level = options.byte_level.unwrap_or_else(|| {
        names
            .iter()
            .filter(|t| !special_names.contains(*t))
            .all(|t| decode_byte_level(t).is_some())
    });
    let vocab: Vec<Vec<u8>> = names
        .iter()
        .map(|t| {
            if byte_level && !special_names.contains(t) {
                decode_byte_level(t)
                    .ok_or_else(|| Error::Integrity(format!("token {t:?} is not byte-level")))
            } else {
                Ok(t.as_bytes().to_vec())
            }
        })
        .collect::<Result<_>>()?;

    let text = std::str::from_utf8(merges_file).map_err(|e| Error::Parse {
        line: 1 + merges_file[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        message: "merges file is not UTF-8".into(),
    })?;
    let mut merges = Vec::new();
    let mut produced = vec![false; n];
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (merges.is_empty() && line.starts_with("#")) {
            continue;
        }
        let mut parts = line.split(' ');
        let (Some(left), Some(right), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected \"left right\", got {line:?}"),
            });
        };
        if left.is_empty() || right.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("empty merge operand in {line:?}"),
            });
        }
        let lookup = |s: &str| {
            raw.get(s).copied().map(TokenId).ok_or_else(|| {
                Error::Integrity(format!("merge on line {line_no} references unknown token {s:?}"))
            })
        };
        let l = lookup(left)?;
        let r = lookup(right)?;
        let result = lookup(&format!("{left}{right}"))?;
        produced[result.index()] = true;
        merges.push((l, r, result));
    }

    let specials: BTreeSet<TokenId> = special_names
        .iter()
        .map(|s| {
            raw.get(*s)
                .map(|id| TokenId(*id))
                .ok_or_else(|| Error::Integrity(format!("special token {s:?} not in vocab")))
        })
        .collect::<Result<_>>()?;
    let base_ids = (0..n as u32)
        .map(TokenId)
        .filter(|id| !produced[id.index()] && !specials.contains(id))
        .collect();
    let pretokenizer = options.pretokenizer.clone().unwrap_or(if byte_level {
        PretokenizerConfig::gpt2()
    } else {
        PretokenizerConfig::WhitespacePrefix
    });
    TokenizerModel::from_parts(ModelParts {
        vocab,
        base_ids,
        merges,
        ranks: Vec::new(),
        flavor: Some(Flavor::Standard),
        pretokenizer,
        specials,
    })
}

pub fn load_tiktoken(rank_file: &[u8]) -> Result<TokenizerModel> {
    load_tiktoken_with(rank_file, PretokenizerConfig::gpt2())
}

pub fn load_tiktoken_with(rank_file: &[u8], pretokenizer: PretokenizerConfig) -> Result<TokenizerModel> {
    let engine = base64::engine::general_purpose::STANDARD;
    let mut entries: Vec<(u32, Vec<u8>)> = Vec::new();
    for (i, line) in rank_file.split(|b| *b == b'\n').enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = std::str::from_utf8(line).map_err(|_| parse_err("line is not UTF-8".into()))?;
        let mut fields = line.split_whitespace();
        let (Some(token), Some(rank), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected \"base64 rank\", got {line:?}")));
        };
        let bytes = engine
            .decode(token)
            .map_err(|e| parse_err(format!("bad base64 {token:?}: {e}")))?;
        let rank: u32 = rank
            .parse()
            .map_err(|e| parse_err(format!("bad rank {rank:?}: {e}")))?;
        entries.push((rank, bytes));
    }
    entries.sort_by_key(|(rank, _)| *rank);
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Integrity(format!("two tokens share rank {}", w[0].0)));
    }
    let ranks: Vec<u32> = entries.iter().map(|(r, _)| *r).collect();
    let vocab: Vec<Vec<u8>> = entries.into_iter().map(|(_, b)| b).collect();
    let base_ids = vocab
        .iter()
        .enumerate()
        .filter(|(_, b)| b.len() == 1)
        .map(|(i, _)| TokenId(i as u32))
        .collect();
    TokenizerModel::from_parts(ModelParts {
        vocab,
        base_ids,
        merges: Vec::new(),
        ranks,
        flavor: Some(Flavor::RankGreedy),
        pretokenizer,
        specials: BTreeSet::new(),
    })
}

//! Paths, provenance and tokenizer loading shared by the subcommands.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use litetoken_core::{
    load_hf_with, load_tiktoken_with, HfOptions, LiteTokenizer, NativeModel, PretokenizerConfig, TokenId,
    TokenizerModel,
};
use serde::Serialize;
use serde_json::Value;

use crate::UsageError;

/// Echoed into every artifact so it can be traced back to its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: Value,
}

impl RunConfig {
    pub fn new(command: &'static str, args: &impl Serialize) -> Result<Self> {
        Ok(RunConfig {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: serde_json::to_value(args)?,
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Absolute path of an existing input.
pub fn input(path: &mut PathBuf) -> Result<()> {
    *path = fs::canonicalize(&*path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(())
}

/// Absolute path of an output; the file itself need not exist yet.
pub fn output(path: &mut PathBuf) -> Result<()> {
    if !path.is_absolute() {
        *path = std::env::current_dir()?.join(&*path);
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_compact_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("malformed {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum PretokenizerArg {
    /// Words carry their preceding space
    WhitespacePrefix,
    /// GPT-2 regex over UTF-8
    Gpt2,
    /// No splitting
    None,
}

impl From<PretokenizerArg> for PretokenizerConfig {
    fn from(p: PretokenizerArg) -> Self {
        match p {
            PretokenizerArg::WhitespacePrefix => PretokenizerConfig::WhitespacePrefix,
            PretokenizerArg::Gpt2 => PretokenizerConfig::gpt2(),
            PretokenizerArg::None => PretokenizerConfig::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TokenizerArgs {
    /// Native model JSON, a directory holding vocab.json and merges.txt, or a tiktoken rank file
    #[arg(short, long)]
    pub tokenizer: PathBuf,

    /// Vocabulary entry to treat as a special token (vocab.json imports)
    #[arg(long = "special", value_name = "TOKEN")]
    pub specials: Vec<String>,

    /// Byte-to-unicode mapping of vocab.json imports; detected when omitted
    #[arg(long, value_enum)]
    pub byte_level: Option<Switch>,

    /// Pretokenizer for imported models
    #[arg(long, value_enum)]
    pub pretokenizer: Option<PretokenizerArg>,
}

pub struct Loaded {
    pub model: TokenizerModel,
    /// Removal set embedded in a pruned model file.
    pub imr: Option<BTreeSet<TokenId>>,
}

impl TokenizerArgs {
    pub fn resolve(&mut self) -> Result<()> {
        input(&mut self.tokenizer)
    }

    pub fn load(&self) -> Result<Loaded> {
        let path = &self.tokenizer;
        let ctx = || format!("loading tokenizer {}", path.display());
        if path.is_dir() {
            let vocab = read(&path.join("vocab.json"))?;
            let merges = read(&path.join("merges.txt"))?;
            let options = HfOptions {
                byte_level: self.byte_level.map(|s| s == Switch::On),
                pretokenizer: self.pretokenizer.map(Into::into),
                specials: self.specials.clone(),
            };
            let model = load_hf_with(&vocab, &merges, &options).with_context(ctx)?;
            return Ok(Loaded { model, imr: None });
        }
        let bytes = read(path)?;
        let imported_only = |flag: &str| UsageError(format!("{flag} only applies to vocab.json imports"));
        if self.byte_level.is_some() {
            return Err(imported_only("--byte-level").into());
        }
        if bytes.trim_ascii_start().starts_with(b"{") {
            if !self.specials.is_empty() {
                return Err(imported_only("--special").into());
            }
            let mut native: NativeModel = serde_json::from_slice(&bytes).with_context(ctx)?;
            if let Some(p) = self.pretokenizer {
                native.pretokenizer = p.into();
            }
            let (model, imr) = native.into_model().with_context(ctx)?;
            return Ok(Loaded { model, imr });
        }
        if !self.specials.is_empty() {
            return Err(imported_only("--special").into());
        }
        let pretokenizer = self.pretokenizer.map_or_else(PretokenizerConfig::gpt2, Into::into);
        let model = load_tiktoken_with(&bytes, pretokenizer).with_context(ctx)?;
        Ok(Loaded { model, imr: None })
    }
}

/// Native JSON for a model, with the removal set and run config embedded.
pub fn model_document(model: &TokenizerModel, imr: Option<&BTreeSet<TokenId>>, config: &RunConfig) -> NativeModel {
    let mut native = NativeModel::from_model(model, imr);
    native.config = Some(config.to_value());
    native
}

pub fn lite_from(loaded: Loaded) -> Result<LiteTokenizer> {
    Ok(LiteTokenizer::new(loaded.model, loaded.imr.unwrap_or_default())?)
}

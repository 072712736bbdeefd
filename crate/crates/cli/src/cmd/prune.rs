use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use litetoken_core::display::display_sequence;
use litetoken_core::{EncodeMode, ImrFile, LiteTokenizer, TokenId};
use serde::Serialize;

use crate::artifact::{self, Loaded, RunConfig, TokenizerArgs};
use crate::UsageError;

pub const MASK_FORMAT: &str = "litetoken-mask";

#[derive(Debug, Args, Serialize)]
pub struct PruneArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    /// Removal set written by identify --imr
    #[arg(long)]
    pub imr: PathBuf,

    /// Pruned tokenizer (native JSON with the removal set embedded)
    #[arg(short, long)]
    pub output: PathBuf,

    /// Removed ids as JSON, for masking model outputs
    #[arg(long)]
    pub mask: Option<PathBuf>,

    /// Removed ids as a raw bitmask: bit i%8 of byte i/8, least significant first
    #[arg(long)]
    pub bitmask: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct MaskFile<'a> {
    format: &'static str,
    model_hash: &'a str,
    vocab_size: usize,
    removed: usize,
    ids: &'a [TokenId],
    config: serde_json::Value,
}

/// Applies an identify removal file to a loaded tokenizer.
fn with_imr(loaded: Loaded, imr: Option<&PathBuf>) -> Result<LiteTokenizer> {
    let Some(path) = imr else {
        return artifact::lite_from(loaded);
    };
    if loaded.imr.is_some() {
        return Err(UsageError("the tokenizer already carries a removal set; drop --imr".into()).into());
    }
    let file: ImrFile = artifact::read_json(path)?;
    let imr = file
        .check(&loaded.model)
        .with_context(|| format!("{} does not belong to this tokenizer", path.display()))?;
    Ok(LiteTokenizer::new(loaded.model, imr)?)
}

pub fn prune(mut args: PruneArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    artifact::input(&mut args.imr)?;
    artifact::output(&mut args.output)?;
    for out in [&mut args.mask, &mut args.bitmask].into_iter().flatten() {
        artifact::output(out)?;
    }
    let config = RunConfig::new("prune", &args)?;
    let lite = with_imr(args.tokenizer.load()?, Some(&args.imr))?;
    let model = lite.base();
    artifact::write_json(&args.output, &artifact::model_document(model, Some(lite.imr()), &config))?;

    let mask = lite.export_mask();
    if let Some(path) = &args.mask {
        let file = MaskFile {
            format: MASK_FORMAT,
            model_hash: model.content_hash(),
            vocab_size: model.vocab_size(),
            removed: mask.ids.len(),
            ids: &mask.ids,
            config: config.to_value(),
        };
        artifact::write_json(path, &file)?;
    }
    if let Some(path) = &args.bitmask {
        std::fs::write(path, &mask.bitmask).with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "removed {} of {} tokens; effective vocabulary {}",
        lite.imr().len(),
        model.vocab_size(),
        lite.effective_vocab_size()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Original,
    SplitOnly,
    SplitRemerge,
    Incremental,
}

impl From<ModeArg> for EncodeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Original => EncodeMode::Original,
            ModeArg::SplitOnly => EncodeMode::SplitOnly,
            ModeArg::SplitRemerge => EncodeMode::SplitRemerge,
            ModeArg::Incremental => EncodeMode::Incremental,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    /// Removal set to apply when the tokenizer file has none embedded
    #[arg(long)]
    pub imr: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = ModeArg::SplitRemerge)]
    pub mode: ModeArg,

    /// Text to encode, one sequence per line; standard input when omitted
    #[arg(short, long)]
    pub input: Option<PathBuf>,

    /// Print token strings separated by "|" instead of ids
    #[arg(long)]
    pub show_tokens: bool,

    /// Print the original and chosen-mode token counts of every line, then averages
    #[arg(long, conflicts_with = "show_tokens")]
    pub compare: bool,
}

fn encode_line(lite: &LiteTokenizer, line: &[u8], mode: EncodeMode) -> Result<Vec<TokenId>> {
    if mode != EncodeMode::Incremental {
        return Ok(lite.encode(line, mode)?.ids);
    }
    let mut stream = lite.incremental();
    let mut ids = stream.push(line)?;
    ids.extend(stream.finish()?);
    Ok(ids)
}

pub fn encode(mut args: EncodeArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    if let Some(p) = &mut args.imr {
        artifact::input(p)?;
    }
    if let Some(p) = &mut args.input {
        artifact::input(p)?;
    }
    let lite = with_imr(args.tokenizer.load()?, args.imr.as_ref())?;
    let mode = EncodeMode::from(args.mode);

    let mut text = Vec::new();
    match &args.input {
        Some(p) => text = artifact::read(p)?,
        None => {
            io::stdin().lock().read_to_end(&mut text)?;
        }
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let (mut lines, mut base_total, mut mode_total) = (0usize, 0usize, 0usize);
    let body = text.strip_suffix(b"\n").unwrap_or(&text);
    let input_lines = if text.is_empty() { None } else { Some(body.split(|b| *b == b'\n')) };
    for line in input_lines.into_iter().flatten() {
        let ids = encode_line(&lite, line, mode)?;
        if args.compare {
            let base = lite.base().encode_ids(line)?.len();
            writeln!(out, "{base}\t{}", ids.len())?;
            base_total += base;
            mode_total += ids.len();
        } else if args.show_tokens {
            writeln!(out, "{}", display_sequence(lite.base(), &ids))?;
        } else {
            let joined: Vec<String> = ids.iter().map(|t| t.0.to_string()).collect();
            writeln!(out, "{}", joined.join(" "))?;
        }
        lines += 1;
    }
    if args.compare && lines > 0 {
        let n = lines as f64;
        let (b, m) = (base_total as f64 / n, mode_total as f64 / n);
        let change = if b > 0.0 { 100.0 * (m - b) / b } else { 0.0 };
        writeln!(out, "# lines {lines}")?;
        writeln!(out, "# average original {b:.2}")?;
        writeln!(out, "# average {} {m:.2} ({change:+.2}%)", mode_name(args.mode))?;
    }
    out.flush()?;
    Ok(())
}

fn mode_name(mode: ModeArg) -> &'static str {
    match mode {
        ModeArg::Original => "original",
        ModeArg::SplitOnly => "split-only",
        ModeArg::SplitRemerge => "split-remerge",
        ModeArg::Incremental => "incremental",
    }
}

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use litetoken_core::display::VISIBLE_SPACE;
use litetoken_core::{Category, MergeGraph, TokenId};
use serde::Serialize;

use crate::artifact::{self, TokenizerArgs};
use crate::cmd::identify::ReportFile;
use crate::{DataError, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    /// Root token text; a leading "␣" stands for a space
    #[arg(long, conflicts_with = "id", required_unless_present = "id")]
    pub token: Option<String>,

    /// Root token id
    #[arg(long)]
    pub id: Option<u32>,

    #[arg(long, default_value_t = 8)]
    pub depth: usize,

    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    pub format: GraphFormat,

    /// Identify report used to color nodes by category (DOT only)
    #[arg(long)]
    pub report: Option<PathBuf>,

    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn color(category: Category) -> Option<&'static str> {
    match category {
        Category::Frequent => Some("palegreen"),
        Category::KeptLowRatio => Some("gold"),
        Category::Residue => Some("salmon"),
        _ => None,
    }
}

pub fn graph(mut args: GraphArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    if let Some(p) = &mut args.report {
        artifact::input(p)?;
    }
    if let Some(p) = &mut args.output {
        artifact::output(p)?;
    }
    let model = args.tokenizer.load()?.model;
    let root = match (&args.token, args.id) {
        (Some(text), _) => {
            let bytes = text.replace(VISIBLE_SPACE, " ");
            model
                .token_id(bytes.as_bytes())
                .ok_or_else(|| UsageError(format!("{text:?} is not in the vocabulary")))?
        }
        (None, Some(id)) => {
            let id = TokenId(id);
            model.check_id(id)?;
            id
        }
        (None, None) => return Err(UsageError("give --token or --id".into()).into()),
    };
    let graph = MergeGraph::build(&model)?;

    let mut colors = HashMap::new();
    if let Some(path) = &args.report {
        let file: ReportFile = artifact::read_json(path)?;
        if file.model_hash != model.content_hash() {
            return Err(DataError(format!("{} was computed for a different tokenizer", path.display())).into());
        }
        for r in &file.report.records {
            if let Some(c) = color(r.category) {
                colors.insert(r.token, c.to_string());
            }
        }
    }
    let text = match args.format {
        GraphFormat::Dot => graph.to_dot(&model, root, args.depth, &colors),
        GraphFormat::Json => {
            let mut s = serde_json::to_string_pretty(&graph.tree(&model, root, args.depth))?;
            s.push('\n');
            s
        }
    };
    match &args.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

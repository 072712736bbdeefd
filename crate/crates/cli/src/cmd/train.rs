use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use litetoken_core::{train as train_model, Alphabet, PretokenizerConfig, TrainOptions};
use serde::Serialize;

use crate::artifact::{self, PretokenizerArg, RunConfig, TokenizerArgs};
use crate::corpus::CorpusArgs;

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Final vocabulary size, base tokens included
    #[arg(long)]
    pub vocab_size: usize,

    #[arg(long, value_enum, default_value_t = PretokenizerArg::WhitespacePrefix)]
    pub pretokenizer: PretokenizerArg,

    /// Start from all 256 bytes instead of the bytes seen in the corpus
    #[arg(long)]
    pub all_bytes: bool,

    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn train(mut args: TrainArgs) -> Result<()> {
    args.corpus.resolve()?;
    artifact::output(&mut args.output)?;
    let config = RunConfig::new("train", &args)?;
    let docs = args.corpus.collect()?;
    let options = TrainOptions {
        target_vocab: args.vocab_size,
        pretokenizer: PretokenizerConfig::from(args.pretokenizer),
        alphabet: if args.all_bytes { Alphabet::AllBytes } else { Alphabet::Observed },
    };
    let model = train_model(&docs, &options)?;
    artifact::write_json(&args.output, &artifact::model_document(&model, None, &config))?;
    eprintln!(
        "trained {} tokens ({} merges) on {} documents; hash {}",
        model.vocab_size(),
        model.merges().len(),
        docs.len(),
        model.content_hash()
    );
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn convert(mut args: ConvertArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    artifact::output(&mut args.output)?;
    let config = RunConfig::new("convert", &args)?;
    let loaded = args.tokenizer.load()?;
    let doc = artifact::model_document(&loaded.model, loaded.imr.as_ref(), &config);
    artifact::write_json(&args.output, &doc)?;
    eprintln!(
        "{} model with {} tokens; hash {}",
        loaded.model.flavor().name(),
        loaded.model.vocab_size(),
        loaded.model.content_hash()
    );
    Ok(())
}

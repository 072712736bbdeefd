use anyhow::Result;
use clap::Args;
use litetoken_core::{estimate, SavingsInput};
use serde::Serialize;

use crate::artifact::RunConfig;

#[derive(Debug, Args, Serialize)]
pub struct SavingsArgs {
    #[arg(long)]
    pub vocab_size: u64,

    /// Fraction of the vocabulary removed, between 0 and 1
    #[arg(long)]
    pub removed_fraction: f64,

    #[arg(long)]
    pub hidden_dim: u64,

    /// Input and output embeddings share one matrix
    #[arg(long)]
    pub tied_embedding: bool,

    #[arg(long)]
    pub total_params: u64,

    #[arg(long, default_value_t = 2048)]
    pub sequence_length: u64,

    /// Transformer layers, for the attention share of compute
    #[arg(long, default_value_t = 0)]
    pub num_layers: u64,

    /// Print JSON instead of text
    #[arg(long)]
    pub json: bool,
}

pub fn savings(args: SavingsArgs) -> Result<()> {
    let config = RunConfig::new("savings", &args)?;
    let input = SavingsInput {
        vocab_size: args.vocab_size,
        removed_fraction: args.removed_fraction,
        hidden_dim: args.hidden_dim,
        tied_embedding: args.tied_embedding,
        total_params: args.total_params,
        sequence_length: args.sequence_length,
        num_layers: args.num_layers,
    };
    let report = estimate(&input)?;
    if args.json {
        let doc = serde_json::json!({ "config": config, "input": input, "report": report });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    println!("removed tokens      {:.0}", report.removed_tokens);
    println!("parameters saved    {:.0} ({:.2}%)", report.params_saved, report.param_pct);
    println!("flops, first pass   {:.2}%", report.flops_first_pct);
    println!("flops, cached step  {:.2}%", report.flops_cache_pct);
    println!();
    println!("compute counts 2 flops per multiply-add over all non-embedding-lookup");
    println!("parameters, plus 4*hidden*layers*context for attention scores and values;");
    println!("only the output projection shrinks.");
    Ok(())
}

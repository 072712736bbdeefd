//! Back-of-envelope parameter and compute savings from a smaller vocabulary.
//!
//! Compute is counted as 2 FLOPs per multiply-accumulate. All parameters
//! except the input embedding take part in a matmul for every token; the
//! attention score and value products add `4 * hidden * layers * context`
//! FLOPs per token. With a KV cache a decode step processes a single token
//! against `sequence_length + 1` cached positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsInput {
    pub vocab_size: u64,
    /// Fraction of the vocabulary removed, in `[0, 1]`.
    pub removed_fraction: f64,
    pub hidden_dim: u64,
    /// Input and output embeddings share one matrix.
    pub tied_embedding: bool,
    pub total_params: u64,
    pub sequence_length: u64,
    #[serde(default)]
    pub num_layers: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub removed_tokens: f64,
    pub params_saved: f64,
    pub param_pct: f64,
    pub flops_first_pct: f64,
    pub flops_cache_pct: f64,
}

pub fn estimate(input: &SavingsInput) -> Result<SavingsReport> {
    if input.total_params == 0 {
        return Err(Error::InvalidInput("total_params must be positive".into()));
    }
    if !(0.0..=1.0).contains(&input.removed_fraction) {
        return Err(Error::InvalidInput(format!(
            "removed fraction {} is outside [0, 1]",
            input.removed_fraction
        )));
    }
    let v = input.vocab_size as f64;
    let h = input.hidden_dim as f64;
    let p = input.total_params as f64;
    let f = input.removed_fraction;
    let copies = if input.tied_embedding { 1.0 } else { 2.0 };
    let params_saved = f * v * h * copies;

    // the input embedding is a lookup, only the output head is a matmul
    let matmul_params = if input.tied_embedding { p } else { p - v * h }.max(0.0);
    let head_saved = 2.0 * f * v * h;
    let l = input.sequence_length as f64;
    let attn = 4.0 * h * input.num_layers as f64;

    let first_total = l * 2.0 * matmul_params + attn * l * (l + 1.0) / 2.0;
    let cache_total = 2.0 * matmul_params + attn * (l + 1.0);
    let pct = |saved: f64, total: f64| if total > 0.0 { 100.0 * saved / total } else { 0.0 };

    Ok(SavingsReport {
        removed_tokens: f * v,
        params_saved,
        param_pct: 100.0 * params_saved / p,
        flops_first_pct: pct(l * head_saved, first_total),
        flops_cache_pct: pct(head_saved, cache_total),
    })
}

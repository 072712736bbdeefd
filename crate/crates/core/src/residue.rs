//! Scoring and classification of intermediate merge residues.
//!
//! A token is a residue when its final/intermediate frequency ratio
//! `R = F1 / (F1 + F2)` is at most `r` and its entropy score
//! `S = min(S_left, S_right)` is at most `s`. Only non-base, non-special,
//! ASCII-only tokens that were observed in the corpus are eligible.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::display::display_token;
use crate::error::{Error, Result};
use crate::model::{Flavor, TokenId, TokenizerModel};
use crate::stats::{neighbor_entropy, CorpusStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ratio: f64,
    /// In nats.
    pub entropy: f64,
}

impl Thresholds {
    pub const STANDARD: Thresholds = Thresholds {
        ratio: 0.25,
        entropy: 4.0,
    };
    pub const RANK_GREEDY: Thresholds = Thresholds {
        ratio: 0.05,
        entropy: 3.5,
    };

    pub fn default_for(flavor: Flavor) -> Self {
        match flavor {
            Flavor::Standard => Self::STANDARD,
            Flavor::RankGreedy => Self::RANK_GREEDY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Low ratio and low entropy score: removed.
    Residue,
    /// Low ratio but diverse neighbors (roots, affixes, standalone words).
    KeptLowRatio,
    /// Ratio above the threshold.
    Frequent,
    /// Never seen in the corpus, as a final token or inside one.
    Unobserved,
    /// Base, special or non-ASCII.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub token: TokenId,
    pub text: String,
    pub f1: u64,
    pub f2: u64,
    pub ratio: Option<f64>,
    pub s_left: f64,
    pub s_right: f64,
    pub score: f64,
    pub ascii_only: bool,
    pub category: Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub thresholds: Thresholds,
    /// Also remove eligible tokens never seen in the corpus.
    pub include_unobserved: bool,
}

impl ClassifyOptions {
    pub fn new(thresholds: Thresholds) -> Self {
        ClassifyOptions {
            thresholds,
            include_unobserved: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub vocab_size: usize,
    /// Non-special tokens made only of ASCII bytes.
    pub ascii_vocab: usize,
    /// Eligible tokens passing the ratio test alone.
    pub low_ratio: usize,
    /// Tokens passing both tests.
    pub residue: usize,
    pub low_ratio_pct: f64,
    pub residue_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueReport {
    pub model_hash: String,
    pub options: ClassifyOptions,
    pub summary: Summary,
    pub imr: BTreeSet<TokenId>,
    pub records: Vec<TokenRecord>,
}

pub fn fi_ratio(stats: &CorpusStats, t: TokenId) -> Option<f64> {
    let (f1, f2) = (stats.f1(t), stats.f2(t));
    if f1 + f2 == 0 {
        None
    } else {
        Some(f1 as f64 / (f1 + f2) as f64)
    }
}

/// Whether a token may ever be removed.
pub fn is_eligible(model: &TokenizerModel, t: TokenId) -> bool {
    !model.is_base(t) && !model.is_special(t) && model.is_ascii(t)
}

pub fn ascii_vocab_size(model: &TokenizerModel) -> usize {
    model
        .ids()
        .filter(|t| !model.is_special(*t) && model.is_ascii(*t))
        .count()
}

fn percent(count: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        100.0 * count as f64 / of as f64
    }
}

struct Scored {
    token: TokenId,
    eligible: bool,
    ratio: Option<f64>,
    s_left: f64,
    s_right: f64,
}

impl Scored {
    fn score(&self) -> f64 {
        self.s_left.min(self.s_right)
    }

    fn low_ratio(&self, options: &ClassifyOptions) -> bool {
        match self.ratio {
            Some(r) => r <= options.thresholds.ratio,
            None => options.include_unobserved,
        }
    }

    fn category(&self, options: &ClassifyOptions) -> Category {
        if !self.eligible {
            return Category::Excluded;
        }
        match self.ratio {
            None if options.include_unobserved => Category::Residue,
            None => Category::Unobserved,
            Some(r) if r > options.thresholds.ratio => Category::Frequent,
            Some(_) if self.score() <= options.thresholds.entropy => Category::Residue,
            Some(_) => Category::KeptLowRatio,
        }
    }
}

fn score_all(stats: &CorpusStats, model: &TokenizerModel) -> Result<Vec<Scored>> {
    stats.check_model(model)?;
    Ok(model
        .ids()
        .map(|t| {
            let (s_left, s_right) = neighbor_entropy(stats, t);
            Scored {
                token: t,
                eligible: is_eligible(model, t),
                ratio: fi_ratio(stats, t),
                s_left,
                s_right,
            }
        })
        .collect())
}

pub fn classify(stats: &CorpusStats, model: &TokenizerModel, options: ClassifyOptions) -> Result<ResidueReport> {
    if !(options.thresholds.ratio.is_finite() && options.thresholds.entropy.is_finite()) {
        return Err(Error::InvalidInput("thresholds must be finite".into()));
    }
    let scored = score_all(stats, model)?;
    let mut imr = BTreeSet::new();
    let mut low_ratio = 0;
    let records = scored
        .iter()
        .map(|s| {
            let category = s.category(&options);
            if s.eligible && s.low_ratio(&options) {
                low_ratio += 1;
            }
            if category == Category::Residue {
                imr.insert(s.token);
            }
            TokenRecord {
                token: s.token,
                text: display_token(model, s.token),
                f1: stats.f1(s.token),
                f2: stats.f2(s.token),
                ratio: s.ratio,
                s_left: s.s_left,
                s_right: s.s_right,
                score: s.score(),
                ascii_only: model.is_ascii(s.token),
                category,
            }
        })
        .collect();
    let ascii_vocab = ascii_vocab_size(model);
    Ok(ResidueReport {
        model_hash: model.content_hash().to_string(),
        options,
        summary: Summary {
            vocab_size: model.vocab_size(),
            ascii_vocab,
            low_ratio,
            residue: imr.len(),
            low_ratio_pct: percent(low_ratio, ascii_vocab),
            residue_pct: percent(imr.len(), ascii_vocab),
        },
        imr,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub entropy: f64,
    pub imr: usize,
    pub imr_pct: f64,
    pub low_ratio: usize,
    pub low_ratio_pct: f64,
}

/// IMR size for every threshold pair of the grid.
pub fn sweep(
    stats: &CorpusStats,
    model: &TokenizerModel,
    ratio_grid: &[f64],
    entropy_grid: &[f64],
    include_unobserved: bool,
) -> Result<Vec<SweepRow>> {
    if ratio_grid.is_empty() || entropy_grid.is_empty() {
        return Err(Error::InvalidInput("threshold grids must be non-empty".into()));
    }
    let scored = score_all(stats, model)?;
    let ascii_vocab = ascii_vocab_size(model);
    let mut rows = Vec::with_capacity(ratio_grid.len() * entropy_grid.len());
    for &ratio in ratio_grid {
        for &entropy in entropy_grid {
            let options = ClassifyOptions {
                thresholds: Thresholds { ratio, entropy },
                include_unobserved,
            };
            let imr = scored
                .iter()
                .filter(|s| s.category(&options) == Category::Residue)
                .count();
            let low_ratio = scored
                .iter()
                .filter(|s| s.eligible && s.low_ratio(&options))
                .count();
            rows.push(SweepRow {
                ratio,
                entropy,
                imr,
                imr_pct: percent(imr, ascii_vocab),
                low_ratio,
                low_ratio_pct: percent(low_ratio, ascii_vocab),
            });
        }
    }
    Ok(rows)
}

impl ResidueReport {
    pub fn record(&self, t: TokenId) -> Option<&TokenRecord> {
        self.records.get(t.index()).filter(|r| r.token == t)
    }

    /// Prevalence table: vocabulary size and residue counts with and
    /// without the entropy filter.
    pub fn summary_table(&self) -> String {
        let s = &self.summary;
        let t = &self.options.thresholds;
        let mut out = String::new();
        let _ = writeln!(out, "thresholds: ratio <= {} and entropy score <= {} nats", t.ratio, t.entropy);
        let _ = writeln!(
            out,
            "{:>16} {:>18} {:>16} {:>18} {:>16}",
            "vocab (ascii)", "low-ratio # (raw)", "residue # (ent)", "low-ratio % (raw)", "residue % (ent)"
        );
        let _ = writeln!(
            out,
            "{:>16} {:>18} {:>16} {:>18.2} {:>16.2}",
            s.ascii_vocab, s.low_ratio, s.residue, s.low_ratio_pct, s.residue_pct
        );
        out
    }
}

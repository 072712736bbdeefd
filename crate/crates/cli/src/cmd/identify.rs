use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use litetoken_core::stats::StatsFile;
use litetoken_core::{
    classify, sweep as sweep_grid, Category, ClassifyOptions, CorpusStats, EncodeTrace, Flavor, ImrFile,
    LiteTokenizer, ResidueReport, Thresholds, TokenizerModel,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{self, RunConfig, TokenizerArgs};
use crate::corpus::{CorpusArgs, CorpusFormat};
use crate::{DataError, UsageError};

pub const REPORT_FORMAT: &str = "litetoken-report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Preset {
    /// ratio 0.25, entropy 4.0
    Standard,
    /// ratio 0.05, entropy 3.5
    RankGreedy,
    /// Whichever of the two matches the tokenizer flavor
    Auto,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    /// Maximum final/(final+intermediate) frequency ratio
    #[arg(long, requires = "entropy", conflicts_with = "preset")]
    pub ratio: Option<f64>,

    /// Maximum entropy score in nats
    #[arg(long, requires = "ratio", conflicts_with = "preset")]
    pub entropy: Option<f64>,

    /// Named threshold pair instead of --ratio and --entropy
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

impl ThresholdArgs {
    fn resolve(&self, flavor: Flavor) -> Result<Thresholds> {
        match (self.ratio, self.entropy, self.preset) {
            (Some(ratio), Some(entropy), None) => Ok(Thresholds { ratio, entropy }),
            (None, None, Some(Preset::Standard)) => Ok(Thresholds::STANDARD),
            (None, None, Some(Preset::RankGreedy)) => Ok(Thresholds::RANK_GREEDY),
            (None, None, Some(Preset::Auto)) => Ok(Thresholds::default_for(flavor)),
            _ => Err(UsageError(
                "thresholds must be given explicitly: --ratio R --entropy S, or --preset".into(),
            )
            .into()),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    /// Stats file written by analyze
    #[arg(short, long)]
    pub stats: PathBuf,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    /// Also remove eligible tokens never seen in the corpus
    #[arg(long)]
    pub include_unobserved: bool,

    /// Per-token report (JSON)
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Removal set for prune and encode (JSON)
    #[arg(long)]
    pub imr: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub model_hash: String,
    pub config: serde_json::Value,
    pub report: ResidueReport,
}

fn load_stats(path: &std::path::Path, model: &TokenizerModel) -> Result<CorpusStats> {
    let file: StatsFile = artifact::read_json(path)?;
    let stats = file.into_stats().with_context(|| format!("in {}", path.display()))?;
    stats
        .check_model(model)
        .with_context(|| format!("{} was computed for a different tokenizer", path.display()))?;
    Ok(stats)
}

pub fn identify(mut args: IdentifyArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    artifact::input(&mut args.stats)?;
    for out in [&mut args.report, &mut args.imr].into_iter().flatten() {
        artifact::output(out)?;
    }
    let model = args.tokenizer.load()?.model;
    let thresholds = args.thresholds.resolve(model.flavor())?;
    let config = RunConfig::new("identify", &args)?;
    let stats = load_stats(&args.stats, &model)?;
    let options = ClassifyOptions {
        thresholds,
        include_unobserved: args.include_unobserved,
    };
    let report = classify(&stats, &model, options)?;
    print!("{}", report.summary_table());

    if let Some(path) = &args.imr {
        artifact::write_json(path, &ImrFile::new(&model, &report.imr, config.to_value()))?;
    }
    if let Some(path) = &args.report {
        let file = ReportFile {
            format: REPORT_FORMAT.into(),
            model_hash: model.content_hash().to_string(),
            config: config.to_value(),
            report,
        };
        artifact::write_json(path, &file)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum CategoryArg {
    Residue,
    KeptLowRatio,
    Frequent,
    Unobserved,
    Excluded,
}

impl From<CategoryArg> for Category {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::Residue => Category::Residue,
            CategoryArg::KeptLowRatio => Category::KeptLowRatio,
            CategoryArg::Frequent => Category::Frequent,
            CategoryArg::Unobserved => Category::Unobserved,
            CategoryArg::Excluded => Category::Excluded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SortKey {
    Id,
    Ratio,
    Score,
    F1,
    F2,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Report written by identify --report
    pub report: PathBuf,

    /// Only tokens of this category
    #[arg(long, value_enum)]
    pub category: Option<CategoryArg>,

    #[arg(long, value_enum, default_value_t = SortKey::F2)]
    pub sort: SortKey,

    /// Print at most this many rows
    #[arg(long)]
    pub limit: Option<usize>,

    /// One JSON record per line instead of a table
    #[arg(long)]
    pub jsonl: bool,
}

pub fn report(mut args: ReportArgs) -> Result<()> {
    artifact::input(&mut args.report)?;
    let file: ReportFile = artifact::read_json(&args.report)?;
    if file.format != REPORT_FORMAT {
        return Err(DataError(format!("{} is not a residue report", args.report.display())).into());
    }
    let wanted = args.category.map(Category::from);
    let mut rows: Vec<_> = file
        .report
        .records
        .iter()
        .filter(|r| wanted.is_none_or(|c| r.category == c))
        .collect();
    match args.sort {
        SortKey::Id => {}
        SortKey::Ratio => rows.sort_by(|a, b| a.ratio.unwrap_or(f64::INFINITY).total_cmp(&b.ratio.unwrap_or(f64::INFINITY))),
        SortKey::Score => rows.sort_by(|a, b| a.score.total_cmp(&b.score)),
        SortKey::F1 => rows.sort_by_key(|r| std::cmp::Reverse(r.f1)),
        SortKey::F2 => rows.sort_by_key(|r| std::cmp::Reverse(r.f2)),
    }
    let rows = rows.into_iter().take(args.limit.unwrap_or(usize::MAX));
    let mut out = String::new();
    if args.jsonl {
        for r in rows {
            let _ = writeln!(out, "{}", serde_json::to_string(r)?);
        }
        print!("{out}");
        return Ok(());
    }
    let _ = writeln!(out, "{:>8}  {:<24} {:>10} {:>10} {:>7} {:>7} {:>7}  category", "id", "token", "f1", "f2", "ratio", "S_left", "S_right");
    for r in rows {
        let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
        let category = serde_json::to_value(r.category)?;
        let _ = writeln!(
            out,
            "{:>8}  {:<24} {:>10} {:>10} {:>7} {:>7.3} {:>7.3}  {}",
            r.token.0,
            r.text,
            r.f1,
            r.f2,
            ratio,
            r.s_left,
            r.s_right,
            category.as_str().unwrap_or_default()
        );
    }
    print!("{out}");
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,

    #[arg(short, long)]
    pub stats: PathBuf,

    /// Ratio thresholds, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,

    /// Entropy thresholds in nats, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub entropies: Vec<f64>,

    #[arg(long)]
    pub include_unobserved: bool,

    /// Held-out corpus for measuring token inflation at every grid point
    #[arg(long, value_name = "FILE")]
    pub held_out: Vec<PathBuf>,

    /// Field holding the document text in JSON lines held-out files
    #[arg(long, default_value = "text")]
    pub text_field: String,

    /// CSV destination; standard output when omitted
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn sweep(mut args: SweepArgs) -> Result<()> {
    args.tokenizer.resolve()?;
    artifact::input(&mut args.stats)?;
    args.held_out.iter_mut().try_for_each(artifact::input)?;
    if let Some(out) = &mut args.output {
        artifact::output(out)?;
    }
    let config = RunConfig::new("sweep", &args)?;
    let model = args.tokenizer.load()?.model;
    let stats = load_stats(&args.stats, &model)?;
    let rows = sweep_grid(&stats, &model, &args.ratios, &args.entropies, args.include_unobserved)?;

    let held_out: Vec<EncodeTrace> = if args.held_out.is_empty() {
        Vec::new()
    } else {
        let corpus = CorpusArgs {
            corpus: args.held_out.clone(),
            corpus_format: CorpusFormat::Auto,
            text_field: args.text_field.clone(),
            sample: None,
            seed: 0,
        };
        corpus
            .collect()?
            .iter()
            .map(|d| model.encode(d))
            .collect::<litetoken_core::Result<_>>()?
    };

    let mut csv = String::new();
    let _ = writeln!(csv, "# model_hash={}", model.content_hash());
    let _ = writeln!(csv, "# config={}", serde_json::to_string(&config)?);
    csv.push_str("ratio,entropy,imr,imr_pct,low_ratio,low_ratio_pct");
    if !held_out.is_empty() {
        csv.push_str(",base_tokens,split_only_tokens,split_remerge_tokens,inflation");
    }
    csv.push('\n');
    for row in rows {
        let _ = write!(
            csv,
            "{},{},{},{:.4},{},{:.4}",
            row.ratio, row.entropy, row.imr, row.imr_pct, row.low_ratio, row.low_ratio_pct
        );
        if !held_out.is_empty() {
            let options = ClassifyOptions {
                thresholds: Thresholds {
                    ratio: row.ratio,
                    entropy: row.entropy,
                },
                include_unobserved: args.include_unobserved,
            };
            let imr: BTreeSet<_> = classify(&stats, &model, options)?.imr;
            let lite = LiteTokenizer::new(model.clone(), imr)?;
            let (mut base, mut split, mut remerge) = (0usize, 0usize, 0usize);
            for trace in &held_out {
                let s = lite.split(trace);
                base += trace.final_nodes.len();
                remerge += lite.remerge(&s).ids.len();
                split += s.ids.len();
            }
            let inflation = if base == 0 { 1.0 } else { remerge as f64 / base as f64 };
            let _ = write!(csv, ",{base},{split},{remerge},{inflation:.6}");
        }
        csv.push('\n');
    }
    match &args.output {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use litetoken_core::stats::StatsFile;
use litetoken_core::{ImrFile, ModelParts, PretokenizerConfig, TokenId, TokenizerModel};
use serde_json::Value;
use tempfile::TempDir;

const CORPUS: &str = include_str!("../../core/tests/fixtures/corpus.txt");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let work = Work {
            dir: tempfile::tempdir().unwrap(),
        };
        let docs: String = CORPUS.lines().take(300).map(|l| format!("{l}\n")).collect();
        std::fs::write(work.path("corpus.txt"), docs).unwrap();
        work
    }

    /// Trains a model and computes stats over the corpus.
    fn analyzed() -> Self {
        let work = Self::new();
        work.ok(&["train", "-c", "corpus.txt", "--vocab-size", "120", "-o", "model.json"]);
        work.ok(&["analyze", "-t", "model.json", "-c", "corpus.txt", "-o", "stats.json"]);
        work
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_litetoken"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("LITETOKEN_THREADS")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.run(args).status.code().unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_slice(&std::fs::read(self.path(name)).unwrap()).unwrap()
    }

    fn stats(&self, name: &str) -> StatsFile {
        serde_json::from_slice(&std::fs::read(self.path(name)).unwrap()).unwrap()
    }
}

fn counters(s: &StatsFile) -> Value {
    serde_json::json!([s.model_hash, s.total_docs, s.total_tokens, s.f1, s.f2, s.left, s.right])
}

#[test]
fn three_documents() {
    let work = Work::new();
    std::fs::write(work.path("three.txt"), "ab ab\nabc\n\nba\n").unwrap();
    work.ok(&["train", "-c", "three.txt", "--vocab-size", "6", "-o", "m.json"]);
    work.ok(&["analyze", "-t", "m.json", "-c", "three.txt", "-o", "s.json"]);
    assert_eq!(work.stats("s.json").total_docs, 3);
}

#[test]
fn analyze_is_deterministic_and_shardable() {
    let work = Work::analyzed();
    let first = std::fs::read(work.path("stats.json")).unwrap();
    work.ok(&["analyze", "-t", "model.json", "-c", "corpus.txt", "-o", "stats.json"]);
    assert_eq!(std::fs::read(work.path("stats.json")).unwrap(), first);

    work.ok(&["analyze", "-t", "model.json", "-c", "corpus.txt", "--threads", "4", "-o", "t4.json"]);
    work.ok(&["analyze", "-t", "model.json", "-c", "corpus.txt", "--threads", "1", "-o", "t1.json"]);
    let single = counters(&work.stats("t1.json"));
    assert_eq!(counters(&work.stats("t4.json")), single);

    let mut shard_files = Vec::new();
    for i in 0..4 {
        let name = format!("shard{i}.json");
        let (index, out) = (i.to_string(), name.clone());
        work.ok(&[
            "analyze", "-t", "model.json", "-c", "corpus.txt", "--shard-index", &index, "--shard-count", "4", "-o", &out,
        ]);
        shard_files.push(name);
    }
    let mut args = vec!["merge-stats"];
    args.extend(shard_files.iter().map(String::as_str));
    args.extend(["-o", "merged.json"]);
    work.ok(&args);
    assert_eq!(counters(&work.stats("merged.json")), single);
}

#[test]
fn merging_stats_of_different_models_fails() {
    let work = Work::analyzed();
    work.ok(&["train", "-c", "corpus.txt", "--vocab-size", "100", "-o", "other.json"]);
    work.ok(&["analyze", "-t", "other.json", "-c", "corpus.txt", "-o", "other-stats.json"]);
    assert_eq!(work.code(&["merge-stats", "stats.json", "other-stats.json", "-o", "x.json"]), 3);
}

#[test]
fn artifacts_carry_config_and_hash() {
    let work = Work::analyzed();
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--ratio", "0.25", "--entropy", "4.0", "--report", "report.json", "--imr", "imr.json"]);
    work.ok(&["prune", "-t", "model.json", "--imr", "imr.json", "-o", "lite.json", "--mask", "mask.json"]);
    let hash = work.json("stats.json")["model_hash"].clone();
    for (name, command) in [("report.json", "identify"), ("imr.json", "identify"), ("mask.json", "prune"), ("stats.json", "analyze")] {
        let doc = work.json(name);
        assert_eq!(doc["model_hash"], hash, "{name}");
        assert_eq!(doc["config"]["command"], command, "{name}");
    }
    assert_eq!(work.json("lite.json")["config"]["command"], "prune");
    assert_eq!(work.json("model.json")["config"]["command"], "train");
    let report = work.json("report.json");
    assert_eq!(report["report"]["options"]["thresholds"]["ratio"], 0.25);
    assert_eq!(report["report"]["options"]["thresholds"]["entropy"], 4.0);
    let corpus = work.json("stats.json")["config"]["args"]["corpus"]["corpus"][0].clone();
    assert!(Path::new(corpus.as_str().unwrap()).is_absolute());
}

#[test]
fn identify_summary_arithmetic() {
    let work = Work::analyzed();
    let stdout = work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--preset", "auto", "--report", "report.json"]);
    assert!(stdout.contains("residue"));
    let report = work.json("report.json")["report"].clone();
    let summary = &report["summary"];
    let ascii = summary["ascii_vocab"].as_f64().unwrap();
    let residue = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["category"] == "residue")
        .count();
    assert_eq!(summary["residue"].as_u64().unwrap() as usize, residue);
    let pct = summary["residue_pct"].as_f64().unwrap();
    assert!((pct - 100.0 * residue as f64 / ascii).abs() < 1e-9);

    let lines = work.ok(&["report", "report.json", "--category", "residue", "--jsonl"]);
    let parsed: Vec<Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed.len(), residue);
    assert!(parsed.windows(2).all(|w| w[0]["f2"].as_u64() >= w[1]["f2"].as_u64()));
    let table = work.ok(&["report", "report.json", "--limit", "3", "--sort", "id"]);
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn thresholds_are_mandatory() {
    let work = Work::analyzed();
    assert_eq!(work.code(&["identify", "-t", "model.json", "-s", "stats.json"]), 2);
    assert_eq!(work.code(&["identify", "-t", "model.json", "-s", "stats.json", "--ratio", "0.2"]), 2);
}

#[test]
fn zero_thresholds_keep_surviving_tokens() {
    let work = Work::new();
    work.ok(&["train", "-c", "corpus.txt", "--vocab-size", "120", "-o", "model.json"]);
    // append every token's own text as a document so that each one survives at least once
    let model = TokenizerModel::from_json(&std::fs::read_to_string(work.path("model.json")).unwrap()).unwrap();
    let mut corpus = std::fs::read_to_string(work.path("corpus.txt")).unwrap();
    for t in model.ids() {
        let text = String::from_utf8(model.token_bytes(t).unwrap().to_vec()).unwrap();
        if !text.contains('\n') && model.encode_ids(text.as_bytes()).unwrap() == [t] {
            corpus.push_str(&text);
            corpus.push('\n');
        }
    }
    std::fs::write(work.path("all.txt"), corpus).unwrap();
    work.ok(&["analyze", "-t", "model.json", "-c", "all.txt", "-o", "stats.json"]);
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--ratio", "0", "--entropy", "0", "--imr", "imr.json"]);
    let imr: ImrFile = serde_json::from_value(work.json("imr.json")).unwrap();
    assert!(imr.imr.is_empty(), "{:?}", imr.imr);
}

#[test]
fn mismatched_removal_set_is_rejected() {
    let work = Work::analyzed();
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--preset", "standard", "--imr", "imr.json"]);
    work.ok(&["train", "-c", "corpus.txt", "--vocab-size", "100", "-o", "other.json"]);
    assert_eq!(work.code(&["prune", "-t", "other.json", "--imr", "imr.json", "-o", "lite.json"]), 3);
    assert_eq!(work.code(&["encode", "-t", "other.json", "--imr", "imr.json", "-i", "corpus.txt"]), 3);
    assert_eq!(work.code(&["identify", "-t", "other.json", "-s", "stats.json", "--preset", "standard"]), 3);
}

#[test]
fn original_mode_reproduces_base_encoding() {
    let work = Work::analyzed();
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--preset", "standard", "--imr", "imr.json"]);
    work.ok(&["prune", "-t", "model.json", "--imr", "imr.json", "-o", "lite.json"]);
    let base = work.ok(&["encode", "-t", "model.json", "-i", "corpus.txt", "--mode", "original"]);
    let lite = work.ok(&["encode", "-t", "lite.json", "-i", "corpus.txt", "--mode", "original"]);
    assert_eq!(base, lite);
    assert_eq!(base.lines().count(), 300);
    let remerged = work.ok(&["encode", "-t", "lite.json", "-i", "corpus.txt"]);
    let split = work.ok(&["encode", "-t", "model.json", "--imr", "imr.json", "-i", "corpus.txt", "--mode", "split-only"]);
    let streamed = work.ok(&["encode", "-t", "lite.json", "-i", "corpus.txt", "--mode", "incremental"]);
    assert_eq!(split, streamed);
    assert_ne!(remerged, base);
}

#[test]
fn compare_reports_averages() {
    let work = Work::analyzed();
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--preset", "standard", "--imr", "imr.json"]);
    work.ok(&["prune", "-t", "model.json", "--imr", "imr.json", "-o", "lite.json"]);
    let out = work.ok(&["encode", "-t", "lite.json", "-i", "corpus.txt", "--compare"]);
    let rows: Vec<(f64, f64)> = out
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 300);
    let base = rows.iter().map(|r| r.0).sum::<f64>() / 300.0;
    assert!(out.contains(&format!("# average original {base:.2}")));
    assert!(out.contains("# average split-remerge"));
}

fn corruption_model() -> TokenizerModel {
    let base = [" ", "c", "o", "r", "u", "p", "t", "i", "n", "s"];
    let merges = [
        (" ", "c"),
        (" c", "o"),
        (" co", "r"),
        ("r", "u"),
        ("o", "n"),
        ("t", "i"),
        ("ti", "on"),
        ("p", "tion"),
        ("ru", "ption"),
        ("ruption", "s"),
        (" cor", "ru"),
        (" corru", "ption"),
    ];
    let mut vocab: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    let mut triples = Vec::new();
    for (l, r) in merges {
        let id = |s: &str| TokenId(vocab.iter().position(|w| w == s).unwrap() as u32);
        let (li, ri) = (id(l), id(r));
        vocab.push(format!("{l}{r}"));
        triples.push((li, ri, TokenId(vocab.len() as u32 - 1)));
    }
    TokenizerModel::from_parts(ModelParts {
        vocab: vocab.into_iter().map(String::into_bytes).collect(),
        base_ids: (0..base.len() as u32).map(TokenId).collect(),
        merges: triples,
        pretokenizer: PretokenizerConfig::WhitespacePrefix,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn show_tokens_renders_split_and_remerge() {
    let work = Work::new();
    let model = corruption_model();
    std::fs::write(work.path("model.json"), model.to_json().unwrap()).unwrap();
    let imr: BTreeSet<TokenId> = ["ruptions", "ruption"]
        .iter()
        .map(|w| model.token_id(w.as_bytes()).unwrap())
        .collect();
    let file = ImrFile::new(&model, &imr, Value::Null);
    std::fs::write(work.path("imr.json"), serde_json::to_string(&file).unwrap()).unwrap();
    std::fs::write(work.path("text.txt"), " corruptions\n").unwrap();
    work.ok(&["prune", "-t", "model.json", "--imr", "imr.json", "-o", "lite.json", "--bitmask", "mask.bin"]);

    let show = |mode: &str| work.ok(&["encode", "-t", "lite.json", "-i", "text.txt", "--show-tokens", "--mode", mode]);
    assert_eq!(show("original"), "␣cor|ruptions\n");
    assert_eq!(show("split-only"), "␣cor|ru|ption|s\n");
    assert_eq!(show("split-remerge"), "␣corruption|s\n");

    let bitmask = std::fs::read(work.path("mask.bin")).unwrap();
    assert_eq!(bitmask.len(), model.vocab_size().div_ceil(8));
    for t in model.ids() {
        let set = bitmask[t.index() / 8] & (1 << (t.index() % 8)) != 0;
        assert_eq!(set, imr.contains(&t));
    }
}

#[test]
fn savings_report() {
    let work = Work::new();
    let args = |fraction: &str| {
        vec![
            "savings", "--vocab-size", "100000", "--hidden-dim", "1000", "--total-params", "384615385", "--tied-embedding",
            "--removed-fraction", fraction, "--json",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let pct = |fraction: &str| {
        let a = args(fraction);
        let out = work.ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
        let doc: Value = serde_json::from_str(&out).unwrap();
        doc["report"]["param_pct"].as_f64().unwrap()
    };
    assert!((pct("0.1") - 2.6).abs() < 1e-6);
    assert_eq!(pct("0"), 0.0);
    assert!((pct("0.2") - 2.0 * pct("0.1")).abs() < 1e-9);
    let text = work.ok(&["savings", "--vocab-size", "151936", "--hidden-dim", "1024", "--total-params", "600000000", "--tied-embedding", "--removed-fraction", "0.1"]);
    assert!(text.contains("(2.59%)"), "{text}");
    assert_eq!(work.code(&["savings", "--vocab-size", "10", "--hidden-dim", "4", "--total-params", "0", "--removed-fraction", "0.1"]), 2);
    assert_eq!(work.code(&["savings", "--vocab-size", "10", "--hidden-dim", "4", "--total-params", "100", "--removed-fraction", "1.5"]), 2);
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sweep_grid() {
    let work = Work::analyzed();
    let out = work.ok(&[
        "sweep", "-t", "model.json", "-s", "stats.json", "--ratios", "0.05,0.15,0.25,0.5", "--entropies", "1,2,4", "--held-out", "corpus.txt", "-o", "sweep.csv",
    ]);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(work.path("sweep.csv")).unwrap();
    assert!(text.lines().next().unwrap().starts_with("# model_hash="));
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 12);

    let model = TokenizerModel::from_json(&std::fs::read_to_string(work.path("model.json")).unwrap()).unwrap();
    let stats = work.stats("stats.json").into_stats().unwrap();
    let ratios = [0.05, 0.15, 0.25, 0.5];
    let entropies = [1.0, 2.0, 4.0];
    let expected = litetoken_core::sweep(&stats, &model, &ratios, &entropies, false).unwrap();
    let imr = |r: &Vec<String>| r[2].parse::<usize>().unwrap();
    for (row, want) in rows.iter().zip(&expected) {
        assert_eq!(row[0].parse::<f64>().unwrap(), want.ratio);
        assert_eq!(row[1].parse::<f64>().unwrap(), want.entropy);
        assert_eq!(imr(row), want.imr);
        assert_eq!(row[4].parse::<usize>().unwrap(), want.low_ratio);
        assert!(row[9].parse::<f64>().unwrap() >= 1.0);
    }
    for i in 0..4 {
        for j in 0..3 {
            if j + 1 < 3 {
                assert!(imr(&rows[i * 3 + j]) <= imr(&rows[i * 3 + j + 1]));
            }
            if i + 1 < 4 {
                assert!(imr(&rows[i * 3 + j]) <= imr(&rows[(i + 1) * 3 + j]));
            }
        }
    }

    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--ratio", "0.25", "--entropy", "4", "--report", "report.json"]);
    let single = work.ok(&["sweep", "-t", "model.json", "-s", "stats.json", "--ratios", "0.25", "--entropies", "4"]);
    let row = &parse_csv(&single)[0];
    let summary = work.json("report.json")["report"]["summary"].clone();
    assert_eq!(imr(row) as u64, summary["residue"].as_u64().unwrap());
    assert_eq!(row[4].parse::<u64>().unwrap(), summary["low_ratio"].as_u64().unwrap());
    assert_eq!(work.code(&["sweep", "-t", "model.json", "-s", "stats.json", "--ratios", "", "--entropies", "4"]), 2);
}

#[test]
fn graph_export() {
    let work = Work::analyzed();
    work.ok(&["identify", "-t", "model.json", "-s", "stats.json", "--preset", "standard", "--report", "report.json"]);
    let model = TokenizerModel::from_json(&std::fs::read_to_string(work.path("model.json")).unwrap()).unwrap();
    let last = model.merges().last().unwrap().result.0.to_string();
    let dot = work.ok(&["graph", "-t", "model.json", "--id", &last, "--report", "report.json"]);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("->"));
    assert!(dot.contains("fillcolor=\""));
    let json = work.ok(&["graph", "-t", "model.json", "--id", &last, "--format", "json"]);
    let tree: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(tree["id"].as_u64().unwrap().to_string(), last);
    assert_eq!(tree["parents"][0].as_array().unwrap().len(), 2);
    assert_eq!(work.code(&["graph", "-t", "model.json", "--token", "no such token"]), 2);
}

#[test]
fn imports_vocab_merges_and_rank_files() {
    let work = Work::new();
    let hf = fixtures().join("hf");
    let tiktoken = fixtures().join("tiny.tiktoken");
    std::fs::write(work.path("t.txt"), "ab abc\n").unwrap();

    work.ok(&["convert", "-t", hf.to_str().unwrap(), "-o", "hf.json"]);
    let out = work.ok(&["encode", "-t", "hf.json", "-i", "t.txt", "--show-tokens", "--mode", "original"]);
    assert_eq!(out, "ab|␣|abc\n");
    let direct = work.ok(&["encode", "-t", hf.to_str().unwrap(), "-i", "t.txt", "--mode", "original"]);
    assert_eq!(direct, work.ok(&["encode", "-t", "hf.json", "-i", "t.txt", "--mode", "original"]));

    work.ok(&["convert", "-t", tiktoken.to_str().unwrap(), "-o", "tk.json"]);
    assert_eq!(work.json("tk.json")["flavor"], "rank_greedy");
    let out = work.ok(&["encode", "-t", "tk.json", "-i", "t.txt", "--show-tokens", "--mode", "original"]);
    assert_eq!(out, "ab|␣|abc\n");
}

#[test]
fn exit_codes() {
    let work = Work::analyzed();
    assert_eq!(work.code(&["analyze", "-t", "missing.json", "-c", "corpus.txt", "-o", "x.json"]), 1);
    assert_eq!(work.code(&["frobnicate"]), 2);
    std::fs::write(work.path("bad.json"), "{\"format\": \"litetoken-stats\"").unwrap();
    assert_eq!(work.code(&["identify", "-t", "model.json", "-s", "bad.json", "--preset", "standard"]), 3);
    std::fs::write(work.path("rows.jsonl"), "{\"body\": \"x\"}\n").unwrap();
    assert_eq!(work.code(&["analyze", "-t", "model.json", "-c", "rows.jsonl", "-o", "x.json"]), 3);
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_litetoken"))
        .args(["analyze", "-t", "model.json", "-c", "corpus.txt", "-o", "x.json"])
        .current_dir(work.dir.path())
        .env("LITETOKEN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    assert_eq!(
        work.code(&["analyze", "-t", "model.json", "-c", "corpus.txt", "--f2-mode", "tree", "--shard-index", "4", "--shard-count", "4", "-o", "x.json"]),
        2
    );
}

#[test]
fn jsonl_corpus_and_sampling() {
    let work = Work::analyzed();
    let rows: String = CORPUS
        .lines()
        .take(300)
        .map(|l| format!("{}\n", serde_json::json!({"id": 1, "content": l})))
        .collect();
    std::fs::write(work.path("c.jsonl"), rows).unwrap();
    work.ok(&["analyze", "-t", "model.json", "-c", "c.jsonl", "--text-field", "content", "-o", "j.json"]);
    assert_eq!(counters(&work.stats("j.json")), counters(&work.stats("stats.json")));

    let sample = ["analyze", "-t", "model.json", "-c", "corpus.txt", "--sample", "50", "--seed", "3", "-o"];
    work.ok(&[&sample[..], &["a.json"]].concat());
    work.ok(&[&sample[..], &["b.json"]].concat());
    assert_eq!(work.stats("a.json").total_docs, 50);
    assert_eq!(counters(&work.stats("a.json")), counters(&work.stats("b.json")));
}

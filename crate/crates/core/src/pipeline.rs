//! The one-shot reproduction driver: ingest → split → train → tune → eval →
//! report, with a manifest of every seed and artifact hash.
//!
//! Every stage writes its artifacts before the next stage starts, so a
//! failed run keeps its partial outputs and the manifest names the failed
//! stage. All randomness derives from the single run seed; two runs with the
//! same config produce byte-identical deterministic artifacts (timings live
//! in their own volatile file).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, NormalizationPolicy, SplitSpec};
use crate::embed::{
    build_training_stream, build_word_stream, train_skipgram, EmbeddingKind, SkipgramParams,
};
use crate::fusion::{tune_weights, FeatureCache, FusionWeights, HybridModels, ScoreMode};
use crate::harness::{
    self, corrupt_all, emit_report, emit_timings, eval_run, ocr_eval, CorruptParams, EvalReport,
    Method, RankContext, ReportFormat,
};
use crate::retrieval::build_pool;
use crate::seed;
use crate::strmetrics::{cer, chrf, levenshtein, ChrfParams};
use crate::subword::BpeModel;
use crate::synth::GroundTruth;
use crate::translit::{transliterate, GraphemeRuleSet, PhoneticTable, Romanizer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

/// Full run configuration. Defaults are the toolkit's standard operating
/// point: seed 42, pool 1000, BPE 2000, 200-dim vectors, window 5,
/// min_count 2, 10 epochs, k1 1.5 / b 0.75, word corruption 0.30,
/// character corruption 0.20, 1000 bootstrap iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub regime: String,
    pub pool_size: usize,
    pub tune_pool_size: usize,
    pub grid_step: f64,
    pub bpe_vocab: usize,
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub p_word: f64,
    pub p_char: f64,
    pub with_examples: bool,
    pub fold_yo: bool,
    /// Cap on evaluated queries (stress-regime diagnostics).
    pub query_limit: Option<usize>,
    pub jobs: usize,
    pub dump_pools: bool,
    /// Ground-truth rule file from the synthetic generator; wins over
    /// rule/exception TSV paths and over the shipped default tables.
    pub truth_file: Option<PathBuf>,
    pub rules_file: Option<PathBuf>,
    pub exceptions_file: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            out_dir: out_dir.into(),
            seed: 42,
            regime: "primary".to_string(),
            pool_size: 1000,
            tune_pool_size: 100,
            grid_step: 0.05,
            bpe_vocab: 2000,
            dim: 200,
            window: 5,
            min_count: 2,
            epochs: 10,
            p_word: 0.30,
            p_char: 0.20,
            with_examples: false,
            fold_yo: true,
            query_limit: None,
            jobs: 1,
            dump_pools: false,
            truth_file: None,
            rules_file: None,
            exceptions_file: None,
        }
    }

    /// Applies one `key=value` setting (config-file syntax).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad = |what: &str| PipelineError::Config(format!("{key}: {what}"));
        macro_rules! parse {
            () => {
                value.parse().map_err(|_| bad("unparseable value"))?
            };
        }
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse!(),
            "regime" => {
                if value != "primary" && value != "stress" {
                    return Err(bad("expected primary or stress"));
                }
                self.regime = value.to_string();
            }
            "pool_size" => self.pool_size = parse!(),
            "tune_pool_size" => self.tune_pool_size = parse!(),
            "grid_step" => self.grid_step = parse!(),
            "bpe_vocab" => self.bpe_vocab = parse!(),
            "dim" => self.dim = parse!(),
            "window" => self.window = parse!(),
            "min_count" => self.min_count = parse!(),
            "epochs" => self.epochs = parse!(),
            "p_word" => self.p_word = parse!(),
            "p_char" => self.p_char = parse!(),
            "with_examples" => self.with_examples = parse!(),
            "fold_yo" => self.fold_yo = parse!(),
            "query_limit" => self.query_limit = Some(parse!()),
            "jobs" => self.jobs = parse!(),
            "dump_pools" => self.dump_pools = parse!(),
            "truth_file" => self.truth_file = Some(PathBuf::from(value)),
            "rules_file" => self.rules_file = Some(PathBuf::from(value)),
            "exceptions_file" => self.exceptions_file = Some(PathBuf::from(value)),
            _ => return Err(bad("unknown key")),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn apply_config_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value", i + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn skipgram_params(&self) -> SkipgramParams {
        SkipgramParams {
            dim: self.dim,
            window: self.window,
            min_count: self.min_count,
            epochs: self.epochs,
            ..SkipgramParams::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

/// Run manifest: config echo, per-stage outcomes, derived seeds, and a hash
/// of every deterministic artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub split_sizes: (usize, usize, usize),
    pub reject_count: usize,
    pub dedupe_removed: usize,
    /// fnv1a-64 hex digests of deterministic artifacts, by file name.
    pub files: BTreeMap<String, String>,
    /// Files whose bytes vary run to run (timings).
    pub volatile_files: Vec<String>,
    pub failed_stage: Option<String>,
}

impl Manifest {
    fn new(config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            stages: Vec::new(),
            seeds: BTreeMap::new(),
            split_sizes: (0, 0, 0),
            reject_count: 0,
            dedupe_removed: 0,
            files: BTreeMap::new(),
            volatile_files: Vec::new(),
            failed_stage: None,
        }
    }
}

struct ArtifactWriter {
    dir: PathBuf,
}

impl ArtifactWriter {
    fn write(&self, manifest: &mut Manifest, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { path, source })?;
        manifest.files.insert(name.to_string(), format!("{:016x}", seed::fnv1a64(bytes)));
        Ok(())
    }

    fn write_volatile(
        &self,
        manifest: &mut Manifest,
        name: &str,
        bytes: &[u8],
    ) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { path, source })?;
        manifest.volatile_files.push(name.to_string());
        Ok(())
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) {
    let path = dir.join("manifest.json");
    if let Ok(mut text) = serde_json::to_string_pretty(manifest) {
        text.push('\n');
        let _ = fs::write(path, text);
    }
}

/// Runs the whole pipeline. On success the manifest lists every artifact
/// hash; on failure partial artifacts stay on disk and the manifest marks
/// the failed stage.
pub fn reproduce(config: &RunConfig) -> Result<Manifest, PipelineError> {
    let mut manifest = Manifest::new(config);
    fs::create_dir_all(&config.out_dir)
        .map_err(|source| PipelineError::Io { path: config.out_dir.clone(), source })?;
    let result = run_stages(config, &mut manifest);
    if let Err(e) = &result {
        if manifest.failed_stage.is_none() {
            manifest.failed_stage = Some(e.to_string());
        }
    }
    write_manifest(&config.out_dir, &manifest);
    result.map(|()| manifest)
}

fn run_stages(config: &RunConfig, manifest: &mut Manifest) -> Result<(), PipelineError> {
    let out = ArtifactWriter { dir: config.out_dir.clone() };
    let stage_ok = |manifest: &mut Manifest, name: &'static str, detail: String| {
        manifest.stages.push(StageRecord { name, ok: true, detail });
    };
    macro_rules! try_stage {
        ($name:literal, $manifest:expr, $expr:expr) => {
            match $expr {
                Ok(v) => v,
                Err(e) => {
                    let err = stage_err($name)(e);
                    $manifest.stages.push(StageRecord {
                        name: $name,
                        ok: false,
                        detail: err.to_string(),
                    });
                    $manifest.failed_stage = Some($name.to_string());
                    return Err(err);
                }
            }
        };
    }

    // ingest: parse, normalize, deduplicate
    let policy = try_stage!(
        "ingest",
        manifest,
        NormalizationPolicy::from_tables(
            config.fold_yo,
            include_str!("../data/persian_folds.tsv"),
            include_str!("../data/pos_labels.tsv"),
        )
    );
    let raw = try_stage!(
        "ingest",
        manifest,
        fs::read(&config.dataset).map_err(|e| format!("{}: {e}", config.dataset.display()))
    );
    let parsed = try_stage!("ingest", manifest, corpus::ingest(raw.as_slice(), &policy, None));
    let (entries, dedupe_report) = corpus::dedupe(&parsed.entries);
    manifest.reject_count = parsed.rejects.len();
    manifest.dedupe_removed = dedupe_report.removals.len();
    try_stage!(
        "ingest",
        manifest,
        out.write(manifest, "clean.jsonl", corpus::write_jsonl(&entries).as_bytes())
    );
    if !parsed.rejects.is_empty() {
        let mut text = String::new();
        for r in &parsed.rejects {
            text.push_str(&serde_json::to_string(r).expect("reject serializes"));
            text.push('\n');
        }
        try_stage!("ingest", manifest, out.write(manifest, "rejects.jsonl", text.as_bytes()));
    }
    stage_ok(
        manifest,
        "ingest",
        format!(
            "{} entries, {} rejects, {} deduplicated",
            entries.len(),
            parsed.rejects.len(),
            dedupe_report.removals.len()
        ),
    );

    // stats
    let table = corpus::stats(&entries);
    try_stage!("stats", manifest, out.write(manifest, "stats.csv", table.to_csv().as_bytes()));
    try_stage!("stats", manifest, out.write(manifest, "stats.md", table.to_markdown().as_bytes()));
    stage_ok(manifest, "stats", format!("{} records", table.records));

    // split
    let split_spec = SplitSpec { seed: config.seed, ..SplitSpec::default() };
    let split = try_stage!("split", manifest, corpus::split(&entries, &split_spec));
    manifest.split_sizes = (split.train.len(), split.dev.len(), split.test.len());
    manifest.seeds.insert("split".into(), config.seed);
    for (name, part) in
        [("train.jsonl", &split.train), ("dev.jsonl", &split.dev), ("test.jsonl", &split.test)]
    {
        try_stage!("split", manifest, out.write(manifest, name, corpus::write_jsonl(part).as_bytes()));
    }
    stage_ok(
        manifest,
        "split",
        format!("{}/{}/{}", split.train.len(), split.dev.len(), split.test.len()),
    );

    // bpe
    let bpe_corpus: Vec<String> = split
        .train
        .iter()
        .flat_map(|e| {
            let mut lines = vec![format!("{} {}", e.tajik, e.persian)];
            if config.with_examples {
                lines.extend(e.examples.iter().cloned());
            }
            lines
        })
        .collect();
    let bpe_seed = seed::mix(config.seed, 1);
    manifest.seeds.insert("bpe".into(), bpe_seed);
    let bpe = try_stage!("bpe", manifest, BpeModel::train(&bpe_corpus, config.bpe_vocab, bpe_seed));
    try_stage!("bpe", manifest, out.write(manifest, "bpe.model", bpe.to_text().as_bytes()));
    stage_ok(
        manifest,
        "bpe",
        format!("alphabet {}, merges {}", bpe.alphabet_len(), bpe.merge_count()),
    );

    // embeddings
    let params = config.skipgram_params();
    let wp_seed = seed::mix(config.seed, 2);
    let cn_seed = seed::mix(config.seed, 3);
    manifest.seeds.insert("embed_wordpiece".into(), wp_seed);
    manifest.seeds.insert("embed_charngram".into(), cn_seed);
    let wp_stream = build_training_stream(&split.train, &bpe, config.with_examples);
    let wordpiece = try_stage!(
        "embed",
        manifest,
        train_skipgram(&wp_stream, EmbeddingKind::Wordpiece, params, wp_seed)
    );
    drop(wp_stream);
    let cn_stream = build_word_stream(&split.train, config.with_examples);
    let charngram = try_stage!(
        "embed",
        manifest,
        train_skipgram(&cn_stream, EmbeddingKind::CharNgram, params, cn_seed)
    );
    drop(cn_stream);
    try_stage!("embed", manifest, out.write(manifest, "word2vec.vec", wordpiece.to_text().as_bytes()));
    try_stage!("embed", manifest, out.write(manifest, "charngram.vec", charngram.to_text().as_bytes()));
    stage_ok(
        manifest,
        "embed",
        format!("wordpiece units {}, char-ngram units {}", wordpiece.unit_count(), charngram.unit_count()),
    );

    // models shared below
    let rules = try_stage!("models", manifest, load_rules(config));
    let romanizer = Romanizer::default();
    let phonetic_tajik = PhoneticTable::default_tajik();
    let phonetic_persian = PhoneticTable::default_persian();
    let models = HybridModels {
        charngram: &charngram,
        wordpiece: &wordpiece,
        bpe: &bpe,
        rules: &rules,
        romanizer: &romanizer,
    };
    let universe: Vec<String> = {
        let set: BTreeSet<&String> = entries.iter().map(|e| &e.persian).collect();
        set.into_iter().cloned().collect()
    };
    let cache = FeatureCache::build(universe.iter().map(String::as_str), &models);
    stage_ok(manifest, "models", format!("universe {} persian forms", universe.len()));

    // tune on the development set with reduced pools
    let tune_seed = seed::mix(config.seed, 4);
    manifest.seeds.insert("tune".into(), tune_seed);
    let dev_queries: Vec<(String, crate::retrieval::CandidatePool)> = {
        let mut v = Vec::with_capacity(split.dev.len());
        for (i, e) in split.dev.iter().enumerate() {
            let pool = try_stage!(
                "tune",
                manifest,
                build_pool(&e.persian, &universe, config.tune_pool_size, tune_seed, i as u64)
            );
            v.push((e.tajik.clone(), pool));
        }
        v
    };
    let (weights, tuning_log) = try_stage!(
        "tune",
        manifest,
        tune_weights(&dev_queries, &models, ScoreMode::CrossScript, config.grid_step, Some(&cache))
    );
    if config.dump_pools {
        let mut text = String::new();
        for (_, pool) in &dev_queries {
            text.push_str(&serde_json::to_string(pool).expect("pool serializes"));
            text.push('\n');
        }
        try_stage!("tune", manifest, out.write(manifest, "tune_pools.jsonl", text.as_bytes()));
    }
    drop(dev_queries);
    let weights_json = {
        #[derive(Serialize)]
        struct WeightsFile<'a> {
            weights: &'a FusionWeights,
            grid_step: f64,
            dev_mrr: f64,
        }
        let mut s = serde_json::to_string_pretty(&WeightsFile {
            weights: &weights,
            grid_step: config.grid_step,
            dev_mrr: tuning_log.points[tuning_log.best_index].mrr,
        })
        .expect("weights serialize");
        s.push('\n');
        s
    };
    try_stage!("tune", manifest, out.write(manifest, "weights.json", weights_json.as_bytes()));
    try_stage!("tune", manifest, out.write(manifest, "tuning_log.csv", tuning_log.to_csv().as_bytes()));
    stage_ok(
        manifest,
        "tune",
        format!(
            "weights ({:.2}, {:.2}, {:.2}, {:.2}), dev MRR {:.4}",
            weights.alpha, weights.beta, weights.gamma, weights.delta,
            tuning_log.points[tuning_log.best_index].mrr
        ),
    );

    // retrieval evaluation over the test split
    let eval_seed = seed::mix(config.seed, 5);
    manifest.seeds.insert("eval".into(), eval_seed);
    let ctx = RankContext {
        models,
        weights,
        phonetic_tajik: &phonetic_tajik,
        phonetic_persian: &phonetic_persian,
        cache: Some(&cache),
        seed: eval_seed,
    };
    let mut pairs: Vec<(String, String)> =
        split.test.iter().map(|e| (e.tajik.clone(), e.persian.clone())).collect();
    if let Some(limit) = config.query_limit {
        pairs.truncate(limit);
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    for method in Method::ALL {
        let report = try_stage!(
            "eval",
            manifest,
            eval_run(
                method,
                &pairs,
                &universe,
                config.pool_size,
                eval_seed,
                &config.regime,
                &ctx,
                ScoreMode::CrossScript,
                config.jobs,
            )
        );
        reports.push(report);
    }
    try_stage!(
        "eval",
        manifest,
        out.write(manifest, "retrieval.csv", emit_report(&reports, ReportFormat::Csv).as_bytes())
    );
    try_stage!(
        "eval",
        manifest,
        out.write(manifest, "retrieval.md", emit_report(&reports, ReportFormat::Markdown).as_bytes())
    );
    try_stage!(
        "eval",
        manifest,
        out.write(manifest, "retrieval.json", emit_report(&reports, ReportFormat::Json).as_bytes())
    );
    try_stage!(
        "eval",
        manifest,
        out.write_volatile(manifest, "retrieval_timings.csv", emit_timings(&reports).as_bytes())
    );
    stage_ok(manifest, "eval", format!("{} methods × {} queries", reports.len(), pairs.len()));

    // rule transliteration quality over the test split
    let translit_report = translit_quality(&pairs, &rules, eval_seed);
    try_stage!(
        "translit_quality",
        manifest,
        out.write(manifest, "translit_quality.csv", translit_report.as_bytes())
    );
    stage_ok(manifest, "translit_quality", format!("{} pairs", pairs.len()));

    // OCR corruption and post-correction
    let ocr_seed = seed::mix(config.seed, 6);
    manifest.seeds.insert("ocr".into(), ocr_seed);
    let alphabet: Vec<char> = {
        let set: BTreeSet<char> = universe.iter().flat_map(|w| w.chars()).collect();
        set.into_iter().collect()
    };
    let test_words: Vec<String> = pairs.iter().map(|(_, gold)| gold.clone()).collect();
    let corrupt_params = CorruptParams { p_word: config.p_word, p_char: config.p_char };
    let (samples, corrupt_stats) = corrupt_all(&test_words, corrupt_params, &alphabet, ocr_seed);
    {
        let mut text = String::new();
        for s in &samples {
            text.push_str(&serde_json::to_string(s).expect("sample serializes"));
            text.push('\n');
        }
        try_stage!("ocr", manifest, out.write(manifest, "ocr_samples.jsonl", text.as_bytes()));
    }
    let mut ocr_reports: Vec<EvalReport> = Vec::new();
    for method in Method::ALL {
        let report = try_stage!(
            "ocr",
            manifest,
            ocr_eval(method, &samples, &universe, config.pool_size, ocr_seed, &ctx, config.jobs)
        );
        ocr_reports.push(report);
    }
    try_stage!(
        "ocr",
        manifest,
        out.write(manifest, "ocr.csv", emit_report(&ocr_reports, ReportFormat::Csv).as_bytes())
    );
    try_stage!(
        "ocr",
        manifest,
        out.write(manifest, "ocr.md", emit_report(&ocr_reports, ReportFormat::Markdown).as_bytes())
    );
    try_stage!(
        "ocr",
        manifest,
        out.write_volatile(manifest, "ocr_timings.csv", emit_timings(&ocr_reports).as_bytes())
    );
    stage_ok(
        manifest,
        "ocr",
        format!(
            "selected rate {:.3}, char edit rate {:.3}",
            corrupt_stats.selected_rate(),
            corrupt_stats.char_edit_rate()
        ),
    );

    Ok(())
}

fn load_rules(config: &RunConfig) -> Result<GraphemeRuleSet, String> {
    if let Some(truth_path) = &config.truth_file {
        let text = fs::read_to_string(truth_path)
            .map_err(|e| format!("{}: {e}", truth_path.display()))?;
        let truth: GroundTruth =
            serde_json::from_str(&text).map_err(|e| format!("bad truth file: {e}"))?;
        return Ok(truth.rule_set());
    }
    match (&config.rules_file, &config.exceptions_file) {
        (Some(rules_path), exceptions) => {
            let rules_text = fs::read_to_string(rules_path)
                .map_err(|e| format!("{}: {e}", rules_path.display()))?;
            let exceptions_text = match exceptions {
                Some(p) => {
                    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?
                }
                None => String::new(),
            };
            GraphemeRuleSet::from_tsv(&rules_text, &exceptions_text, "custom")
                .map_err(|e| e.to_string())
        }
        (None, _) => Ok(GraphemeRuleSet::default_tajik_persian()),
    }
}

/// Character-level transliteration quality of the rule engine: per-pair CER
/// and chrF macro averages with bootstrap CIs, plus corpus-level aggregates.
pub fn translit_quality(pairs: &[(String, String)], rules: &GraphemeRuleSet, run_seed: u64) -> String {
    let chrf_params = ChrfParams::default();
    let mut cers = Vec::with_capacity(pairs.len());
    let mut chrfs = Vec::with_capacity(pairs.len());
    let mut dist_sum = 0usize;
    let mut ref_len_sum = 0usize;
    for (query, gold) in pairs {
        let hyp = transliterate(rules, query);
        cers.push(cer(&hyp, gold));
        chrfs.push(chrf(&hyp, gold, chrf_params));
        dist_sum += levenshtein(&hyp, gold);
        ref_len_sum += gold.chars().count();
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let ci = |v: &[f64], tag: u64| {
        harness::bootstrap_ci(
            v,
            harness::BOOTSTRAP_ITERATIONS,
            harness::BOOTSTRAP_ALPHA,
            seed::mix(run_seed, tag),
        )
        .unwrap_or((0.0, 0.0))
    };
    let (cer_lo, cer_hi) = ci(&cers, 301);
    let (chrf_lo, chrf_hi) = ci(&chrfs, 302);
    let corpus_cer = dist_sum as f64 / ref_len_sum.max(1) as f64;
    let mut out = String::from(
        "method,n_pairs,cer_macro,cer_lo,cer_hi,cer_corpus,chrf_macro,chrf_lo,chrf_hi\n",
    );
    out.push_str(&format!(
        "rule,{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
        pairs.len(),
        mean(&cers),
        cer_lo,
        cer_hi,
        corpus_cer,
        mean(&chrfs),
        chrf_lo,
        chrf_hi,
    ));
    out
}

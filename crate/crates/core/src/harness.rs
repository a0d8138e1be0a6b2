//! Evaluation harness: retrieval metrics, bootstrap confidence intervals,
//! OCR corruption and post-correction evaluation, timing and peak-memory
//! measurement, and report emission.
//!
//! Reports are split into a deterministic part (metrics, seeds, version) and
//! a volatile part (wall-clock seconds, peak memory). Identical runs produce
//! byte-identical metric reports; timings go to their own file.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{
    hybrid_rank, FeatureCache, FusionWeights, HybridModels, ScoreMode,
};
use crate::retrieval::{
    bm25_rank, build_pool, edit_rank, phonetic_rank, random_rank, rule_rank, Bm25Index,
    CandidatePool, RankedList, RetrievalError,
};
use crate::seed;
use crate::strmetrics::norm_sim;
use crate::translit::{PhoneticTable, Script};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need one ranked list per gold: {lists} lists vs {golds} golds")]
    LengthMismatch { lists: usize, golds: usize },
    #[error("cannot bootstrap an empty sample")]
    EmptySample,
    #[error("unknown report format {0:?} (expected csv, markdown, or json)")]
    UnknownFormat(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Per-query retrieval quality over a batch of ranked lists.
#[derive(Debug, Clone)]
pub struct RankMetrics {
    /// Acc@k for each requested k.
    pub acc: BTreeMap<usize, f64>,
    pub mrr: f64,
    /// 1/rank per query (0 when gold is absent from its list).
    pub reciprocal_ranks: Vec<f64>,
    /// Per-query 0/1 hit indicators for each k, in query order.
    pub hits: BTreeMap<usize, Vec<f64>>,
}

/// Acc@k and MRR with per-query values preserved for bootstrapping.
pub fn rank_metrics(
    ranked_lists: &[RankedList],
    golds: &[String],
    ks: &[usize],
) -> Result<RankMetrics, HarnessError> {
    if ranked_lists.len() != golds.len() {
        return Err(HarnessError::LengthMismatch {
            lists: ranked_lists.len(),
            golds: golds.len(),
        });
    }
    let ranks: Vec<Option<usize>> = ranked_lists
        .iter()
        .zip(golds)
        .map(|(list, gold)| list.rank_of(gold))
        .collect();
    Ok(metrics_from_ranks(&ranks, ks))
}

/// The single formula path behind every metric computation: per-query gold
/// ranks in, Acc@k / MRR and their per-query vectors out.
pub fn metrics_from_ranks(ranks: &[Option<usize>], ks: &[usize]) -> RankMetrics {
    let n = ranks.len().max(1);
    let mut reciprocal_ranks = Vec::with_capacity(ranks.len());
    let mut hits: BTreeMap<usize, Vec<f64>> =
        ks.iter().map(|&k| (k, Vec::with_capacity(ranks.len()))).collect();
    for rank in ranks {
        reciprocal_ranks.push(rank.map_or(0.0, |r| 1.0 / r as f64));
        for (&k, v) in hits.iter_mut() {
            v.push(match rank {
                Some(r) if *r <= k => 1.0,
                _ => 0.0,
            });
        }
    }
    let acc = hits.iter().map(|(&k, v)| (k, v.iter().sum::<f64>() / n as f64)).collect();
    let mrr = reciprocal_ranks.iter().sum::<f64>() / n as f64;
    RankMetrics { acc, mrr, reciprocal_ranks, hits }
}

/// Percentile bootstrap CI for the mean: resample with replacement
/// `iterations` times and take the alpha/2 and 1-alpha/2 percentiles.
pub fn bootstrap_ci(
    values: &[f64],
    iterations: usize,
    alpha: f64,
    boot_seed: u64,
) -> Result<(f64, f64), HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptySample);
    }
    let mut rng = seed::rng(boot_seed);
    let n = values.len();
    let mut means = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.random_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    let lo_idx = ((alpha / 2.0) * iterations as f64) as usize;
    let hi_idx = (((1.0 - alpha / 2.0) * iterations as f64) as usize).min(iterations - 1);
    Ok((means[lo_idx], means[hi_idx]))
}

/// One recorded character edit, indexed against the original word's
/// character positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Substitute { index: usize, with: char },
    Delete { index: usize },
    InsertAfter { index: usize, ch: char },
}

/// A corrupted word together with the operations that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrSample {
    pub original: String,
    pub corrupted: String,
    pub ops: Vec<EditOp>,
}

impl OcrSample {
    /// Reapplies the recorded operations; always reconstructs `corrupted`.
    pub fn replay(&self) -> String {
        apply_ops(&self.original, &self.ops)
    }
}

pub fn apply_ops(original: &str, ops: &[EditOp]) -> String {
    let mut out = String::with_capacity(original.len() + ops.len());
    for (i, c) in original.chars().enumerate() {
        let op = ops.iter().find(|op| match op {
            EditOp::Substitute { index, .. }
            | EditOp::Delete { index }
            | EditOp::InsertAfter { index, .. } => *index == i,
        });
        match op {
            Some(EditOp::Substitute { with, .. }) => out.push(*with),
            Some(EditOp::Delete { .. }) => {}
            Some(EditOp::InsertAfter { ch, .. }) => {
                out.push(c);
                out.push(*ch);
            }
            None => out.push(c),
        }
    }
    out
}

/// Per-character noise: with probability `p_char` a character undergoes one
/// operation chosen uniformly among substitution (with a different alphabet
/// character), deletion, or insertion of a random character after it.
/// At most one operation per character position.
pub fn apply_char_noise(
    word: &str,
    p_char: f64,
    alphabet: &[char],
    rng: &mut rand_pcg::Pcg64,
) -> Vec<EditOp> {
    let mut ops = Vec::new();
    for (i, c) in word.chars().enumerate() {
        if rng.random::<f64>() >= p_char {
            continue;
        }
        match rng.random_range(0..3u8) {
            0 => {
                // substitute with a random alphabet character != original
                let mut with = alphabet[rng.random_range(0..alphabet.len())];
                let mut guard = 0;
                while with == c && alphabet.len() > 1 && guard < 64 {
                    with = alphabet[rng.random_range(0..alphabet.len())];
                    guard += 1;
                }
                ops.push(EditOp::Substitute { index: i, with });
            }
            1 => ops.push(EditOp::Delete { index: i }),
            _ => ops.push(EditOp::InsertAfter {
                index: i,
                ch: alphabet[rng.random_range(0..alphabet.len())],
            }),
        }
    }
    ops
}

/// OCR noise parameters: word selection and per-character edit rates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorruptParams {
    pub p_word: f64,
    pub p_char: f64,
}

impl Default for CorruptParams {
    fn default() -> Self {
        Self { p_word: 0.30, p_char: 0.20 }
    }
}

/// Corrupts one word: with probability `p_word` the word is selected and its
/// characters are put through [`apply_char_noise`]; unselected words pass
/// through unchanged. Deterministic in (word, seed).
pub fn corrupt(word: &str, params: CorruptParams, alphabet: &[char], word_seed: u64) -> OcrSample {
    let mut rng = seed::rng(word_seed);
    let ops = if rng.random::<f64>() < params.p_word {
        apply_char_noise(word, params.p_char, alphabet, &mut rng)
    } else {
        Vec::new()
    };
    let corrupted = apply_ops(word, &ops);
    OcrSample { original: word.to_string(), corrupted, ops }
}

/// Rate instrumentation for a corruption run. A word selected by the coin
/// flip that received zero edits stays clean and counts as unselected.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CorruptStats {
    pub words: u64,
    pub changed_words: u64,
    pub chars_in_changed: u64,
    pub edits_in_changed: u64,
}

impl CorruptStats {
    pub fn selected_rate(&self) -> f64 {
        self.changed_words as f64 / self.words.max(1) as f64
    }

    pub fn char_edit_rate(&self) -> f64 {
        self.edits_in_changed as f64 / self.chars_in_changed.max(1) as f64
    }
}

/// Corrupts a word list with per-word seeds derived from (run_seed, index).
pub fn corrupt_all(
    words: &[String],
    params: CorruptParams,
    alphabet: &[char],
    run_seed: u64,
) -> (Vec<OcrSample>, CorruptStats) {
    let mut stats = CorruptStats::default();
    let samples = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let sample = corrupt(w, params, alphabet, seed::mix(run_seed, i as u64));
            stats.words += 1;
            if !sample.ops.is_empty() {
                stats.changed_words += 1;
                stats.chars_in_changed += w.chars().count() as u64;
                stats.edits_in_changed += sample.ops.len() as u64;
            }
            sample
        })
        .collect();
    (samples, stats)
}

/// The rankers the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Random,
    Edit,
    Rule,
    Phonetic,
    Bm25,
    Word2vec,
    Fasttext,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Random,
        Method::Edit,
        Method::Rule,
        Method::Phonetic,
        Method::Bm25,
        Method::Word2vec,
        Method::Fasttext,
        Method::Hybrid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Edit => "edit",
            Method::Rule => "rule",
            Method::Phonetic => "phonetic",
            Method::Bm25 => "bm25",
            Method::Word2vec => "word2vec",
            Method::Fasttext => "fasttext",
            Method::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        Method::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| HarnessError::UnknownMethod(s.to_string()))
    }
}

/// Shared model context for ranking.
pub struct RankContext<'a> {
    pub models: HybridModels<'a>,
    pub weights: FusionWeights,
    pub phonetic_tajik: &'a PhoneticTable,
    pub phonetic_persian: &'a PhoneticTable,
    pub cache: Option<&'a FeatureCache>,
    pub seed: u64,
}

/// Direct string-similarity ranking, used for the rule component when query
/// and candidates already share a script (OCR correction).
fn direct_rank(query: &str, pool: &CandidatePool) -> RankedList {
    let entries =
        pool.candidates().map(|c| (c.to_string(), norm_sim(query, c))).collect();
    RankedList::new(pool.query_id, "rule", entries)
}

/// Ranks one pool with the chosen method. `mode` picks the cross-script
/// retrieval signals or the within-Persian OCR signals.
pub fn rank_with(
    method: Method,
    query: &str,
    pool: &CandidatePool,
    ctx: &RankContext,
    mode: ScoreMode,
) -> RankedList {
    let query_script = match mode {
        ScoreMode::CrossScript => Script::Tajik,
        ScoreMode::PersianToPersian => Script::Persian,
    };
    match method {
        Method::Random => random_rank(pool, ctx.seed),
        Method::Edit => edit_rank(query, query_script, pool, ctx.models.romanizer),
        Method::Rule => match mode {
            ScoreMode::CrossScript => rule_rank(query, pool, ctx.models.rules),
            ScoreMode::PersianToPersian => direct_rank(query, pool),
        },
        Method::Phonetic => {
            let query_table = match mode {
                ScoreMode::CrossScript => ctx.phonetic_tajik,
                ScoreMode::PersianToPersian => ctx.phonetic_persian,
            };
            phonetic_rank(query, pool, query_table, ctx.phonetic_persian)
        }
        Method::Bm25 => {
            let index =
                Bm25Index::build(pool.candidates(), ctx.models.romanizer, Script::Persian);
            bm25_rank(&index, query, query_script, ctx.models.romanizer, pool.query_id)
        }
        Method::Word2vec => {
            hybrid_rank(query, pool, &ctx.models, &FusionWeights::corner(1), mode, ctx.cache)
        }
        Method::Fasttext => {
            hybrid_rank(query, pool, &ctx.models, &FusionWeights::corner(0), mode, ctx.cache)
        }
        Method::Hybrid => hybrid_rank(query, pool, &ctx.models, &ctx.weights, mode, ctx.cache),
    }
}

/// A full per-method evaluation report in the shape of the result tables.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub regime: String,
    pub n_queries: usize,
    pub pool_size: usize,
    pub acc1: f64,
    pub acc1_ci: (f64, f64),
    pub acc5: f64,
    pub acc5_ci: (f64, f64),
    pub acc10: f64,
    pub acc10_ci: (f64, f64),
    pub mrr: f64,
    pub mrr_ci: (f64, f64),
    /// Volatile: excluded from serialized reports, emitted via
    /// [`emit_timings`] instead.
    #[serde(skip)]
    pub wall_secs: f64,
    /// Volatile, like `wall_secs`.
    #[serde(skip)]
    pub peak_mem_mb: f64,
    pub seed: u64,
    pub version: String,
}

pub const BOOTSTRAP_ITERATIONS: usize = 1000;
pub const BOOTSTRAP_ALPHA: f64 = 0.05;

/// Evaluates a method over (query, gold) pairs with per-query pools sampled
/// from `universe`. Pools derive only from (seed, query index), so the same
/// inputs always produce the same report — including under `jobs > 1`, which
/// fans independent queries out across threads (wall-clock timings are then
/// not comparable to single-threaded runs).
#[allow(clippy::too_many_arguments)]
pub fn eval_run(
    method: Method,
    pairs: &[(String, String)],
    universe: &[String],
    pool_size: usize,
    run_seed: u64,
    regime: &str,
    ctx: &RankContext,
    mode: ScoreMode,
    jobs: usize,
) -> Result<EvalReport, HarnessError> {
    reset_peak_memory();
    let started = Instant::now();
    // Only the gold rank per query is kept; ranked lists are dropped as they
    // stream through, which keeps full-pool evaluations inside a small
    // memory envelope.
    let rank_one = |i: usize, query: &str, gold: &str| -> Result<Option<usize>, RetrievalError> {
        let pool = build_pool(gold, universe, pool_size, run_seed, i as u64)?;
        Ok(rank_with(method, query, &pool, ctx, mode).rank_of(gold))
    };
    let ranks: Vec<Option<usize>> = if jobs <= 1 {
        let mut ranks = Vec::with_capacity(pairs.len());
        for (i, (query, gold)) in pairs.iter().enumerate() {
            ranks.push(rank_one(i, query, gold)?);
        }
        ranks
    } else {
        let chunk = pairs.len().div_ceil(jobs).max(1);
        let chunks: Vec<Vec<Result<Option<usize>, RetrievalError>>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = pairs
                    .chunks(chunk)
                    .enumerate()
                    .map(|(t, slice)| {
                        let rank_one = &rank_one;
                        scope.spawn(move || {
                            slice
                                .iter()
                                .enumerate()
                                .map(|(off, (query, gold))| {
                                    rank_one(t * chunk + off, query, gold)
                                })
                                .collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect()
            });
        let mut results = Vec::with_capacity(pairs.len());
        for c in chunks {
            results.extend(c);
        }
        results.into_iter().collect::<Result<_, _>>()?
    };
    let wall_secs = started.elapsed().as_secs_f64();
    let peak_mem_mb = peak_memory_mb().unwrap_or(0.0);

    let metrics = metrics_from_ranks(&ranks, &[1, 5, 10]);
    report_from_metrics(
        method.as_str(),
        regime,
        pairs.len(),
        pool_size,
        &metrics,
        wall_secs,
        peak_mem_mb,
        run_seed,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn report_from_metrics(
    method: &str,
    regime: &str,
    n_queries: usize,
    pool_size: usize,
    metrics: &RankMetrics,
    wall_secs: f64,
    peak_mem_mb: f64,
    run_seed: u64,
) -> Result<EvalReport, HarnessError> {
    let boot = |values: &[f64], tag: u64| {
        bootstrap_ci(values, BOOTSTRAP_ITERATIONS, BOOTSTRAP_ALPHA, seed::mix(run_seed, tag))
    };
    Ok(EvalReport {
        method: method.to_string(),
        regime: regime.to_string(),
        n_queries,
        pool_size,
        acc1: metrics.acc[&1],
        acc1_ci: boot(&metrics.hits[&1], 101)?,
        acc5: metrics.acc[&5],
        acc5_ci: boot(&metrics.hits[&5], 105)?,
        acc10: metrics.acc[&10],
        acc10_ci: boot(&metrics.hits[&10], 110)?,
        mrr: metrics.mrr,
        mrr_ci: boot(&metrics.reciprocal_ranks, 200)?,
        wall_secs,
        peak_mem_mb,
        seed: run_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// OCR post-correction evaluation: each corrupted form queries a pool of
/// clean Persian candidates whose gold is the original form.
pub fn ocr_eval(
    method: Method,
    samples: &[OcrSample],
    universe: &[String],
    pool_size: usize,
    run_seed: u64,
    ctx: &RankContext,
    jobs: usize,
) -> Result<EvalReport, HarnessError> {
    let pairs: Vec<(String, String)> =
        samples.iter().map(|s| (s.corrupted.clone(), s.original.clone())).collect();
    eval_run(
        method,
        &pairs,
        universe,
        pool_size,
        run_seed,
        "ocr",
        ctx,
        ScoreMode::PersianToPersian,
        jobs,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::UnknownFormat(other.to_string())),
        }
    }
}

fn ci(v: (f64, f64)) -> String {
    format!("[{:.3}, {:.3}]", v.0, v.1)
}

/// Renders the deterministic metric report: stable column order, metrics at
/// three decimals, seed and version included. Wall-clock and memory are
/// deliberately left to [`emit_timings`] so identical runs emit identical
/// bytes here.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(
                "method,regime,n_queries,pool_size,acc1,acc1_lo,acc1_hi,acc5,acc5_lo,acc5_hi,acc10,acc10_lo,acc10_hi,mrr,mrr_lo,mrr_hi,seed,version\n",
            );
            for r in reports {
                out.push_str(&format!(
                    "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{}\n",
                    r.method,
                    r.regime,
                    r.n_queries,
                    r.pool_size,
                    r.acc1,
                    r.acc1_ci.0,
                    r.acc1_ci.1,
                    r.acc5,
                    r.acc5_ci.0,
                    r.acc5_ci.1,
                    r.acc10,
                    r.acc10_ci.0,
                    r.acc10_ci.1,
                    r.mrr,
                    r.mrr_ci.0,
                    r.mrr_ci.1,
                    r.seed,
                    r.version
                ));
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| method | acc@1 | acc@5 | acc@10 | mrr |\n|---|---|---|---|---|\n",
            );
            for r in reports {
                out.push_str(&format!(
                    "| {} | {:.3} {} | {:.3} {} | {:.3} {} | {:.3} {} |\n",
                    r.method,
                    r.acc1,
                    ci(r.acc1_ci),
                    r.acc5,
                    ci(r.acc5_ci),
                    r.acc10,
                    ci(r.acc10_ci),
                    r.mrr,
                    ci(r.mrr_ci),
                ));
            }
            out.push_str(&format!(
                "\nqueries: {}, pool: {}, seed: {}, version: {}\n",
                reports.first().map_or(0, |r| r.n_queries),
                reports.first().map_or(0, |r| r.pool_size),
                reports.first().map_or(0, |r| r.seed),
                reports.first().map_or("", |r| r.version.as_str()),
            ));
            out
        }
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                #[serde(flatten)]
                report: &'a EvalReport,
            }
            let rows: Vec<Row> = reports.iter().map(|r| Row { report: r }).collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

/// Volatile measurements: wall-clock seconds and peak memory per method.
pub fn emit_timings(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,regime,wall_secs,peak_mem_mb\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.3},{:.1}\n",
            r.method, r.regime, r.wall_secs, r.peak_mem_mb
        ));
    }
    out
}

/// Opens a fresh peak-memory measurement window (Linux, best effort):
/// returns freed allocator arenas to the kernel so earlier phases do not
/// count against the upcoming call, then resets the RSS high-water mark.
/// Where either step is unsupported the measurement is an over-estimate.
pub fn reset_peak_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        libc::malloc_trim(0);
    }
    let _ = std::fs::write("/proc/self/clear_refs", b"5");
}

/// Process peak RSS in MB from /proc/self/status (VmHWM). Kernels that do
/// not report a high-water mark fall back to the current RSS, which right
/// after an evaluated call is a close stand-in for its peak.
pub fn peak_memory_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let mut rss = None;
    for line in status.lines() {
        let parse = |rest: &str| rest.trim().trim_end_matches("kB").trim().parse::<f64>().ok();
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return parse(rest).map(|kb| kb / 1024.0);
        }
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            rss = parse(rest).map(|kb| kb / 1024.0);
        }
    }
    rss
}

//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The synthetic generator provides ground truth for the end-to-end
//! retrieval criteria; string metrics and BM25 are checked against
//! independent oracles; determinism, noise statistics, bootstrap behavior,
//! and the efficiency envelope are asserted at the stated tolerances.
//!
//! Timing- and memory-sensitive criteria need the process to themselves, so
//! every test serializes on one lock.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use unicode_normalization::UnicodeNormalization;

use crosslex_core::corpus::{self, SplitSpec};
use crosslex_core::embed::{
    build_training_stream, build_word_stream, train_skipgram, EmbeddingKind, SkipgramParams,
};
use crosslex_core::fusion::{tune_weights, FusionWeights, HybridModels, ScoreMode};
use crosslex_core::harness::{
    bootstrap_ci, corrupt_all, eval_run, metrics_from_ranks, CorruptParams, Method, RankContext,
};
use crosslex_core::pipeline::{reproduce, RunConfig};
use crosslex_core::retrieval::{build_pool, bm25_rank, random_rank, rule_rank, Bm25Index};
use crosslex_core::strmetrics::{cer, chrf, levenshtein, ChrfParams};
use crosslex_core::subword::BpeModel;
use crosslex_core::synth::{gen_lexicon, GroundTruth, SynthParams};
use crosslex_core::translit::{PhoneticTable, Romanizer, Script};
use crosslex_core::{seed, LexiconEntry};

fn serial() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(std::sync::PoisonError::into_inner)
}

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

fn persian_forms(entries: &[LexiconEntry]) -> Vec<String> {
    entries.iter().map(|e| e.persian.clone()).collect()
}

/// Criterion 1 — zero-noise synthetic oracle: the rule ranker retrieves
/// every dev gold at rank 1 over full 1,000-distractor pools, in under 60 s
/// single-threaded.
#[test]
fn acceptance_01_oracle_retrieval() {
    let _guard = serial();
    let started = Instant::now();

    let params = SynthParams { n_pairs: 10_000, seed: 42, ..SynthParams::default() };
    let (entries, truth) = gen_lexicon(&params).expect("generation");
    let rules = truth.rule_set();
    let split = corpus::split(&entries, &SplitSpec::default()).expect("split");
    assert_eq!(split.dev.len(), 1000);

    let universe = persian_forms(&entries);
    let mut ranks = Vec::with_capacity(split.dev.len());
    for (i, e) in split.dev.iter().enumerate() {
        let pool = build_pool(&e.persian, &universe, 1000, 42, i as u64).expect("pool");
        assert_eq!(pool.len(), 1001);
        ranks.push(rule_rank(&e.tajik, &pool, &rules).rank_of(&e.persian));
    }
    let metrics = metrics_from_ranks(&ranks, &[1, 5, 10]);
    assert_eq!(metrics.acc[&1], 1.0, "rule ranker must be a perfect oracle at zero noise");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "oracle retrieval took {elapsed:.1} s, budget 60 s");
    pass(
        "criterion 1 (oracle retrieval)",
        format!("Acc@1 = 1.000 over 1000 dev queries x pool 1000 in {elapsed:.1} s"),
    );
}

struct TrainedStack {
    entries: Vec<LexiconEntry>,
    truth: GroundTruth,
    split: corpus::SplitOutcome,
    bpe: BpeModel,
    wordpiece: crosslex_core::embed::EmbeddingModel,
    charngram: crosslex_core::embed::EmbeddingModel,
}

fn train_stack(params: &SynthParams, bpe_vocab: usize, sg: SkipgramParams) -> TrainedStack {
    let (entries, truth) = gen_lexicon(params).expect("generation");
    let split = corpus::split(&entries, &SplitSpec::default()).expect("split");
    let corpus_lines: Vec<String> =
        split.train.iter().map(|e| format!("{} {}", e.tajik, e.persian)).collect();
    let bpe = BpeModel::train(&corpus_lines, bpe_vocab, seed::mix(params.seed, 1)).expect("bpe");
    let wp_stream = build_training_stream(&split.train, &bpe, false);
    let wordpiece = train_skipgram(&wp_stream, EmbeddingKind::Wordpiece, sg, seed::mix(params.seed, 2))
        .expect("wordpiece training");
    let cn_stream = build_word_stream(&split.train, false);
    let charngram = train_skipgram(&cn_stream, EmbeddingKind::CharNgram, sg, seed::mix(params.seed, 3))
        .expect("charngram training");
    TrainedStack { entries, truth, split, bpe, wordpiece, charngram }
}

/// Criterion 2 — tuned-hybrid dominance: the grid optimum's dev MRR is at
/// least every single-component corner's dev MRR, on zero-noise and
/// 15%-noise synthetic runs.
#[test]
fn acceptance_02_hybrid_dominance() {
    let _guard = serial();
    for noise_rate in [0.0, 0.15] {
        let params = SynthParams { n_pairs: 3000, noise_rate, seed: 11, ..SynthParams::default() };
        let sg = SkipgramParams { dim: 32, epochs: 2, ..SkipgramParams::default() };
        let stack = train_stack(&params, 400, sg);
        let rules = stack.truth.rule_set();
        let romanizer = Romanizer::default();
        let models = HybridModels {
            charngram: &stack.charngram,
            wordpiece: &stack.wordpiece,
            bpe: &stack.bpe,
            rules: &rules,
            romanizer: &romanizer,
        };
        let universe = persian_forms(&stack.entries);
        let dev: Vec<(String, crosslex_core::CandidatePool)> = stack
            .split
            .dev
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let pool = build_pool(&e.persian, &universe, 30, 5, i as u64).expect("pool");
                (e.tajik.clone(), pool)
            })
            .collect();
        let (weights, log) =
            tune_weights(&dev, &models, ScoreMode::CrossScript, 0.05, None).expect("tuning");
        let best_mrr = log.points[log.best_index].mrr;
        for component in 0..4 {
            let corner = FusionWeights::corner(component).as_array();
            let corner_mrr = log
                .points
                .iter()
                .find(|p| p.weights.as_array() == corner)
                .expect("grid contains every corner")
                .mrr;
            assert!(
                best_mrr >= corner_mrr,
                "noise {noise_rate}: tuned MRR {best_mrr} < corner {component} MRR {corner_mrr}"
            );
        }
        pass(
            "criterion 2 (hybrid dominance)",
            format!(
                "noise {:.2}: tuned dev MRR {:.4} >= all corners (weights {:.2}/{:.2}/{:.2}/{:.2})",
                noise_rate, best_mrr, weights.alpha, weights.beta, weights.gamma, weights.delta
            ),
        );
    }
}

/// Independent full-matrix Levenshtein, separate from the production
/// implementation.
#[allow(clippy::needless_range_loop)] // deliberately naive oracle
fn lev_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.nfc().collect();
    let b: Vec<char> = b.nfc().collect();
    let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        m[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = m[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            m[i][j] = sub.min(m[i - 1][j] + 1).min(m[i][j - 1] + 1);
        }
    }
    m[a.len()][b.len()]
}

/// Independently structured chrF reference (sorted-vector counting).
fn chrf_oracle(hyp: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    fn grams(s: &str, n: usize) -> Vec<String> {
        let cs: Vec<char> = s.nfc().filter(|c| !c.is_whitespace()).collect();
        if cs.len() < n {
            return Vec::new();
        }
        let mut out: Vec<String> = (0..=cs.len() - n).map(|i| cs[i..i + n].iter().collect()).collect();
        out.sort();
        out
    }
    let b2 = beta * beta;
    let mut scores = Vec::new();
    for n in 1..=max_n {
        let rg = grams(reference, n);
        if rg.is_empty() {
            continue;
        }
        let hg = grams(hyp, n);
        let (mut i, mut j, mut overlap) = (0usize, 0usize, 0usize);
        while i < hg.len() && j < rg.len() {
            match hg[i].cmp(&rg[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    overlap += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        scores.push(if overlap == 0 {
            0.0
        } else {
            let p = overlap as f64 / hg.len() as f64;
            let r = overlap as f64 / rg.len() as f64;
            (1.0 + b2) * p * r / (b2 * p + r)
        });
    }
    if scores.is_empty() {
        let hyp_empty = hyp.nfc().filter(|c| !c.is_whitespace()).count() == 0;
        return if hyp_empty { 1.0 } else { 0.0 };
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Criterion 3 — metric oracles: Levenshtein/CER agree exactly with the
/// independent DP oracle on 200 random Unicode pairs; chrF agrees with the
/// independent reference within 1e-9 on a fixed 50-pair vector set.
#[test]
fn acceptance_03_metric_oracles() {
    let _guard = serial();
    let pools: Vec<Vec<char>> = vec![
        "abcdef".chars().collect(),
        "абвгдеё".chars().collect(),
        "ابپتثج".chars().collect(),
        "一二三四".chars().collect(),
        "xo\u{0304}\u{0308}e".chars().collect(), // combining marks
    ];
    let mut rng = seed::rng(1234);
    let random_word = |rng: &mut rand_pcg::Pcg64| -> String {
        let pool = &pools[rng.random_range(0..pools.len())];
        let len = rng.random_range(0..14);
        (0..len).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    };
    for _ in 0..200 {
        let a = random_word(&mut rng);
        let b = random_word(&mut rng);
        let expected = lev_oracle(&a, &b);
        assert_eq!(levenshtein(&a, &b), expected, "{a:?} vs {b:?}");
        let ref_len = b.nfc().count().max(1);
        let expected_cer = expected as f64 / ref_len as f64;
        assert!(
            (cer(&a, &b) - expected_cer).abs() < 1e-15,
            "CER mismatch on {a:?} vs {b:?}"
        );
    }

    let words = [
        "об", "آب", "kitab", "китоб", "کتاب", "дарё", "дарьё", "abcabc", "xyz", "a", "",
        "мактаб", "مکتب", "talk", "walk", "салом", "سلام", "hello world", "helloworld",
        "шаҳр", "шахр", "şehir", "aaaa", "aaab", "середина", "mavj мавҷ",
    ];
    let p = ChrfParams::default();
    let mut pairs_checked = 0;
    for (i, h) in words.iter().enumerate() {
        for r in words.iter().skip(i).take(2) {
            let got = chrf(h, r, p);
            let want = chrf_oracle(h, r, 6, 2.0);
            assert!((got - want).abs() < 1e-9, "chrf({h:?},{r:?}): {got} vs {want}");
            pairs_checked += 1;
        }
    }
    assert!(pairs_checked >= 50);
    pass(
        "criterion 3 (metric oracles)",
        format!("200 random pairs exact, {pairs_checked} chrF vectors within 1e-9"),
    );
}

/// Criterion 4 — BM25 hand oracle: a three-document toy index matches the
/// manual computation with k1=1.5, b=0.75, idf = ln((N-df+0.5)/(df+0.5)+1),
/// within 1e-9.
#[test]
fn acceptance_04_bm25_hand_oracle() {
    let _guard = serial();
    // Documents "abcd", "abce", "xyz" (ASCII romanizes to itself), query
    // "abcd". Single-# padded trigrams give documents of length 4, 4, 3;
    // avgdl = 11/3; query trigrams #ab abc bcd cd# with df 2, 2, 1, 1.
    let rom = Romanizer::default();
    let index = Bm25Index::build(["abcd", "abce", "xyz"], &rom, Script::Persian);
    let ranked = bm25_rank(&index, "abcd", Script::Tajik, &rom, 0);

    let idf_df2 = ((3.0 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0f64).ln();
    let idf_df1 = ((3.0 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0f64).ln();
    let avgdl = 11.0 / 3.0;
    let tf_norm_len4 = (1.0 * (1.5 + 1.0)) / (1.0 + 1.5 * (1.0 - 0.75 + 0.75 * 4.0 / avgdl));
    let manual_abcd = 2.0 * idf_df2 * tf_norm_len4 + 2.0 * idf_df1 * tf_norm_len4;
    let manual_abce = 2.0 * idf_df2 * tf_norm_len4;

    let score =
        |name: &str| ranked.entries.iter().find(|(c, _)| c == name).map(|(_, s)| *s).unwrap();
    assert!((score("abcd") - manual_abcd).abs() < 1e-9);
    assert!((score("abce") - manual_abce).abs() < 1e-9);
    assert_eq!(score("xyz"), 0.0);
    pass(
        "criterion 4 (BM25 hand oracle)",
        format!("scores {:.6}/{:.6}/0 match manual within 1e-9", manual_abcd, manual_abce),
    );
}

/// Criterion 5 — random-baseline calibration: Acc@1 of the random ranker
/// over 4,000 queries with 1,001-candidate pools lands in the binomial 99%
/// band around 1/1001.
#[test]
fn acceptance_05_random_baseline_calibration() {
    let _guard = serial();
    let universe: Vec<String> = (0..4200).map(|i| format!("form{i:05}")).collect();
    let mut hits = 0usize;
    let n_queries = 4000usize;
    for i in 0..n_queries {
        let gold = &universe[i % universe.len()];
        let pool = build_pool(gold, &universe, 1000, 42, i as u64).expect("pool");
        let ranked = random_rank(&pool, 42);
        if ranked.rank_of(gold) == Some(1) {
            hits += 1;
        }
    }
    let acc1 = hits as f64 / n_queries as f64;
    assert!(
        (0.0002..=0.003).contains(&acc1),
        "random Acc@1 = {acc1} ({hits}/{n_queries}) outside [0.0002, 0.003]"
    );
    pass(
        "criterion 5 (random baseline)",
        format!("Acc@1 = {acc1:.5} ({hits}/{n_queries}) within [0.0002, 0.003]"),
    );
}

/// Criterion 6 — split arithmetic: synthetic N=10,000 splits into exactly
/// 8,000/1,000/1,000; when the real dataset is supplied via
/// CROSSLEX_REAL_DATASET, its pre-removal split must be 32,090/4,011/4,011.
#[test]
fn acceptance_06_split_arithmetic() {
    let _guard = serial();
    let params = SynthParams { n_pairs: 10_000, seed: 42, ..SynthParams::default() };
    let (entries, _) = gen_lexicon(&params).expect("generation");
    let split = corpus::split(&entries, &SplitSpec::default()).expect("split");
    assert_eq!(
        (split.train.len(), split.dev.len(), split.test.len()),
        (8000, 1000, 1000),
        "synthetic 10,000 must split exactly 8000/1000/1000"
    );

    let real_detail = match std::env::var("CROSSLEX_REAL_DATASET") {
        Ok(path) => {
            let bytes = std::fs::read(&path).expect("read real dataset");
            let policy = corpus::NormalizationPolicy::default();
            let parsed = corpus::ingest(bytes.as_slice(), &policy, None).expect("ingest");
            let real = corpus::split(&parsed.entries, &SplitSpec::default()).expect("split");
            assert_eq!(
                (real.train.len(), real.dev.len(), real.test.len()),
                (32_090, 4_011, 4_011),
                "real dataset split sizes"
            );
            format!("; real dataset split 32090/4011/4011 verified from {path}")
        }
        Err(_) => "; real dataset not provided (CROSSLEX_REAL_DATASET unset)".to_string(),
    };
    pass("criterion 6 (split arithmetic)", format!("synthetic 8000/1000/1000{real_detail}"));
}

/// Criterion 7 — OCR noise statistics over 100,000 words: selected-word rate
/// within 0.30 ± 0.01 and per-character edit rate within selected words
/// within 0.20 ± 0.01. Words are long enough (24 chars) that selections
/// receiving zero edits are negligible.
#[test]
fn acceptance_07_ocr_noise_statistics() {
    let _guard = serial();
    let alphabet: Vec<char> = "ابپتثجچحخدذر".chars().collect();
    let mut rng = seed::rng(99);
    let words: Vec<String> = (0..100_000)
        .map(|_| (0..24).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect())
        .collect();
    let (_, stats) = corrupt_all(&words, CorruptParams::default(), &alphabet, 42);
    let selected = stats.selected_rate();
    let char_rate = stats.char_edit_rate();
    assert!(
        (selected - 0.30).abs() <= 0.01,
        "selected-word rate {selected:.4} outside 0.30 +/- 0.01"
    );
    assert!(
        (char_rate - 0.20).abs() <= 0.01,
        "character edit rate {char_rate:.4} outside 0.20 +/- 0.01"
    );
    pass(
        "criterion 7 (OCR noise statistics)",
        format!("selected rate {selected:.4}, char edit rate {char_rate:.4} over 100k words"),
    );
}

/// Criterion 8 — bootstrap sanity: a 4,011-long Bernoulli vector with mean
/// 0.987 gives 95% percentile CI endpoints within ±0.002 of 0.984/0.990;
/// the all-ones vector gives exactly (1.0, 1.0).
#[test]
fn acceptance_08_bootstrap_sanity() {
    let _guard = serial();
    let mut values = vec![1.0; 3959];
    values.extend(std::iter::repeat_n(0.0, 4011 - 3959));
    assert_eq!(values.len(), 4011);
    let (lo, hi) = bootstrap_ci(&values, 1000, 0.05, 42).expect("bootstrap");
    assert!((lo - 0.984).abs() <= 0.002, "lo = {lo:.4}, expected 0.984 +/- 0.002");
    assert!((hi - 0.990).abs() <= 0.002, "hi = {hi:.4}, expected 0.990 +/- 0.002");

    let ones = vec![1.0; 4011];
    let degenerate = bootstrap_ci(&ones, 1000, 0.05, 42).expect("bootstrap");
    assert_eq!(degenerate, (1.0, 1.0));
    pass(
        "criterion 8 (bootstrap sanity)",
        format!("CI [{lo:.4}, {hi:.4}] brackets 0.984/0.990; all-ones CI exact"),
    );
}

/// Criterion 9 — determinism: two full reproduce runs with an identical
/// config emit byte-identical deterministic artifacts (reports, models,
/// splits, weights, manifest).
#[test]
fn acceptance_09_reproduce_determinism() {
    let _guard = serial();
    let tmp = tempfile::tempdir().expect("tempdir");
    let params = SynthParams { n_pairs: 2000, noise_rate: 0.05, seed: 3, ..SynthParams::default() };
    let (entries, truth) = gen_lexicon(&params).expect("generation");
    let dataset = tmp.path().join("synth.jsonl");
    std::fs::write(&dataset, corpus::write_jsonl(&entries)).expect("write dataset");
    let truth_path = tmp.path().join("truth.json");
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth).unwrap()).expect("write truth");

    let out_dir = tmp.path().join("artifacts");
    let mut config = RunConfig::new(&dataset, &out_dir);
    config.pool_size = 100;
    config.tune_pool_size = 30;
    config.bpe_vocab = 300;
    config.dim = 24;
    config.epochs = 2;
    config.grid_step = 0.2;
    config.query_limit = Some(200);
    config.truth_file = Some(truth_path);

    let manifest_first = reproduce(&config).expect("first run");
    let snapshot: BTreeMap<String, Vec<u8>> = manifest_first
        .files
        .keys()
        .chain(std::iter::once(&"manifest.json".to_string()))
        .map(|name| (name.clone(), std::fs::read(out_dir.join(name)).expect("read artifact")))
        .collect();

    let manifest_second = reproduce(&config).expect("second run");
    assert_eq!(manifest_first.files, manifest_second.files, "hash manifests differ");
    for (name, bytes) in &snapshot {
        let again = std::fs::read(out_dir.join(name)).expect("read artifact");
        assert_eq!(bytes, &again, "{name} differs between identical runs");
    }
    pass(
        "criterion 9 (determinism)",
        format!("{} artifacts byte-identical across two runs", snapshot.len()),
    );
}

/// Criterion 10 — efficiency envelope at full scale: training (BPE + both
/// embeddings + tuning on reduced pools) within 10 minutes; hybrid
/// evaluation of 4,011 queries against 1,000-distractor pools within 750 s
/// single-threaded and 100 MB peak memory.
#[test]
fn acceptance_10_efficiency_envelope() {
    let _guard = serial();
    // 40,110 pairs split 80/10/10 in one stratum: exactly 4,011 test queries.
    let params = SynthParams {
        n_pairs: 40_110,
        seed: 42,
        source_alphabet: "бвгдежзиклмнопрстуфхчшъэ".chars().collect(),
        target_alphabet: "ابپتثجچحخدذرزژسشصضطظعغفقکگ".chars().collect(),
        min_len: 4,
        max_len: 6,
        ..SynthParams::default()
    };

    let train_started = Instant::now();
    let stack = train_stack(&params, 2000, SkipgramParams::default());
    let TrainedStack { entries, truth, split, bpe, wordpiece, charngram } = stack;
    let rules = truth.rule_set();
    let romanizer = Romanizer::default();
    let models = HybridModels {
        charngram: &charngram,
        wordpiece: &wordpiece,
        bpe: &bpe,
        rules: &rules,
        romanizer: &romanizer,
    };
    let universe = persian_forms(&entries);
    let dev: Vec<(String, crosslex_core::CandidatePool)> = split
        .dev
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let pool = build_pool(&e.persian, &universe, 100, 42, i as u64).expect("pool");
            (e.tajik.clone(), pool)
        })
        .collect();
    let (weights, _) =
        tune_weights(&dev, &models, ScoreMode::CrossScript, 0.05, None).expect("tuning");
    drop(dev);
    let train_secs = train_started.elapsed().as_secs_f64();
    assert!(
        train_secs <= 600.0,
        "hybrid training took {train_secs:.0} s, budget 600 s"
    );

    let pairs: Vec<(String, String)> =
        split.test.iter().map(|e| (e.tajik.clone(), e.persian.clone())).collect();
    assert_eq!(pairs.len(), 4011);
    // Evaluation is measured on a lean footprint: only the models, the
    // universe, and the query pairs stay alive.
    drop(split);
    drop(entries);
    drop(truth);
    let phonetic_tajik = PhoneticTable::default_tajik();
    let phonetic_persian = PhoneticTable::default_persian();
    let ctx = RankContext {
        models,
        weights,
        phonetic_tajik: &phonetic_tajik,
        phonetic_persian: &phonetic_persian,
        cache: None,
        seed: 42,
    };
    let report = eval_run(
        Method::Hybrid,
        &pairs,
        &universe,
        1000,
        42,
        "primary",
        &ctx,
        ScoreMode::CrossScript,
        1,
    )
    .expect("hybrid evaluation");
    assert!(
        report.wall_secs <= 750.0,
        "hybrid evaluation took {:.0} s, budget 750 s",
        report.wall_secs
    );
    assert!(
        report.peak_mem_mb <= 100.0,
        "peak memory {:.1} MB, budget 100 MB",
        report.peak_mem_mb
    );
    pass(
        "criterion 10 (efficiency envelope)",
        format!(
            "train {train_secs:.0} s <= 600 s; eval {:.0} s <= 750 s at {:.1} MB <= 100 MB (Acc@1 {:.3})",
            report.wall_secs, report.peak_mem_mb, report.acc1
        ),
    );
}

/// Criterion 11 — invariant spot checks, mirroring the per-module property
/// suites: metric axioms, Acc@k monotonicity, ranking invariance under
/// positive scaling, BPE round-trips, and corruption replay.
#[test]
fn acceptance_11_invariant_suites() {
    let _guard = serial();
    let mut rng = seed::rng(2718);
    let alphabet: Vec<char> = "абвгдабвгдxyz".chars().collect();
    let word = |rng: &mut rand_pcg::Pcg64| -> String {
        let len = rng.random_range(0..10);
        (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };

    // metric axioms
    for _ in 0..300 {
        let a = word(&mut rng);
        let b = word(&mut rng);
        let c = word(&mut rng);
        assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        assert_eq!(levenshtein(&a, &a), 0);
        assert!(levenshtein(&a, &b) <= levenshtein(&a, &c) + levenshtein(&c, &b));
    }

    // Acc@k monotone in k, MRR >= Acc@1
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        let ranks: Vec<Option<usize>> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    None
                } else {
                    Some(rng.random_range(1..30))
                }
            })
            .collect();
        let m = metrics_from_ranks(&ranks, &[1, 5, 10]);
        assert!(m.acc[&1] <= m.acc[&5] && m.acc[&5] <= m.acc[&10] && m.acc[&10] <= 1.0);
        assert!(m.mrr >= m.acc[&1] && m.mrr <= 1.0);
    }

    // hybrid ranking order invariant under positive scaling of all scores
    for _ in 0..100 {
        let weights = FusionWeights::new(
            rng.random::<f64>() + 0.01,
            rng.random::<f64>() + 0.01,
            rng.random::<f64>() + 0.01,
            rng.random::<f64>() + 0.01,
        )
        .unwrap();
        let scores: Vec<[f64; 4]> =
            (0..8).map(|_| [rng.random(), rng.random(), rng.random(), rng.random()]).collect();
        let scale = rng.random::<f64>() * 5.0 + 0.01;
        let w = weights.as_array();
        let fused: Vec<f64> =
            scores.iter().map(|s| (0..4).map(|i| w[i] * s[i]).sum()).collect();
        let scaled: Vec<f64> =
            scores.iter().map(|s| (0..4).map(|i| w[i] * s[i] * scale).sum()).collect();
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&x, &y| v[y].partial_cmp(&v[x]).unwrap().then(x.cmp(&y)));
            idx
        };
        assert_eq!(order(&fused), order(&scaled));
    }

    // BPE round-trip over the base alphabet
    let corpus_lines: Vec<String> = (0..60).map(|_| format!("{} {}", word(&mut rng), word(&mut rng))).collect();
    let nonempty: Vec<String> = corpus_lines.iter().filter(|l| l.trim().len() > 1).cloned().collect();
    let bpe = BpeModel::train(&nonempty, 80, 0).expect("bpe");
    for line in &nonempty {
        for w in line.split_whitespace() {
            assert_eq!(bpe.decode(&bpe.encode(w)), w);
        }
    }

    // corruption replay reconstructs the corrupted form
    let fa: Vec<char> = "ابپتث".chars().collect();
    for i in 0..300u64 {
        let w: String = (0..rng.random_range(1..10))
            .map(|_| fa[rng.random_range(0..fa.len())])
            .collect();
        let sample =
            crosslex_core::harness::corrupt(&w, CorruptParams { p_word: 0.8, p_char: 0.4 }, &fa, i);
        assert_eq!(sample.replay(), sample.corrupted);
    }

    pass(
        "criterion 11 (invariant suites)",
        "metric axioms, Acc@k monotonicity, scaling invariance, BPE round-trip, replay".to_string(),
    );
}

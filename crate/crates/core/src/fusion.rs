//! The linear hybrid ranker and development-set weight tuning.
//!
//! A query–candidate pair gets four component scores in [0, 1] — character
//! n-gram embedding similarity, wordpiece embedding similarity, romanized
//! edit similarity, and rule-transliteration similarity — combined as a
//! weighted sum with weights on the probability simplex. Tuning is an
//! exhaustive deterministic search over a simplex grid (all four corners
//! included), maximizing development-set MRR.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine01, EmbeddingModel};
use crate::retrieval::{CandidatePool, RankedList};
use crate::strmetrics::norm_sim;
use crate::subword::BpeModel;
use crate::translit::{transliterate, GraphemeRuleSet, Romanizer, Script};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid fusion weights: {0}")]
    BadWeights(String),
    #[error("grid step {0} does not divide 1")]
    BadGridStep(f64),
    #[error("development set is empty")]
    EmptyDevSet,
}

/// Simplex-normalized weights of the four components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl FusionWeights {
    /// Builds weights from non-negative values, normalizing them to sum 1.
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self, FusionError> {
        let raw = [alpha, beta, gamma, delta];
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(FusionError::BadWeights(format!("weights must be >= 0, got {raw:?}")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(FusionError::BadWeights("weights sum to zero".into()));
        }
        Ok(Self { alpha: alpha / sum, beta: beta / sum, gamma: gamma / sum, delta: delta / sum })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }

    /// Corner weight vector with everything on one component
    /// (0 = char-ngram, 1 = wordpiece, 2 = edit, 3 = rule).
    pub fn corner(component: usize) -> Self {
        let mut w = [0.0; 4];
        w[component] = 1.0;
        Self { alpha: w[0], beta: w[1], gamma: w[2], delta: w[3] }
    }
}

impl Default for FusionWeights {
    /// The documented starting point before tuning.
    fn default() -> Self {
        Self { alpha: 0.4, beta: 0.3, gamma: 0.2, delta: 0.1 }
    }
}

/// Whether component scores compare across scripts (retrieval) or within the
/// Persian script (OCR correction: the query is a corrupted Persian form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    CrossScript,
    PersianToPersian,
}

/// Everything the hybrid scorer needs, borrowed from the caller.
#[derive(Clone, Copy)]
pub struct HybridModels<'a> {
    pub charngram: &'a EmbeddingModel,
    pub wordpiece: &'a EmbeddingModel,
    pub bpe: &'a BpeModel,
    pub rules: &'a GraphemeRuleSet,
    pub romanizer: &'a Romanizer,
}

/// The four component scores of one query–candidate pair, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentScores {
    pub s_charngram: f64,
    pub s_wordpiece: f64,
    pub s_edit: f64,
    pub s_rule: f64,
}

impl ComponentScores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s_charngram, self.s_wordpiece, self.s_edit, self.s_rule]
    }
}

/// Precomputed query-side features, reused across a candidate pool.
pub struct QueryFeatures {
    charngram: Option<Vec<f32>>,
    wordpiece: Option<Vec<f32>>,
    romanized: String,
    /// What candidates are compared against for the rule component: the
    /// transliterated query cross-script, the raw query within Persian.
    rule_target: String,
}

impl QueryFeatures {
    pub fn new(query: &str, models: &HybridModels, mode: ScoreMode) -> Self {
        let (romanized, rule_target) = match mode {
            ScoreMode::CrossScript => (
                models.romanizer.romanize(query, Script::Tajik),
                transliterate(models.rules, query),
            ),
            ScoreMode::PersianToPersian => {
                (models.romanizer.romanize(query, Script::Persian), query.to_string())
            }
        };
        Self {
            charngram: models.charngram.word_vector(query, None),
            wordpiece: models.wordpiece.word_vector(query, Some(models.bpe)),
            romanized,
            rule_target,
        }
    }
}

/// Candidate-side features; cache these per universe when ranking many
/// queries against overlapping pools.
#[derive(Debug, Clone)]
pub struct CandidateFeatures {
    charngram: Option<Vec<f32>>,
    wordpiece: Option<Vec<f32>>,
    romanized: String,
}

impl CandidateFeatures {
    pub fn new(candidate: &str, models: &HybridModels) -> Self {
        Self {
            charngram: models.charngram.word_vector(candidate, None),
            wordpiece: models.wordpiece.word_vector(candidate, Some(models.bpe)),
            romanized: models.romanizer.romanize(candidate, Script::Persian),
        }
    }
}

/// Candidate feature cache keyed by surface form.
#[derive(Default)]
pub struct FeatureCache {
    map: HashMap<String, CandidateFeatures>,
}

impl FeatureCache {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(forms: I, models: &HybridModels) -> Self {
        let map = forms
            .into_iter()
            .map(|f| (f.to_string(), CandidateFeatures::new(f, models)))
            .collect();
        Self { map }
    }

    pub fn get_or_compute(&self, candidate: &str, models: &HybridModels) -> CandidateFeatures {
        self.map.get(candidate).cloned().unwrap_or_else(|| CandidateFeatures::new(candidate, models))
    }
}

fn embedding_score(q: &Option<Vec<f32>>, c: &Option<Vec<f32>>) -> f64 {
    match (q, c) {
        (Some(qv), Some(cv)) => cosine01(qv, cv),
        // a missing vector on either side is neutral
        _ => 0.5,
    }
}

/// Component scores from precomputed features.
pub fn score_pair(
    query: &QueryFeatures,
    candidate: &CandidateFeatures,
    candidate_text: &str,
) -> ComponentScores {
    ComponentScores {
        s_charngram: embedding_score(&query.charngram, &candidate.charngram),
        s_wordpiece: embedding_score(&query.wordpiece, &candidate.wordpiece),
        s_edit: norm_sim(&query.romanized, &candidate.romanized),
        s_rule: norm_sim(&query.rule_target, candidate_text),
    }
}

/// Convenience one-shot scoring of a single pair.
pub fn component_scores(
    query: &str,
    candidate: &str,
    models: &HybridModels,
    mode: ScoreMode,
) -> ComponentScores {
    let qf = QueryFeatures::new(query, models, mode);
    let cf = CandidateFeatures::new(candidate, models);
    score_pair(&qf, &cf, candidate)
}

/// Weighted sum of the component scores. Weights sum to 1 and scores live in
/// [0, 1], so the result does too.
pub fn fuse(weights: &FusionWeights, scores: &ComponentScores) -> f64 {
    let w = weights.as_array();
    let s = scores.as_array();
    w.iter().zip(s).map(|(wi, si)| wi * si).sum()
}

/// Ranks a pool with the hybrid score.
pub fn hybrid_rank(
    query: &str,
    pool: &CandidatePool,
    models: &HybridModels,
    weights: &FusionWeights,
    mode: ScoreMode,
    cache: Option<&FeatureCache>,
) -> RankedList {
    let qf = QueryFeatures::new(query, models, mode);
    let entries = pool
        .candidates()
        .map(|c| {
            let cf = match cache {
                Some(cache) => cache.get_or_compute(c, models),
                None => CandidateFeatures::new(c, models),
            };
            (c.to_string(), fuse(weights, &score_pair(&qf, &cf, c)))
        })
        .collect();
    RankedList::new(pool.query_id, "hybrid", entries)
}

/// One grid point of the tuning log.
#[derive(Debug, Clone, Serialize)]
pub struct TunePoint {
    pub weights: FusionWeights,
    pub mrr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuningLog {
    pub grid_step: f64,
    pub points: Vec<TunePoint>,
    pub best_index: usize,
}

impl TuningLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,gamma,delta,dev_mrr\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.4},{:.4},{:.4},{:.4},{:.6}\n",
                p.weights.alpha, p.weights.beta, p.weights.gamma, p.weights.delta, p.mrr
            ));
        }
        out
    }
}

/// Exhaustive search over the simplex grid {multiples of grid_step summing
/// to 1}, which always contains the four corner vectors. Returns the grid
/// point with maximal dev MRR; ties go to the earliest point in
/// lexicographic grid order.
pub fn tune_weights(
    dev: &[(String, CandidatePool)],
    models: &HybridModels,
    mode: ScoreMode,
    grid_step: f64,
    cache: Option<&FeatureCache>,
) -> Result<(FusionWeights, TuningLog), FusionError> {
    if dev.is_empty() {
        return Err(FusionError::EmptyDevSet);
    }
    let m = (1.0 / grid_step).round();
    if !(grid_step > 0.0 && grid_step <= 1.0 && (m * grid_step - 1.0).abs() < 1e-9) {
        return Err(FusionError::BadGridStep(grid_step));
    }
    let m = m as u32;

    // Precompute per-query candidate score vectors once; every grid point is
    // then a dot product plus a rank count against the gold entry.
    struct PreparedQuery {
        gold_scores: [f64; 4],
        /// (scores, candidate sorts before gold lexicographically)
        others: Vec<([f64; 4], bool)>,
    }
    let prepared: Vec<PreparedQuery> = dev
        .iter()
        .map(|(query, pool)| {
            let qf = QueryFeatures::new(query, models, mode);
            let gold_cf = match cache {
                Some(c) => c.get_or_compute(&pool.gold, models),
                None => CandidateFeatures::new(&pool.gold, models),
            };
            let gold_scores = score_pair(&qf, &gold_cf, &pool.gold).as_array();
            let others = pool
                .distractors
                .iter()
                .map(|c| {
                    let cf = match cache {
                        Some(cache) => cache.get_or_compute(c, models),
                        None => CandidateFeatures::new(c, models),
                    };
                    (score_pair(&qf, &cf, c).as_array(), c < &pool.gold)
                })
                .collect();
            PreparedQuery { gold_scores, others }
        })
        .collect();

    let dot = |w: &[f64; 4], s: &[f64; 4]| w[0] * s[0] + w[1] * s[1] + w[2] * s[2] + w[3] * s[3];

    let mut points = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=m {
        for j in 0..=(m - i) {
            for k in 0..=(m - i - j) {
                let l = m - i - j - k;
                let w = [
                    f64::from(i) / f64::from(m),
                    f64::from(j) / f64::from(m),
                    f64::from(k) / f64::from(m),
                    f64::from(l) / f64::from(m),
                ];
                let mut rr_sum = 0.0;
                for q in &prepared {
                    let gold = dot(&w, &q.gold_scores);
                    let mut rank = 1usize;
                    for (s, lex_before_gold) in &q.others {
                        let sc = dot(&w, s);
                        if sc > gold || (sc == gold && *lex_before_gold) {
                            rank += 1;
                        }
                    }
                    rr_sum += 1.0 / rank as f64;
                }
                let mrr = rr_sum / prepared.len() as f64;
                let index = points.len();
                points.push(TunePoint {
                    weights: FusionWeights { alpha: w[0], beta: w[1], gamma: w[2], delta: w[3] },
                    mrr,
                });
                if best.is_none_or(|(_, b)| mrr > b) {
                    best = Some((index, mrr));
                }
            }
        }
    }
    let (best_index, _) = best.expect("grid is never empty");
    let weights = points[best_index].weights;
    Ok((weights, TuningLog { grid_step, points, best_index }))
}

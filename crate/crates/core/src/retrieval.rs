//! Candidate pools and the single-signal rankers: BM25 over romanized
//! character trigrams, edit distance, rule transliteration, phonetic codes,
//! and the random baseline.
//!
//! Every ranker is a pure function of (query, pool, model, seed) and returns
//! a total order over exactly the pool's candidates: scores sorted
//! descending, ties broken by candidate lexicographic order.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::strmetrics::norm_sim;
use crate::translit::{phonetic_code, transliterate, GraphemeRuleSet, PhoneticTable, Romanizer, Script};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("universe has {available} usable forms, need at least {needed}")]
    UniverseTooSmall { needed: usize, available: usize },
}

/// The gold form plus sampled distractors for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query_id: u64,
    pub gold: String,
    pub distractors: Vec<String>,
    pub seed: u64,
}

impl CandidatePool {
    /// Gold first, then distractors in sampled order.
    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.gold.as_str()).chain(self.distractors.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.distractors.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false // a pool always contains its gold form
    }
}

/// Samples `pool_size` distractors uniformly without replacement from
/// `universe \ {gold}`. The PRNG is seeded from (run_seed, query_index)
/// only, so pools are deterministic per query and independent of thread
/// scheduling.
pub fn build_pool(
    gold: &str,
    universe: &[String],
    pool_size: usize,
    run_seed: u64,
    query_index: u64,
) -> Result<CandidatePool, RetrievalError> {
    let mut indices: Vec<u32> = Vec::with_capacity(universe.len());
    for (i, form) in universe.iter().enumerate() {
        if form != gold {
            indices.push(i as u32);
        }
    }
    if indices.len() < pool_size {
        return Err(RetrievalError::UniverseTooSmall {
            needed: pool_size,
            available: indices.len(),
        });
    }
    let pool_seed = seed::mix(run_seed, query_index);
    let mut rng = seed::rng(pool_seed);
    // Partial Fisher-Yates: only the prefix we keep is shuffled.
    for i in 0..pool_size {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let distractors =
        indices[..pool_size].iter().map(|&i| universe[i as usize].clone()).collect();
    Ok(CandidatePool { query_id: query_index, gold: gold.to_string(), distractors, seed: pool_seed })
}

/// A scored, sorted candidate list for one query.
#[derive(Debug, Clone, Serialize)]
pub struct RankedList {
    pub query_id: u64,
    pub component: String,
    /// (candidate, score), scores non-increasing.
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    /// Sorts by score descending, candidate ascending on ties.
    pub fn new(query_id: u64, component: &str, mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self { query_id, component: component.to_string(), entries }
    }

    /// 1-based rank of the given form, if present.
    pub fn rank_of(&self, form: &str) -> Option<usize> {
        self.entries.iter().position(|(c, _)| c == form).map(|p| p + 1)
    }
}

type Trigram = (char, char, char);

fn trigrams(text: &str) -> Vec<Trigram> {
    let padded: Vec<char> =
        std::iter::once('#').chain(text.chars()).chain(std::iter::once('#')).collect();
    padded.windows(3).map(|w| (w[0], w[1], w[2])).collect()
}

/// BM25 index over romanized character trigrams of a candidate set.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    pub k1: f64,
    pub b: f64,
    doc_names: Vec<String>,
    doc_tf: Vec<HashMap<Trigram, u32>>,
    doc_len: Vec<f64>,
    df: HashMap<Trigram, u32>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build<'a, I>(candidates: I, romanizer: &Romanizer, script: Script) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut doc_names = Vec::new();
        let mut doc_tf = Vec::new();
        let mut doc_len = Vec::new();
        let mut df: HashMap<Trigram, u32> = HashMap::new();
        for cand in candidates {
            let toks = trigrams(&romanizer.romanize(cand, script));
            let mut tf: HashMap<Trigram, u32> = HashMap::new();
            for t in &toks {
                *tf.entry(*t).or_insert(0) += 1;
            }
            for t in tf.keys() {
                *df.entry(*t).or_insert(0) += 1;
            }
            doc_names.push(cand.to_string());
            doc_len.push(toks.len() as f64);
            doc_tf.push(tf);
        }
        let n = doc_len.len().max(1) as f64;
        let avgdl = doc_len.iter().sum::<f64>() / n;
        Self { k1: 1.5, b: 0.75, doc_names, doc_tf, doc_len, df, avgdl }
    }

    /// Scores every document against the query's unique trigrams with
    /// `idf = ln((N - df + 0.5) / (df + 0.5) + 1)`.
    pub fn score_all(&self, query_trigrams: &[Trigram]) -> Vec<(String, f64)> {
        let n = self.doc_names.len() as f64;
        let mut unique: Vec<Trigram> = query_trigrams.to_vec();
        unique.sort_unstable();
        unique.dedup();

        let mut scores = vec![0.0f64; self.doc_names.len()];
        for t in unique {
            let Some(&df) = self.df.get(&t) else { continue };
            let idf = ((n - f64::from(df) + 0.5) / (f64::from(df) + 0.5) + 1.0).ln();
            for (d, tf_map) in self.doc_tf.iter().enumerate() {
                let Some(&tf) = tf_map.get(&t) else { continue };
                let tf = f64::from(tf);
                let denom = tf
                    + self.k1
                        * (1.0 - self.b
                            + self.b * self.doc_len[d] / self.avgdl.max(f64::MIN_POSITIVE));
                scores[d] += idf * tf * (self.k1 + 1.0) / denom;
            }
        }
        self.doc_names.iter().cloned().zip(scores).collect()
    }
}

/// BM25 ranking: query romanized and trigrammed exactly like the documents.
pub fn bm25_rank(
    index: &Bm25Index,
    query: &str,
    query_script: Script,
    romanizer: &Romanizer,
    query_id: u64,
) -> RankedList {
    let toks = trigrams(&romanizer.romanize(query, query_script));
    RankedList::new(query_id, "bm25", index.score_all(&toks))
}

/// Edit-distance ranking over the shared Latin pivot:
/// `norm_sim(romanize(query), romanize(candidate))`.
pub fn edit_rank(
    query: &str,
    query_script: Script,
    pool: &CandidatePool,
    romanizer: &Romanizer,
) -> RankedList {
    let q = romanizer.romanize(query, query_script);
    let entries = pool
        .candidates()
        .map(|c| (c.to_string(), norm_sim(&q, &romanizer.romanize(c, Script::Persian))))
        .collect();
    RankedList::new(pool.query_id, "edit", entries)
}

/// Rule-transliteration ranking: transliterate the query once, then
/// `norm_sim` against each candidate in the target script.
pub fn rule_rank(query: &str, pool: &CandidatePool, rules: &GraphemeRuleSet) -> RankedList {
    let t = transliterate(rules, query);
    let entries =
        pool.candidates().map(|c| (c.to_string(), norm_sim(&t, c))).collect();
    RankedList::new(pool.query_id, "rule", entries)
}

/// Phonetic ranking: fraction of aligned code positions that agree
/// (1.0 exactly when the codes match).
pub fn phonetic_rank(
    query: &str,
    pool: &CandidatePool,
    query_table: &PhoneticTable,
    candidate_table: &PhoneticTable,
) -> RankedList {
    let q_code = phonetic_code(query, query_table).ok();
    let entries = pool
        .candidates()
        .map(|c| {
            let score = match (&q_code, phonetic_code(c, candidate_table).ok()) {
                (Some(q), Some(c_code)) => {
                    let agree = q.chars().zip(c_code.chars()).filter(|(a, b)| a == b).count();
                    agree as f64 / q.chars().count().max(1) as f64
                }
                _ => 0.0,
            };
            (c.to_string(), score)
        })
        .collect();
    RankedList::new(pool.query_id, "phonetic", entries)
}

/// Random baseline: a seeded uniform shuffle of the candidates, exposed as
/// strictly decreasing synthetic scores so the ordering survives the
/// ranked-list sorting contract.
pub fn random_rank(pool: &CandidatePool, run_seed: u64) -> RankedList {
    let mut candidates: Vec<String> = pool.candidates().map(str::to_string).collect();
    let mut rng = seed::rng(seed::mix(run_seed, pool.query_id));
    use rand::seq::SliceRandom;
    candidates.shuffle(&mut rng);
    let n = candidates.len() as f64;
    let entries = candidates
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, (n - i as f64) / n))
        .collect();
    RankedList::new(pool.query_id, "random", entries)
}

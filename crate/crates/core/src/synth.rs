//! Synthetic parallel lexica with known ground truth.
//!
//! The generator draws random source words over a Cyrillic subset, maps them
//! through a randomly drawn injective grapheme table into a disjoint
//! Perso-Arabic symbol set, optionally replaces targets with recorded
//! exceptions, and perturbs the target side with per-character noise. The
//! emitted ground truth (rule table, exception map, per-pair edit counts)
//! makes the generated data a verification oracle: at zero noise the rule
//! ranker must retrieve every gold form at rank 1.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LexiconEntry;
use crate::harness::apply_char_noise;
use crate::seed;
use crate::translit::{transliterate, GraphemeRuleSet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("could not satisfy uniqueness constraints within the retry budget")]
    RetriesExhausted,
}

/// Generation parameters. Defaults give 12 single-character rules plus two
/// digraphs, words of 5..=10 characters, one POS stratum, and no noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_pairs: usize,
    pub source_alphabet: Vec<char>,
    pub target_alphabet: Vec<char>,
    /// Number of two-character source units in the drawn mapping.
    pub digraphs: usize,
    pub exception_fraction: f64,
    /// Per-character perturbation probability on the target side.
    pub noise_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// (label, weight) pairs for POS sampling.
    pub pos_labels: Vec<(String, f64)>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_pairs: 10_000,
            source_alphabet: "бдрзсфглмнкт".chars().collect(),
            target_alphabet: "بتجدرزسفکگلمپخشچ".chars().collect(),
            digraphs: 2,
            exception_fraction: 0.0,
            noise_rate: 0.0,
            min_len: 5,
            max_len: 10,
            pos_labels: vec![("unclassified".to_string(), 1.0)],
            seed: 42,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n_pairs == 0 {
            return Err(SynthError::BadParams("n_pairs must be positive".into()));
        }
        if self.source_alphabet.is_empty() || self.target_alphabet.is_empty() {
            return Err(SynthError::BadParams("alphabets must be non-empty".into()));
        }
        if self.target_alphabet.len() < self.source_alphabet.len() + self.digraphs {
            return Err(SynthError::BadParams(format!(
                "need {} distinct target symbols, alphabet has {}",
                self.source_alphabet.len() + self.digraphs,
                self.target_alphabet.len()
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(SynthError::BadParams("bad word length range".into()));
        }
        if !(0.0..=1.0).contains(&self.exception_fraction)
            || !(0.0..=1.0).contains(&self.noise_rate)
        {
            return Err(SynthError::BadParams("fractions must lie in [0, 1]".into()));
        }
        if self.pos_labels.is_empty() || self.pos_labels.iter().any(|(_, w)| *w < 0.0) {
            return Err(SynthError::BadParams("bad POS label distribution".into()));
        }
        Ok(())
    }
}

/// Per-pair generation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTruth {
    /// Target before noise (the exception target for exception pairs).
    pub clean_target: String,
    /// Number of noise operations applied.
    pub edit_ops: usize,
    pub is_exception: bool,
}

/// Everything needed to verify generated data: the drawn mapping, the
/// exception map, and per-pair noise records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rule_rows: Vec<(String, String)>,
    pub exceptions: BTreeMap<String, String>,
    pub per_pair: Vec<PairTruth>,
    pub seed: u64,
}

impl GroundTruth {
    /// The drawn mapping as a loaded rule set (exceptions included).
    pub fn rule_set(&self) -> GraphemeRuleSet {
        GraphemeRuleSet::new(
            self.rule_rows.iter().map(|(s, t)| (s.chars().collect(), t.clone())).collect(),
            self.exceptions.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            &format!("synth-{}", self.seed),
        )
    }
}

const MAX_RETRIES: usize = 200;

/// Generates a synthetic lexicon plus its ground truth. All source words and
/// all final targets are distinct; identical parameters give identical
/// output.
pub fn gen_lexicon(params: &SynthParams) -> Result<(Vec<LexiconEntry>, GroundTruth), SynthError> {
    params.validate()?;
    let mut rng = seed::rng(params.seed);

    // Draw the mapping: every single source character gets a distinct target
    // character; digraph sources get their own reserved targets, which keeps
    // the word-level map injective.
    let mut targets = params.target_alphabet.clone();
    for i in (1..targets.len()).rev() {
        let j = rng.random_range(0..=i);
        targets.swap(i, j);
    }
    let mut rule_rows: Vec<(String, String)> = Vec::new();
    for (i, &c) in params.source_alphabet.iter().enumerate() {
        rule_rows.push((c.to_string(), targets[i].to_string()));
    }
    let mut digraph_set: HashSet<(char, char)> = HashSet::new();
    while digraph_set.len() < params.digraphs {
        let a = params.source_alphabet[rng.random_range(0..params.source_alphabet.len())];
        let b = params.source_alphabet[rng.random_range(0..params.source_alphabet.len())];
        if digraph_set.insert((a, b)) {
            let target = targets[params.source_alphabet.len() + digraph_set.len() - 1];
            rule_rows.push((format!("{a}{b}"), target.to_string()));
        }
    }
    let mut truth = GroundTruth {
        rule_rows,
        exceptions: BTreeMap::new(),
        per_pair: Vec::with_capacity(params.n_pairs),
        seed: params.seed,
    };

    let mut entries: Vec<LexiconEntry> = Vec::with_capacity(params.n_pairs);
    let mut seen_sources: HashSet<String> = HashSet::new();
    let mut seen_targets: HashSet<String> = HashSet::new();

    // POS sampling over the cumulative weight distribution.
    let pos_cdf: Vec<(String, f64)> = {
        let total: f64 = params.pos_labels.iter().map(|(_, w)| w).sum();
        let mut acc = 0.0;
        params
            .pos_labels
            .iter()
            .map(|(label, w)| {
                acc += w / total;
                (label.clone(), acc)
            })
            .collect()
    };

    // The engine applies the drawn mapping so digraph segmentation follows
    // exactly the transliterator's greedy semantics.
    let base_rules = GraphemeRuleSet::new(
        truth.rule_rows.iter().map(|(s, t)| (s.chars().collect(), t.clone())).collect(),
        HashMap::new(),
        "synth-mapping",
    );

    for _ in 0..params.n_pairs {
        let mut accepted = false;
        for _attempt in 0..MAX_RETRIES {
            let len = rng.random_range(params.min_len..=params.max_len);
            let source: String = (0..len)
                .map(|_| params.source_alphabet[rng.random_range(0..params.source_alphabet.len())])
                .collect();
            if seen_sources.contains(&source) {
                continue;
            }
            let mapped = transliterate(&base_rules, &source);
            let is_exception = rng.random::<f64>() < params.exception_fraction;
            let clean_target = if is_exception {
                let mut exception = None;
                for _ in 0..MAX_RETRIES {
                    let elen = rng.random_range(params.min_len..=params.max_len);
                    let cand: String = (0..elen)
                        .map(|_| {
                            params.target_alphabet
                                [rng.random_range(0..params.target_alphabet.len())]
                        })
                        .collect();
                    if cand != mapped && !seen_targets.contains(&cand) {
                        exception = Some(cand);
                        break;
                    }
                }
                match exception {
                    Some(e) => e,
                    None => continue,
                }
            } else {
                mapped
            };

            // Noise, re-drawn on target collisions.
            let mut noised = None;
            for _ in 0..MAX_RETRIES {
                let ops = if params.noise_rate > 0.0 {
                    apply_char_noise(
                        &clean_target,
                        params.noise_rate,
                        &params.target_alphabet,
                        &mut rng,
                    )
                } else {
                    Vec::new()
                };
                let candidate = crate::harness::apply_ops(&clean_target, &ops);
                if !candidate.is_empty() && !seen_targets.contains(&candidate) {
                    noised = Some((candidate, ops));
                    break;
                }
                if params.noise_rate == 0.0 {
                    break; // nothing to re-draw
                }
            }
            let Some((final_target, ops)) = noised else { continue };

            let pos = {
                let x: f64 = rng.random();
                pos_cdf
                    .iter()
                    .find(|(_, c)| x <= *c)
                    .map(|(l, _)| l.clone())
                    .unwrap_or_else(|| pos_cdf.last().unwrap().0.clone())
            };
            if is_exception {
                truth.exceptions.insert(source.clone(), clean_target.clone());
            }
            truth.per_pair.push(PairTruth {
                clean_target: clean_target.clone(),
                edit_ops: ops.len(),
                is_exception,
            });
            seen_sources.insert(source.clone());
            seen_targets.insert(final_target.clone());
            entries.push(LexiconEntry {
                tajik: source,
                persian: final_target,
                part_of_speech: pos,
                examples: Vec::new(),
                queried_word: None,
            });
            accepted = true;
            break;
        }
        if !accepted {
            return Err(SynthError::RetriesExhausted);
        }
    }
    Ok((entries, truth))
}

//! Skip-gram embeddings over subword units.
//!
//! One trainer serves both embedding kinds. Sequences are token streams;
//! each token decomposes into *input units* whose vectors are learned:
//!
//! - wordpiece: the token itself (tokens are BPE symbols)
//! - char-ngram: character n-grams of the boundary-marked token plus the
//!   whole-word unit
//!
//! A center token is represented as the mean of its unit vectors; context
//! prediction uses negative sampling (unigram^0.75 noise). Training is
//! single-threaded and fully seeded, so identical inputs give bitwise
//! identical models. Word vectors at inference are unit-vector means, which
//! is what lets character n-grams cover out-of-vocabulary words.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::corpus::LexiconEntry;
use crate::seed;
use crate::subword::{BpeModel, EOW_CHAR, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Wordpiece,
    CharNgram,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Wordpiece => "wordpiece",
            EmbeddingKind::CharNgram => "char-ngram",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EmbedError> {
        match s {
            "wordpiece" => Ok(EmbeddingKind::Wordpiece),
            "char-ngram" => Ok(EmbeddingKind::CharNgram),
            other => Err(EmbedError::ModelFormat(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("training stream is empty")]
    EmptyStream,
    #[error("no unit reaches min_count; vocabulary is empty")]
    EmptyVocabulary,
    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

/// Skip-gram hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipgramParams {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub negatives: usize,
    pub lr_start: f32,
    pub lr_end: f32,
    pub ngram_min: usize,
    pub ngram_max: usize,
}

impl Default for SkipgramParams {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 5,
            min_count: 2,
            epochs: 10,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            ngram_min: 3,
            ngram_max: 6,
        }
    }
}

/// A trained embedding model: unit → input vector.
///
/// Vectors live in one contiguous block indexed by unit name; at 200
/// dimensions over tens of thousands of units the per-vector allocation
/// overhead of a naive map-of-vecs is otherwise a double-digit-MB cost.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub kind: EmbeddingKind,
    pub params: SkipgramParams,
    pub seed: u64,
    index: HashMap<String, u32>,
    vectors: Vec<f32>,
}

/// One pseudo-sentence per record: the BPE symbols of the tajik form followed
/// by the BPE symbols of the persian form, so paired cross-script forms
/// co-occur inside the context window. Examples contribute one extra
/// sequence each when enabled.
pub fn build_training_stream(
    entries: &[LexiconEntry],
    bpe: &BpeModel,
    include_examples: bool,
) -> Vec<Vec<String>> {
    let symbols_of = |word: &str| -> Vec<String> {
        bpe.encode(word).iter().map(|&id| bpe.symbol(id).to_string()).collect()
    };
    let mut stream = Vec::with_capacity(entries.len());
    for e in entries {
        let mut sequence = symbols_of(&e.tajik);
        sequence.extend(symbols_of(&e.persian));
        stream.push(sequence);
        if include_examples {
            for example in &e.examples {
                let mut seq = Vec::new();
                for w in example.split_whitespace() {
                    seq.extend(symbols_of(w));
                }
                stream.push(seq);
            }
        }
    }
    stream
}

/// Whole-word token stream for the char-ngram kind: `[tajik, persian]` per
/// record, plus example words as extra sequences when enabled.
pub fn build_word_stream(entries: &[LexiconEntry], include_examples: bool) -> Vec<Vec<String>> {
    let mut stream = Vec::with_capacity(entries.len());
    for e in entries {
        stream.push(vec![e.tajik.clone(), e.persian.clone()]);
        if include_examples {
            for example in &e.examples {
                stream.push(example.split_whitespace().map(str::to_string).collect());
            }
        }
    }
    stream
}

/// Character n-grams of `<word>` for n in `[n_min, n_max]`, plus the whole
/// boundary-marked word when it is not already one of the n-grams.
fn char_ngrams(word: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let marked: Vec<char> =
        std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
    let mut units = Vec::new();
    for n in n_min..=n_max {
        if marked.len() < n {
            break;
        }
        for win in marked.windows(n) {
            units.push(win.iter().collect::<String>());
        }
    }
    if marked.len() > n_max || marked.len() < n_min {
        units.push(marked.iter().collect::<String>());
    }
    units
}

fn is_excluded_token(token: &str) -> bool {
    // The UNK placeholder and the bare end-of-word marker are not real
    // subword units; they carry no learnable content.
    token == "<unk>" || (token.chars().count() == 1 && token.starts_with(EOW_CHAR))
}

fn decompose(token: &str, kind: EmbeddingKind, params: &SkipgramParams) -> Vec<String> {
    if is_excluded_token(token) {
        return Vec::new();
    }
    match kind {
        EmbeddingKind::Wordpiece => vec![token.to_string()],
        EmbeddingKind::CharNgram => char_ngrams(token, params.ngram_min, params.ngram_max),
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram with negative sampling over the token stream.
/// Single-threaded by contract; the learning rate decays linearly from
/// `lr_start` to `lr_end` over all center positions of all epochs.
pub fn train_skipgram(
    stream: &[Vec<String>],
    kind: EmbeddingKind,
    params: SkipgramParams,
    train_seed: u64,
) -> Result<EmbeddingModel, EmbedError> {
    if stream.iter().all(|s| s.is_empty()) {
        return Err(EmbedError::EmptyStream);
    }

    // Token vocabulary (output side) with frequencies.
    let mut token_ids: HashMap<&str, u32> = HashMap::new();
    let mut token_names: Vec<&str> = Vec::new();
    let mut token_counts: Vec<u64> = Vec::new();
    for seq in stream {
        for tok in seq {
            if let Some(&id) = token_ids.get(tok.as_str()) {
                token_counts[id as usize] += 1;
            } else {
                token_ids.insert(tok, token_names.len() as u32);
                token_names.push(tok);
                token_counts.push(1);
            }
        }
    }

    // Input units from token decompositions, filtered by min_count.
    let mut unit_freq: HashMap<String, u64> = HashMap::new();
    for (id, tok) in token_names.iter().enumerate() {
        for unit in decompose(tok, kind, &params) {
            *unit_freq.entry(unit).or_insert(0) += token_counts[id];
        }
    }
    let mut unit_names: Vec<String> = unit_freq
        .iter()
        .filter(|(_, &f)| f >= params.min_count)
        .map(|(u, _)| u.clone())
        .collect();
    unit_names.sort();
    if unit_names.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    let unit_ids: HashMap<&str, u32> =
        unit_names.iter().enumerate().map(|(i, u)| (u.as_str(), i as u32)).collect();

    // Per-token unit bags (kept units only).
    let bags: Vec<Vec<u32>> = token_names
        .iter()
        .map(|tok| {
            decompose(tok, kind, &params)
                .iter()
                .filter_map(|u| unit_ids.get(u.as_str()).copied())
                .collect()
        })
        .collect();

    // Seeded init: unit vectors uniform in [-0.5/dim, +0.5/dim] in sorted
    // unit order; token output vectors start at zero.
    let dim = params.dim;
    let mut rng = seed::rng(train_seed);
    let half = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..unit_names.len() * dim)
        .map(|_| rng.random_range(-half..half))
        .collect();
    let mut output: Vec<f32> = vec![0.0; token_names.len() * dim];

    // Unigram^0.75 noise distribution over tokens.
    let noise_cdf: Vec<f64> = {
        let mut acc = 0.0;
        let weights: Vec<f64> = token_counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect()
    };
    let sample_noise = |rng: &mut rand_pcg::Pcg64| -> u32 {
        let x: f64 = rng.random::<f64>();
        noise_cdf.partition_point(|&c| c < x).min(noise_cdf.len() - 1) as u32
    };

    let sequences: Vec<Vec<u32>> = stream
        .iter()
        .map(|seq| seq.iter().map(|t| token_ids[t.as_str()]).collect())
        .collect();
    let total_positions: u64 =
        sequences.iter().map(|s| s.len() as u64).sum::<u64>() * params.epochs as u64;
    let mut processed: u64 = 0;
    let mut grad = vec![0.0f32; dim];

    for _epoch in 0..params.epochs {
        for seq in &sequences {
            for center in 0..seq.len() {
                let lr = params.lr_start
                    + (params.lr_end - params.lr_start)
                        * (processed as f32 / total_positions as f32);
                processed += 1;

                let bag = &bags[seq[center] as usize];
                let reach = rng.random_range(1..=params.window);
                if bag.is_empty() {
                    continue;
                }
                let inv_bag = 1.0 / bag.len() as f32;

                let lo = center.saturating_sub(reach);
                let hi = (center + reach).min(seq.len() - 1);
                #[allow(clippy::needless_range_loop)] // positional window around `center`
                for ctx in lo..=hi {
                    if ctx == center {
                        continue;
                    }
                    let positive = seq[ctx];

                    // v_in = mean of bag unit vectors
                    let mut v_in = vec![0.0f32; dim];
                    for &u in bag {
                        let row = &input[u as usize * dim..(u as usize + 1) * dim];
                        for (a, b) in v_in.iter_mut().zip(row) {
                            *a += b;
                        }
                    }
                    for a in v_in.iter_mut() {
                        *a *= inv_bag;
                    }

                    grad.fill(0.0);
                    for k in 0..=params.negatives {
                        let (target, label) = if k == 0 {
                            (positive, 1.0f32)
                        } else {
                            let t = sample_noise(&mut rng);
                            if t == positive {
                                continue;
                            }
                            (t, 0.0f32)
                        };
                        let row =
                            &mut output[target as usize * dim..(target as usize + 1) * dim];
                        let dot: f32 = v_in.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
                        let g = lr * (label - sigmoid(dot));
                        for ((ga, oa), ia) in grad.iter_mut().zip(row.iter_mut()).zip(&v_in) {
                            *ga += g * *oa;
                            *oa += g * *ia;
                        }
                    }
                    for &u in bag {
                        let row =
                            &mut input[u as usize * dim..(u as usize + 1) * dim];
                        for (ia, ga) in row.iter_mut().zip(&grad) {
                            *ia += *ga * inv_bag;
                        }
                    }
                }
            }
        }
    }

    // The input block is already laid out per sorted unit; it becomes the
    // model's storage without a copy.
    let index = unit_names.into_iter().enumerate().map(|(i, n)| (n, i as u32)).collect();
    Ok(EmbeddingModel { kind, params, seed: train_seed, index, vectors: input })
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn unit_count(&self) -> usize {
        self.index.len()
    }

    pub fn unit_vector(&self, unit: &str) -> Option<&[f32]> {
        let dim = self.params.dim;
        self.index.get(unit).map(|&i| &self.vectors[i as usize * dim..(i as usize + 1) * dim])
    }

    /// The input units a word decomposes into for this model's kind.
    /// Wordpiece decomposition needs the BPE model that trained the stream.
    pub fn word_units(&self, word: &str, bpe: Option<&BpeModel>) -> Vec<String> {
        match self.kind {
            EmbeddingKind::Wordpiece => {
                let Some(bpe) = bpe else { return Vec::new() };
                bpe.encode(word)
                    .iter()
                    .filter(|&&id| id != UNK_ID)
                    .map(|&id| bpe.symbol(id).to_string())
                    .filter(|s| !is_excluded_token(s))
                    .collect()
            }
            EmbeddingKind::CharNgram => {
                char_ngrams(word, self.params.ngram_min, self.params.ngram_max)
            }
        }
    }

    /// Mean of the vectors of the word's known units; `None` when no
    /// constituent unit is in the table.
    pub fn word_vector(&self, word: &str, bpe: Option<&BpeModel>) -> Option<Vec<f32>> {
        let mut acc = vec![0.0f32; self.params.dim];
        let mut known = 0usize;
        for unit in self.word_units(word, bpe) {
            if let Some(vec) = self.unit_vector(&unit) {
                for (a, b) in acc.iter_mut().zip(vec) {
                    *a += b;
                }
                known += 1;
            }
        }
        if known == 0 {
            return None;
        }
        let inv = 1.0 / known as f32;
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Some(acc)
    }

    /// Versioned text serialization with units in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "embedding-model v1").unwrap();
        writeln!(out, "kind\t{}", self.kind.as_str()).unwrap();
        writeln!(out, "dim\t{}", self.params.dim).unwrap();
        writeln!(out, "window\t{}", self.params.window).unwrap();
        writeln!(out, "min_count\t{}", self.params.min_count).unwrap();
        writeln!(out, "epochs\t{}", self.params.epochs).unwrap();
        writeln!(out, "negatives\t{}", self.params.negatives).unwrap();
        writeln!(out, "ngram_min\t{}", self.params.ngram_min).unwrap();
        writeln!(out, "ngram_max\t{}", self.params.ngram_max).unwrap();
        writeln!(out, "lr_start\t{}", self.params.lr_start).unwrap();
        writeln!(out, "lr_end\t{}", self.params.lr_end).unwrap();
        writeln!(out, "seed\t{}", self.seed).unwrap();
        writeln!(out, "units\t{}", self.index.len()).unwrap();
        let mut names: Vec<&String> = self.index.keys().collect();
        names.sort();
        for name in names {
            out.push_str(name);
            for x in self.unit_vector(name).expect("indexed unit") {
                write!(out, "\t{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EmbedError> {
        let bad = |what: &str| EmbedError::ModelFormat(what.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("embedding-model v1") {
            return Err(bad("missing or unsupported header"));
        }
        let mut field = |name: &str| -> Result<String, EmbedError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (key, value) = line.split_once('\t').ok_or_else(|| bad("malformed header"))?;
            if key != name {
                return Err(EmbedError::ModelFormat(format!("expected {name}, got {key}")));
            }
            Ok(value.to_string())
        };
        let kind = EmbeddingKind::parse(&field("kind")?)?;
        let parse_usize =
            |v: String| -> Result<usize, EmbedError> { v.parse().map_err(|_| bad("bad integer")) };
        let dim = parse_usize(field("dim")?)?;
        let window = parse_usize(field("window")?)?;
        let min_count: u64 = field("min_count")?.parse().map_err(|_| bad("bad min_count"))?;
        let epochs = parse_usize(field("epochs")?)?;
        let negatives = parse_usize(field("negatives")?)?;
        let ngram_min = parse_usize(field("ngram_min")?)?;
        let ngram_max = parse_usize(field("ngram_max")?)?;
        let lr_start: f32 = field("lr_start")?.parse().map_err(|_| bad("bad lr_start"))?;
        let lr_end: f32 = field("lr_end")?.parse().map_err(|_| bad("bad lr_end"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let units = parse_usize(field("units")?)?;
        let mut index = HashMap::with_capacity(units);
        let mut vectors = Vec::with_capacity(units * dim);
        for i in 0..units {
            let line = lines.next().ok_or_else(|| bad("truncated unit rows"))?;
            let mut cols = line.split('\t');
            let name = cols.next().ok_or_else(|| bad("empty unit row"))?.to_string();
            let before = vectors.len();
            for c in cols {
                vectors.push(c.parse().map_err(|_| bad("bad vector component"))?);
            }
            if vectors.len() - before != dim {
                return Err(bad("vector dimension mismatch"));
            }
            index.insert(name, i as u32);
        }
        Ok(Self {
            kind,
            params: SkipgramParams {
                dim,
                window,
                min_count,
                epochs,
                negatives,
                lr_start,
                lr_end,
                ngram_min,
                ngram_max,
            },
            seed,
            index,
            vectors,
        })
    }
}

/// Cosine similarity rescaled to [0, 1]; a zero vector gives the neutral 0.5.
pub fn cosine01(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        dot += f64::from(a) * f64::from(b);
        nu += f64::from(a) * f64::from(a);
        nv += f64::from(b) * f64::from(b);
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.5;
    }
    let cos = (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0);
    (1.0 + cos) / 2.0
}

//! Lexicon ingestion: JSONL parsing, normalization, deduplication,
//! deterministic stratified splitting, and dataset statistics.
//!
//! Malformed lines never abort a run; they become [`Reject`]s with a line
//! number and reason so curation problems stay visible and recoverable.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufReader, Read};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::seed;
use crate::strmetrics::levenshtein;

/// One Tajik–Persian pair with part of speech and optional usage examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub tajik: String,
    pub persian: String,
    #[serde(default = "default_pos")]
    pub part_of_speech: String,
    #[serde(default)]
    pub examples: Vec<String>,
    #[serde(rename = "_queried_word", default, skip_serializing_if = "Option::is_none")]
    pub queried_word: Option<String>,
}

fn default_pos() -> String {
    "unclassified".to_string()
}

/// A line that could not be turned into an entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based input line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub entries: Vec<LexiconEntry>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8: {0}")]
    Utf8(#[from] std::str::Utf8Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid fold table: {0}")]
    FoldTable(String),
    #[error("invalid split spec: {0}")]
    SplitSpec(String),
    #[error("cannot split an empty entry list")]
    EmptySplit,
}

/// Parses newline-delimited JSON records. Well-formed lines with the two
/// required string fields become entries; everything else becomes a reject
/// carrying its line number. Non-UTF-8 input is the only fatal error.
pub fn parse_jsonl<R: Read>(reader: R) -> Result<ParseOutcome, CorpusError> {
    let mut buf = Vec::new();
    BufReader::new(reader).read_to_end(&mut buf)?;
    let text = std::str::from_utf8(&buf)?;

    let mut out = ParseOutcome::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(entry) => out.entries.push(entry),
            Err(reason) => out.rejects.push(Reject { line: line_no, reason }),
        }
    }
    Ok(out)
}

fn parse_line(line: &str) -> Result<LexiconEntry, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("line is not a JSON object")?;

    let required = |field: &str| -> Result<String, String> {
        match obj.get(field) {
            None => Err(format!("missing field {field}")),
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("field {field} is not a string")),
        }
    };
    let tajik = required("tajik")?;
    let persian = required("persian")?;

    let part_of_speech = match obj.get("part_of_speech") {
        None | Some(serde_json::Value::Null) => default_pos(),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(_) => return Err("field part_of_speech is not a string".into()),
    };
    let examples = match obj.get("examples") {
        None | Some(serde_json::Value::Null) => Vec::new(),
        Some(serde_json::Value::Array(items)) => {
            let mut v = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    serde_json::Value::String(s) => v.push(s.clone()),
                    _ => return Err("field examples must contain only strings".into()),
                }
            }
            v
        }
        Some(_) => return Err("field examples is not an array".into()),
    };
    let queried_word = match obj.get("_queried_word") {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("field _queried_word is not a string".into()),
    };

    Ok(LexiconEntry { tajik, persian, part_of_speech, examples, queried_word })
}

/// Serializes entries back to JSONL (one compact object per line).
pub fn write_jsonl(entries: &[LexiconEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Normalization policy: the Tajik ё→е fold switch and the per-character
/// Perso-Arabic fold table. Fold tables ship as editable TSV data, not code.
#[derive(Debug, Clone)]
pub struct NormalizationPolicy {
    pub fold_yo: bool,
    persian_folds: HashMap<char, char>,
    /// Closed POS label set; unknown labels map to "unclassified".
    pos_labels: HashSet<String>,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self::from_tables(
            true,
            include_str!("../data/persian_folds.tsv"),
            include_str!("../data/pos_labels.tsv"),
        )
        .expect("embedded default tables are valid")
    }
}

impl NormalizationPolicy {
    /// Builds a policy from TSV fold rows (`variant<TAB>canonical`) and a
    /// POS label list (one label per line, `#` comments).
    pub fn from_tables(
        fold_yo: bool,
        folds_tsv: &str,
        pos_lines: &str,
    ) -> Result<Self, CorpusError> {
        let mut persian_folds = HashMap::new();
        for (i, line) in folds_tsv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (src, dst) = match (cols.next(), cols.next()) {
                (Some(s), Some(d)) => (s.trim(), d.trim()),
                _ => {
                    return Err(CorpusError::FoldTable(format!("line {}: need two columns", i + 1)))
                }
            };
            let (mut sc, mut dc) = (src.chars(), dst.chars());
            match (sc.next(), sc.next(), dc.next(), dc.next()) {
                (Some(s), None, Some(d), None) => {
                    if persian_folds.insert(s, d).is_some() {
                        return Err(CorpusError::FoldTable(format!("duplicate source {s:?}")));
                    }
                }
                _ => {
                    return Err(CorpusError::FoldTable(format!(
                        "line {}: sources and targets must be single characters",
                        i + 1
                    )))
                }
            }
        }
        // A target that is itself a source would make folding cyclic.
        for target in persian_folds.values() {
            if persian_folds.contains_key(target) {
                return Err(CorpusError::FoldTable(format!(
                    "fold target {target:?} is also a fold source"
                )));
            }
        }
        let pos_labels = pos_lines
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Ok(Self { fold_yo, persian_folds, pos_labels })
    }

    pub fn canonical_pos(&self, label: &str) -> String {
        if self.pos_labels.contains(label) {
            label.to_string()
        } else {
            "unclassified".to_string()
        }
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for c in s.trim().chars() {
        if c.is_whitespace() {
            in_ws = true;
        } else {
            if in_ws {
                out.push(' ');
            }
            in_ws = false;
            out.push(c);
        }
    }
    out
}

fn fold_chars(s: &str, folds: &HashMap<char, char>) -> String {
    s.chars().map(|c| folds.get(&c).copied().unwrap_or(c)).collect()
}

/// NFC + fold + whitespace cleanup, iterated to a fixpoint. Iteration makes
/// normalization idempotent even when folding exposes new composition
/// opportunities.
fn normalize_text(s: &str, folds: &HashMap<char, char>) -> String {
    let mut cur = s.to_string();
    for _ in 0..8 {
        let next = collapse_whitespace(&fold_chars(&cur.nfc().collect::<String>(), folds));
        if next == cur {
            return next;
        }
        cur = next;
    }
    cur
}

fn yo_fold(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'ё' => 'е',
            'Ё' => 'Е',
            other => other,
        })
        .collect()
}

/// Normalizes every string field of an entry: NFC, policy folds, whitespace
/// cleanup, and POS canonicalization. Total: never fails.
pub fn normalize_entry(entry: &LexiconEntry, policy: &NormalizationPolicy) -> LexiconEntry {
    let no_folds = HashMap::new();
    let tajik_side = |s: &str| {
        let t = normalize_text(s, &no_folds);
        if policy.fold_yo {
            yo_fold(&t)
        } else {
            t
        }
    };
    LexiconEntry {
        tajik: tajik_side(&entry.tajik),
        persian: normalize_text(&entry.persian, &policy.persian_folds),
        part_of_speech: policy.canonical_pos(&normalize_text(&entry.part_of_speech, &no_folds)),
        examples: entry.examples.iter().map(|e| tajik_side(e)).collect(),
        queried_word: entry.queried_word.as_deref().map(tajik_side),
    }
}

/// Allowed character set for one script (plus space/hyphen/apostrophe,
/// which are always permitted).
#[derive(Debug, Clone)]
pub struct Charset {
    allowed: HashSet<char>,
}

impl Charset {
    pub fn from_chars(chars: &str) -> Self {
        let mut allowed: HashSet<char> = chars.chars().filter(|c| !c.is_whitespace()).collect();
        allowed.extend([' ', '-', '\'', '\u{02BC}', '\u{2019}']);
        Self { allowed }
    }

    pub fn tajik() -> Self {
        Self::from_chars(include_str!("../data/tajik_alphabet.txt"))
    }

    pub fn persian() -> Self {
        Self::from_chars(include_str!("../data/persian_alphabet.txt"))
    }

    pub fn check(&self, s: &str) -> Result<(), char> {
        match s.chars().find(|c| !self.allowed.contains(c)) {
            None => Ok(()),
            Some(c) => Err(c),
        }
    }
}

/// Parse + normalize + validate in one pass. Entries that are empty or out of
/// alphabet after normalization join the rejects; `charsets` of `None` skips
/// alphabet checking (synthetic lexica use their own symbol sets).
pub fn ingest<R: Read>(
    reader: R,
    policy: &NormalizationPolicy,
    charsets: Option<(&Charset, &Charset)>,
) -> Result<ParseOutcome, CorpusError> {
    let parsed = parse_jsonl(reader)?;
    let mut out = ParseOutcome { entries: Vec::new(), rejects: parsed.rejects };
    // parse_jsonl preserves input order and rejected lines are known, so the
    // surviving entries own the remaining non-blank line numbers in order.
    let mut line_of_entry = Vec::with_capacity(parsed.entries.len());
    {
        let reject_lines: HashSet<usize> = out.rejects.iter().map(|r| r.line).collect();
        let mut line = 0usize;
        while line_of_entry.len() < parsed.entries.len() {
            line += 1;
            if !reject_lines.contains(&line) {
                line_of_entry.push(line);
            }
        }
    }
    for (entry, line) in parsed.entries.iter().zip(line_of_entry) {
        let norm = normalize_entry(entry, policy);
        if norm.tajik.is_empty() {
            out.rejects.push(Reject { line, reason: "empty tajik after normalization".into() });
            continue;
        }
        if norm.persian.is_empty() {
            out.rejects.push(Reject { line, reason: "empty persian after normalization".into() });
            continue;
        }
        if let Some((tajik_cs, persian_cs)) = charsets {
            if let Err(c) = tajik_cs.check(&norm.tajik) {
                out.rejects.push(Reject {
                    line,
                    reason: format!("tajik contains out-of-alphabet character {c:?}"),
                });
                continue;
            }
            if let Err(c) = persian_cs.check(&norm.persian) {
                out.rejects.push(Reject {
                    line,
                    reason: format!("persian contains out-of-alphabet character {c:?}"),
                });
                continue;
            }
        }
        out.entries.push(norm);
    }
    out.rejects.sort_by_key(|r| r.line);
    Ok(out)
}

/// Why an entry was dropped during deduplication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RemovalReason {
    ExactDuplicate,
    /// Same tajik headword, persian within Levenshtein distance < 2 of the
    /// kept entry's persian.
    NearDuplicate { kept_persian: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Removal {
    /// Index into the input entry list.
    pub index: usize,
    pub tajik: String,
    pub persian: String,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DedupeReport {
    pub removals: Vec<Removal>,
}

/// Removes exact (tajik, persian) duplicates, then merges near-duplicate
/// persian forms (Levenshtein < 2) under identical tajik headwords, keeping
/// first occurrences.
pub fn dedupe(entries: &[LexiconEntry]) -> (Vec<LexiconEntry>, DedupeReport) {
    let mut report = DedupeReport::default();
    let mut seen_exact: HashSet<(&str, &str)> = HashSet::new();
    // persian forms already kept per tajik headword
    let mut kept_by_tajik: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut kept = Vec::with_capacity(entries.len());

    for (index, entry) in entries.iter().enumerate() {
        if !seen_exact.insert((entry.tajik.as_str(), entry.persian.as_str())) {
            report.removals.push(Removal {
                index,
                tajik: entry.tajik.clone(),
                persian: entry.persian.clone(),
                reason: RemovalReason::ExactDuplicate,
            });
            continue;
        }
        let group = kept_by_tajik.entry(entry.tajik.as_str()).or_default();
        if let Some(kept_p) = group.iter().find(|p| levenshtein(p, &entry.persian) < 2) {
            report.removals.push(Removal {
                index,
                tajik: entry.tajik.clone(),
                persian: entry.persian.clone(),
                reason: RemovalReason::NearDuplicate { kept_persian: kept_p.to_string() },
            });
            continue;
        }
        group.push(entry.persian.as_str());
        kept.push(entry.clone());
    }
    (kept, report)
}

/// Ratios, seed, and stratification key for deterministic splitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub dev_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
    /// Field to stratify on; only "part_of_speech" is currently meaningful.
    pub stratify_key: String,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            dev_ratio: 0.1,
            test_ratio: 0.1,
            seed: 42,
            stratify_key: "part_of_speech".to_string(),
        }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<(), CorpusError> {
        let ratios = [self.train_ratio, self.dev_ratio, self.test_ratio];
        if ratios.iter().any(|r| *r <= 0.0) {
            return Err(CorpusError::SplitSpec("ratios must be positive".into()));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::SplitSpec(format!("ratios sum to {sum}, expected 1")));
        }
        if self.stratify_key != "part_of_speech" {
            return Err(CorpusError::SplitSpec(format!(
                "unsupported stratify key {:?}",
                self.stratify_key
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SplitOutcome {
    pub train: Vec<LexiconEntry>,
    pub dev: Vec<LexiconEntry>,
    pub test: Vec<LexiconEntry>,
    pub warnings: Vec<String>,
}

/// Largest-remainder apportionment of `n` items over three ratio buckets.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        counts[order[i % 3]] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Splits entries into train/dev/test within each stratum: seeded shuffle,
/// then largest-remainder partition. Strata smaller than 3 go entirely to
/// train (warned) so no dev/test cell can hold a lone unmatched label.
pub fn split(entries: &[LexiconEntry], spec: &SplitSpec) -> Result<SplitOutcome, CorpusError> {
    spec.validate()?;
    if entries.is_empty() {
        return Err(CorpusError::EmptySplit);
    }

    // Strata in first-occurrence order; membership by original index.
    let mut strata: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut stratum_of: HashMap<&str, usize> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        let key = e.part_of_speech.as_str();
        let s = *stratum_of.entry(key).or_insert_with(|| {
            strata.push((key, Vec::new()));
            strata.len() - 1
        });
        strata[s].1.push(i);
    }

    let mut outcome = SplitOutcome::default();
    let mut assignment: Vec<(usize, u8)> = Vec::with_capacity(entries.len());
    for (label, mut members) in strata {
        if members.len() < 3 {
            outcome.warnings.push(format!(
                "stratum {:?} has {} entries; assigned whole stratum to train",
                label,
                members.len()
            ));
            assignment.extend(members.into_iter().map(|i| (i, 0u8)));
            continue;
        }
        let mut rng = seed::rng(seed::mix(spec.seed, seed::fnv1a64(label.as_bytes())));
        members.shuffle(&mut rng);
        let [n_train, n_dev, _] =
            apportion(members.len(), [spec.train_ratio, spec.dev_ratio, spec.test_ratio]);
        for (pos, idx) in members.into_iter().enumerate() {
            let bucket = if pos < n_train {
                0
            } else if pos < n_train + n_dev {
                1
            } else {
                2
            };
            assignment.push((idx, bucket));
        }
    }
    assignment.sort_unstable();
    for (idx, bucket) in assignment {
        let e = entries[idx].clone();
        match bucket {
            0 => outcome.train.push(e),
            1 => outcome.dev.push(e),
            _ => outcome.test.push(e),
        }
    }
    Ok(outcome)
}

/// Corpus-level statistics in the shape of the dataset summary table.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub records: usize,
    pub tajik_types: usize,
    pub persian_types: usize,
    pub queried_types: usize,
    pub mean_examples: f64,
    pub mean_example_len: f64,
    pub pos_histogram: BTreeMap<String, usize>,
}

pub fn stats(entries: &[LexiconEntry]) -> CorpusStats {
    let mut tajik: HashSet<&str> = HashSet::new();
    let mut persian: HashSet<&str> = HashSet::new();
    let mut queried: HashSet<&str> = HashSet::new();
    let mut pos_histogram: BTreeMap<String, usize> = BTreeMap::new();
    let mut example_count = 0usize;
    let mut example_chars = 0usize;
    for e in entries {
        tajik.insert(&e.tajik);
        persian.insert(&e.persian);
        if let Some(q) = &e.queried_word {
            queried.insert(q);
        }
        *pos_histogram.entry(e.part_of_speech.clone()).or_insert(0) += 1;
        example_count += e.examples.len();
        example_chars += e.examples.iter().map(|x| x.chars().count()).sum::<usize>();
    }
    let records = entries.len();
    CorpusStats {
        records,
        tajik_types: tajik.len(),
        persian_types: persian.len(),
        queried_types: queried.len(),
        mean_examples: if records == 0 { 0.0 } else { example_count as f64 / records as f64 },
        mean_example_len: if example_count == 0 {
            0.0
        } else {
            example_chars as f64 / example_count as f64
        },
        pos_histogram,
    }
}

impl CorpusStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,value\n");
        out.push_str(&format!("records,{}\n", self.records));
        out.push_str(&format!("tajik_types,{}\n", self.tajik_types));
        out.push_str(&format!("persian_types,{}\n", self.persian_types));
        out.push_str(&format!("queried_types,{}\n", self.queried_types));
        out.push_str(&format!("mean_examples,{:.3}\n", self.mean_examples));
        out.push_str(&format!("mean_example_len,{:.3}\n", self.mean_example_len));
        for (pos, n) in &self.pos_histogram {
            out.push_str(&format!("pos:{pos},{n}\n"));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| statistic | value |\n|---|---|\n");
        out.push_str(&format!("| records | {} |\n", self.records));
        out.push_str(&format!("| tajik types | {} |\n", self.tajik_types));
        out.push_str(&format!("| persian types | {} |\n", self.persian_types));
        out.push_str(&format!("| distinct queried forms | {} |\n", self.queried_types));
        out.push_str(&format!("| avg examples per record | {:.3} |\n", self.mean_examples));
        out.push_str(&format!(
            "| avg example length (chars) | {:.3} |\n",
            self.mean_example_len
        ));
        for (pos, n) in &self.pos_histogram {
            out.push_str(&format!("| pos: {pos} | {n} |\n"));
        }
        out
    }
}

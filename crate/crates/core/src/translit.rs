//! Rule-based transliteration, coarse romanization, and script-specific
//! phonetic (Soundex-style) coding.
//!
//! The transliterator is a pure function of its rule set: full-word
//! exceptions first, then greedy longest-match application of ordered
//! grapheme rules. Rule sets and phonetic class tables ship as editable TSV
//! data; nothing linguistic is hard-coded.

use std::collections::HashMap;
use std::str::FromStr;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TranslitError {
    #[error("invalid rule table: {0}")]
    RuleTable(String),
    #[error("invalid phonetic table: {0}")]
    PhoneticTable(String),
    #[error("unknown script id {0:?}")]
    UnknownScript(String),
    #[error("cannot compute a phonetic code for an empty word")]
    EmptyWord,
}

/// Writing system selector for romanization and phonetic coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Script {
    Tajik,
    Persian,
}

impl FromStr for Script {
    type Err = TranslitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tajik" | "tj" | "cyrillic" => Ok(Script::Tajik),
            "persian" | "fa" | "perso-arabic" => Ok(Script::Persian),
            other => Err(TranslitError::UnknownScript(other.to_string())),
        }
    }
}

/// Ordered grapheme rules plus a full-word exception map.
///
/// Rules apply longest-source-first; between equal lengths, file order
/// decides (relevant only through the stored ordering, since duplicate
/// sources are rejected at load).
#[derive(Debug, Clone)]
pub struct GraphemeRuleSet {
    rules: Vec<(Vec<char>, String)>,
    exceptions: HashMap<String, String>,
    pub version: String,
    /// Rule indices grouped by first source char, longest source first.
    by_first: HashMap<char, Vec<usize>>,
}

/// Transliteration output plus the count of characters no rule covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslitOutput {
    pub text: String,
    pub unmapped: usize,
}

impl GraphemeRuleSet {
    /// Parses `source<TAB>target` rule rows and `word<TAB>word` exception
    /// rows. `#` starts a comment line; empty targets are allowed (grapheme
    /// dropped). All cells are NFC-normalized.
    pub fn from_tsv(rules_tsv: &str, exceptions_tsv: &str, version: &str) -> Result<Self, TranslitError> {
        let mut rules: Vec<(Vec<char>, String)> = Vec::new();
        for (i, line) in rules_tsv.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let source = cols.next().unwrap_or("").trim();
            let target = cols.next().unwrap_or("").trim();
            if source.is_empty() {
                return Err(TranslitError::RuleTable(format!("line {}: empty source", i + 1)));
            }
            let source: Vec<char> = source.nfc().collect();
            if rules.iter().any(|(s, _)| *s == source) {
                return Err(TranslitError::RuleTable(format!(
                    "duplicate source {:?}",
                    source.iter().collect::<String>()
                )));
            }
            rules.push((source, target.nfc().collect()));
        }
        let mut exceptions = HashMap::new();
        for (i, line) in exceptions_tsv.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (word, target) = match (cols.next(), cols.next()) {
                (Some(w), Some(t)) => (w.trim(), t.trim()),
                _ => {
                    return Err(TranslitError::RuleTable(format!(
                        "exceptions line {}: need two columns",
                        i + 1
                    )))
                }
            };
            exceptions.insert(word.nfc().collect::<String>(), target.nfc().collect::<String>());
        }
        Ok(Self::new(rules, exceptions, version))
    }

    pub fn new(
        rules: Vec<(Vec<char>, String)>,
        exceptions: HashMap<String, String>,
        version: &str,
    ) -> Self {
        let mut by_first: HashMap<char, Vec<usize>> = HashMap::new();
        for (idx, (source, _)) in rules.iter().enumerate() {
            by_first.entry(source[0]).or_default().push(idx);
        }
        for indices in by_first.values_mut() {
            // longest first; stable on file order within a length
            indices.sort_by_key(|&i| (std::cmp::Reverse(rules[i].0.len()), i));
        }
        Self { rules, exceptions, version: version.to_string(), by_first }
    }

    /// The shipped default Tajik→Perso-Arabic tables.
    pub fn default_tajik_persian() -> Self {
        Self::from_tsv(
            include_str!("../data/translit_rules.tsv"),
            include_str!("../data/translit_exceptions.tsv"),
            "default-tj-fa-1",
        )
        .expect("embedded default rule tables are valid")
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn exception_count(&self) -> usize {
        self.exceptions.len()
    }

    pub fn rules(&self) -> impl Iterator<Item = (String, &str)> + '_ {
        self.rules.iter().map(|(s, t)| (s.iter().collect(), t.as_str()))
    }

    /// Transliterates one word, reporting how many characters had no rule.
    pub fn apply(&self, word: &str) -> TranslitOutput {
        if let Some(target) = self.exceptions.get(word) {
            return TranslitOutput { text: target.clone(), unmapped: 0 };
        }
        let chars: Vec<char> = word.chars().collect();
        let mut text = String::with_capacity(word.len());
        let mut unmapped = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let rule = self.by_first.get(&chars[i]).and_then(|candidates| {
                candidates
                    .iter()
                    .map(|&idx| &self.rules[idx])
                    .find(|(source, _)| chars[i..].starts_with(source))
            });
            match rule {
                Some((source, target)) => {
                    text.push_str(target);
                    i += source.len();
                }
                None => {
                    text.push(chars[i]);
                    unmapped += 1;
                    i += 1;
                }
            }
        }
        TranslitOutput { text, unmapped }
    }
}

/// Deterministic rule transliteration of a normalized word.
pub fn transliterate(rules: &GraphemeRuleSet, word: &str) -> String {
    rules.apply(word).text
}

/// Per-character romanization tables for both scripts.
#[derive(Debug, Clone)]
pub struct Romanizer {
    tajik: HashMap<char, String>,
    persian: HashMap<char, String>,
}

fn parse_char_map(tsv: &str, what: &str) -> Result<HashMap<char, String>, TranslitError> {
    let mut map = HashMap::new();
    for (i, line) in tsv.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (src, dst) = match (cols.next(), cols.next()) {
            (Some(s), Some(d)) => (s.trim(), d.trim()),
            _ => {
                return Err(TranslitError::RuleTable(format!(
                    "{what} line {}: need two columns",
                    i + 1
                )))
            }
        };
        let mut sc = src.chars();
        match (sc.next(), sc.next()) {
            (Some(c), None) => {
                if map.insert(c, dst.to_string()).is_some() {
                    return Err(TranslitError::RuleTable(format!(
                        "{what}: duplicate source {c:?}"
                    )));
                }
            }
            _ => {
                return Err(TranslitError::RuleTable(format!(
                    "{what} line {}: source must be a single character",
                    i + 1
                )))
            }
        }
    }
    Ok(map)
}

impl Default for Romanizer {
    fn default() -> Self {
        Self::from_tsv(
            include_str!("../data/romanize_tajik.tsv"),
            include_str!("../data/romanize_persian.tsv"),
        )
        .expect("embedded default romanization tables are valid")
    }
}

impl Romanizer {
    pub fn from_tsv(tajik_tsv: &str, persian_tsv: &str) -> Result<Self, TranslitError> {
        Ok(Self {
            tajik: parse_char_map(tajik_tsv, "tajik romanization")?,
            persian: parse_char_map(persian_tsv, "persian romanization")?,
        })
    }

    /// Maps a word into a common coarse Latin alphabet. Characters already in
    /// printable ASCII pass through; anything else without a table row
    /// becomes `?`.
    pub fn romanize(&self, word: &str, script: Script) -> String {
        let table = match script {
            Script::Tajik => &self.tajik,
            Script::Persian => &self.persian,
        };
        let mut out = String::with_capacity(word.len());
        for c in word.chars() {
            if let Some(mapped) = table.get(&c) {
                out.push_str(mapped);
            } else if c.is_ascii() && (c.is_ascii_graphic() || c == ' ') {
                out.push(c);
            } else {
                out.push('?');
            }
        }
        out
    }
}

/// Character classes for one script's generalized Soundex code.
/// Class 0 marks vowels and other ignored characters.
#[derive(Debug, Clone)]
pub struct PhoneticTable {
    pub script: Script,
    classes: HashMap<char, u8>,
    pub code_len: usize,
}

impl PhoneticTable {
    pub fn from_tsv(tsv: &str, script: Script, code_len: usize) -> Result<Self, TranslitError> {
        let mut classes = HashMap::new();
        for (i, line) in tsv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (src, class) = match (cols.next(), cols.next()) {
                (Some(s), Some(c)) => (s.trim(), c.trim()),
                _ => {
                    return Err(TranslitError::PhoneticTable(format!(
                        "line {}: need two columns",
                        i + 1
                    )))
                }
            };
            let mut sc = src.chars();
            let c = match (sc.next(), sc.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(TranslitError::PhoneticTable(format!(
                        "line {}: source must be a single character",
                        i + 1
                    )))
                }
            };
            let class: u8 = class.parse().map_err(|_| {
                TranslitError::PhoneticTable(format!("line {}: bad class {class:?}", i + 1))
            })?;
            if class > 9 {
                return Err(TranslitError::PhoneticTable(format!(
                    "line {}: class must be 0..=9",
                    i + 1
                )));
            }
            if classes.insert(c, class).is_some() {
                return Err(TranslitError::PhoneticTable(format!("duplicate character {c:?}")));
            }
        }
        if code_len < 1 {
            return Err(TranslitError::PhoneticTable("code length must be >= 1".into()));
        }
        Ok(Self { script, classes, code_len })
    }

    pub fn default_tajik() -> Self {
        Self::from_tsv(include_str!("../data/phonetic_tajik.tsv"), Script::Tajik, 4)
            .expect("embedded tajik phonetic table is valid")
    }

    pub fn default_persian() -> Self {
        Self::from_tsv(include_str!("../data/phonetic_persian.tsv"), Script::Persian, 4)
            .expect("embedded persian phonetic table is valid")
    }

    fn class_of(&self, c: char) -> u8 {
        // Unknown characters are treated as ignorable, like vowels.
        c.to_lowercase().next().and_then(|lc| self.classes.get(&lc).copied()).unwrap_or(0)
    }
}

/// Generalized Soundex: the first character's class letter, then the digit
/// classes of the remaining characters with class 0 dropped and adjacent
/// equal digits collapsed, zero-padded or truncated to the code length.
pub fn phonetic_code(word: &str, table: &PhoneticTable) -> Result<String, TranslitError> {
    let chars: Vec<char> = word.chars().collect();
    let Some((&first, rest)) = chars.split_first() else {
        return Err(TranslitError::EmptyWord);
    };
    let mut code = String::with_capacity(table.code_len);
    code.push((b'A' + table.class_of(first)) as char);
    let mut prev: Option<u8> = None;
    for &c in rest {
        let class = table.class_of(c);
        if class == 0 {
            continue; // dropped before collapsing
        }
        if prev != Some(class) {
            code.push((b'0' + class) as char);
            prev = Some(class);
        }
        if code.len() == table.code_len {
            break;
        }
    }
    while code.len() < table.code_len {
        code.push('0');
    }
    Ok(code)
}

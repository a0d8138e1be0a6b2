//! Joint BPE subword tokenizer.
//!
//! Plain byte-pair encoding over whitespace-split words with an end-of-word
//! marker: repeatedly merge the most frequent adjacent symbol pair, ties
//! broken by lexicographic pair order so training is platform-independent.
//! Encoding replays the learned merges by rank.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

/// Internal end-of-word marker character. Private-use scalar so it can never
/// collide with corpus text; input containing it is treated as unknown.
pub const EOW_CHAR: char = '\u{E000}';

/// Reserved id for characters outside the base alphabet.
pub const UNK_ID: u32 = 0;
const UNK_SYMBOL: &str = "<unk>";

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocab size {requested} does not exceed base alphabet size {alphabet}")]
    VocabTooSmall { requested: usize, alphabet: usize },
    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

/// A trained BPE model: base alphabet, ordered merges, and the symbol→id
/// vocabulary. Ids are stable: 0 is UNK, then the sorted alphabet, then one
/// id per merge in learning order.
#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    /// (left id, right id) per merge, in learning order.
    merges: Vec<(u32, u32)>,
    /// (left, right) -> (rank, merged id)
    merge_table: HashMap<(u32, u32), (u32, u32)>,
    alphabet_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

fn word_symbols(word: &str) -> Vec<String> {
    word.chars()
        .map(|c| if c == EOW_CHAR { UNK_SYMBOL.to_string() } else { c.to_string() })
        .chain(std::iter::once(EOW_CHAR.to_string()))
        .collect()
}

impl BpeModel {
    /// Trains on the given corpus lines (whitespace-split into words) until
    /// the vocabulary reaches `vocab_size` or no pair occurs at least twice.
    pub fn train(corpus: &[String], vocab_size: usize, seed: u64) -> Result<Self, SubwordError> {
        // Unique words with frequencies.
        let mut word_freq: HashMap<&str, u64> = HashMap::new();
        for line in corpus {
            for w in line.split_whitespace() {
                *word_freq.entry(w).or_insert(0) += 1;
            }
        }
        if word_freq.is_empty() {
            return Err(SubwordError::EmptyCorpus);
        }

        // Base alphabet: every corpus character plus the end-of-word marker,
        // as sorted strings for stable id assignment.
        let mut alphabet: HashSet<String> = HashSet::new();
        alphabet.insert(EOW_CHAR.to_string());
        for w in word_freq.keys() {
            for c in w.chars() {
                if c != EOW_CHAR {
                    alphabet.insert(c.to_string());
                }
            }
        }
        if vocab_size <= alphabet.len() {
            return Err(SubwordError::VocabTooSmall {
                requested: vocab_size,
                alphabet: alphabet.len(),
            });
        }

        let mut symbols: Vec<String> = vec![UNK_SYMBOL.to_string()];
        {
            let mut sorted: Vec<String> = alphabet.into_iter().collect();
            sorted.sort();
            symbols.extend(sorted);
        }
        let alphabet_len = symbols.len() - 1;
        let mut ids: HashMap<String, u32> =
            symbols.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();

        // Words as id sequences, deterministic order (by word string).
        let mut words: Vec<(Vec<u32>, u64)> = {
            let mut sorted: Vec<(&str, u64)> = word_freq.into_iter().collect();
            sorted.sort();
            sorted
                .into_iter()
                .map(|(w, f)| (word_symbols(w).iter().map(|s| ids[s]).collect(), f))
                .collect()
        };

        // Pair statistics with incremental maintenance.
        let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
        let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
        for (idx, (seq, freq)) in words.iter().enumerate() {
            for pair in seq.windows(2) {
                let key = (pair[0], pair[1]);
                *pair_counts.entry(key).or_insert(0) += *freq as i64;
                pair_words.entry(key).or_default().insert(idx);
            }
        }

        let max_merges = vocab_size - alphabet_len - 1;
        let mut merges: Vec<(u32, u32)> = Vec::new();
        let mut merge_table: HashMap<(u32, u32), (u32, u32)> = HashMap::new();

        while merges.len() < max_merges {
            // Best pair: max count, ties by lexicographic pair order.
            let mut best: Option<((u32, u32), i64)> = None;
            for (&pair, &count) in &pair_counts {
                if count < 2 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bp, bc)) => {
                        count > bc
                            || (count == bc
                                && (symbols[pair.0 as usize].as_str(), symbols[pair.1 as usize].as_str())
                                    < (symbols[bp.0 as usize].as_str(), symbols[bp.1 as usize].as_str()))
                    }
                };
                if better {
                    best = Some((pair, count));
                }
            }
            let Some((pair, _)) = best else { break };

            let merged_symbol =
                format!("{}{}", symbols[pair.0 as usize], symbols[pair.1 as usize]);
            let new_id = symbols.len() as u32;
            symbols.push(merged_symbol.clone());
            ids.insert(merged_symbol, new_id);
            merge_table.insert(pair, (merges.len() as u32, new_id));
            merges.push(pair);

            // Rewrite every word containing the pair and patch statistics.
            let affected: Vec<usize> =
                pair_words.remove(&pair).map(|s| s.into_iter().collect()).unwrap_or_default();
            for w_idx in affected {
                let (seq, freq) = &words[w_idx];
                let freq = *freq;
                if !seq.windows(2).any(|w| (w[0], w[1]) == pair) {
                    continue; // stale occurrence entry
                }
                for w in seq.windows(2) {
                    let key = (w[0], w[1]);
                    if let Some(c) = pair_counts.get_mut(&key) {
                        *c -= freq as i64;
                        if *c <= 0 {
                            pair_counts.remove(&key);
                        }
                    }
                }
                let new_seq = merge_pair(seq, pair, new_id);
                for w in new_seq.windows(2) {
                    let key = (w[0], w[1]);
                    *pair_counts.entry(key).or_insert(0) += freq as i64;
                    pair_words.entry(key).or_default().insert(w_idx);
                }
                words[w_idx].0 = new_seq;
            }
            pair_counts.remove(&pair);
        }

        Ok(Self {
            symbols,
            ids,
            merges,
            merge_table,
            alphabet_len,
            vocab_size,
            seed,
        })
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet_len
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn vocab_len(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    /// Splits a word into characters plus the end-of-word marker and replays
    /// the learned merges in rank order. Out-of-alphabet characters become
    /// the reserved UNK symbol.
    pub fn encode(&self, word: &str) -> Vec<u32> {
        let mut seq: Vec<u32> = word_symbols(word)
            .iter()
            .map(|s| self.ids.get(s).copied().unwrap_or(UNK_ID))
            .collect();
        loop {
            // Lowest-rank applicable merge anywhere in the sequence.
            let mut best: Option<(u32, (u32, u32), u32)> = None;
            for w in seq.windows(2) {
                if let Some(&(rank, new_id)) = self.merge_table.get(&(w[0], w[1])) {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, (w[0], w[1]), new_id));
                    }
                }
            }
            let Some((_, pair, new_id)) = best else { break };
            seq = merge_pair(&seq, pair, new_id);
        }
        seq
    }

    /// Symbol strings for an encoded sequence.
    pub fn decode_symbols<'a>(&'a self, ids: &[u32]) -> Vec<&'a str> {
        ids.iter().map(|&id| self.symbol(id)).collect()
    }

    /// Concatenates symbols and strips the end-of-word marker. UNK decodes
    /// to U+FFFD, so round-trips hold exactly for fully covered words.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == UNK_ID {
                out.push('\u{FFFD}');
            } else {
                out.push_str(self.symbol(id));
            }
        }
        out.chars().filter(|&c| c != EOW_CHAR).collect()
    }

    /// Versioned text serialization: header, sorted alphabet, merges in
    /// learning order. Byte-identical for identical training inputs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "bpe-model v1").unwrap();
        writeln!(out, "vocab_size\t{}", self.vocab_size).unwrap();
        writeln!(out, "seed\t{}", self.seed).unwrap();
        writeln!(out, "alphabet\t{}", self.alphabet_len).unwrap();
        for s in &self.symbols[1..=self.alphabet_len] {
            writeln!(out, "{s}").unwrap();
        }
        writeln!(out, "merges\t{}", self.merges.len()).unwrap();
        for &(l, r) in &self.merges {
            writeln!(out, "{}\t{}", self.symbols[l as usize], self.symbols[r as usize]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SubwordError> {
        let mut lines = text.lines();
        let bad = |what: &str| SubwordError::ModelFormat(what.to_string());
        if lines.next() != Some("bpe-model v1") {
            return Err(bad("missing or unsupported header"));
        }
        let mut field = |name: &str| -> Result<String, SubwordError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (key, value) =
                line.split_once('\t').ok_or_else(|| bad("malformed header line"))?;
            if key != name {
                return Err(SubwordError::ModelFormat(format!("expected field {name}, got {key}")));
            }
            Ok(value.to_string())
        };
        let vocab_size: usize =
            field("vocab_size")?.parse().map_err(|_| bad("bad vocab_size"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let alphabet_len: usize = field("alphabet")?.parse().map_err(|_| bad("bad alphabet"))?;

        let mut symbols: Vec<String> = vec![UNK_SYMBOL.to_string()];
        for _ in 0..alphabet_len {
            symbols.push(lines.next().ok_or_else(|| bad("truncated alphabet"))?.to_string());
        }
        let merges_line = lines.next().ok_or_else(|| bad("missing merges header"))?;
        let merge_count: usize = merges_line
            .strip_prefix("merges\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad merges header"))?;

        let mut ids: HashMap<String, u32> =
            symbols.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut merges = Vec::with_capacity(merge_count);
        let mut merge_table = HashMap::new();
        for rank in 0..merge_count {
            let line = lines.next().ok_or_else(|| bad("truncated merges"))?;
            let (l, r) = line.split_once('\t').ok_or_else(|| bad("malformed merge line"))?;
            let (l_id, r_id) = match (ids.get(l), ids.get(r)) {
                (Some(&a), Some(&b)) => (a, b),
                _ => return Err(bad("merge references unknown symbol")),
            };
            let merged = format!("{l}{r}");
            let new_id = symbols.len() as u32;
            symbols.push(merged.clone());
            ids.insert(merged, new_id);
            merge_table.insert((l_id, r_id), (rank as u32, new_id));
            merges.push((l_id, r_id));
        }
        Ok(Self { symbols, ids, merges, merge_table, alphabet_len, vocab_size, seed })
    }
}

fn merge_pair(seq: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == pair.0 && seq[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<String> {
        lines.iter().map(|s| s.to_string()).collect()
    }

    /// Naive full pair recount, independent of the incremental statistics.
    fn recount_best_pair(words: &[(&str, u64)]) -> Option<(String, String)> {
        let mut counts: HashMap<(String, String), u64> = HashMap::new();
        for (w, f) in words {
            let syms = word_symbols(w);
            for pair in syms.windows(2) {
                *counts.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += f;
            }
        }
        counts
            .into_iter()
            .filter(|(_, c)| *c >= 2)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .map(|(p, _)| p)
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let c = corpus(&["aaab", "aaab"]);
        // alphabet {a, b, EOW} = 3, +1 UNK, +2 headroom
        let model = BpeModel::train(&c, 5, 42).unwrap();
        assert_eq!(model.merge_count(), 1);
        let (l, r) = model.merges[0];
        assert_eq!(model.symbol(l), "a");
        assert_eq!(model.symbol(r), "a");

        // hand oracle: exhaustive recount of pair frequencies
        let expected = recount_best_pair(&[("aaab", 2)]).unwrap();
        assert_eq!((expected.0.as_str(), expected.1.as_str()), ("a", "a"));
    }

    #[test]
    fn unique_single_character_corpus_learns_nothing() {
        let c = corpus(&["a", "b", "c", "d"]);
        let model = BpeModel::train(&c, 100, 42).unwrap();
        assert_eq!(model.merge_count(), 0);
    }

    #[test]
    fn retraining_is_byte_identical() {
        let c = corpus(&["салом дунё", "салом шаб", "дунё калон", "шаби дароз"]);
        let a = BpeModel::train(&c, 40, 42).unwrap();
        let b = BpeModel::train(&c, 40, 42).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn model_text_roundtrip() {
        let c = corpus(&["канд канд қанд", "китоб китоб"]);
        let model = BpeModel::train(&c, 30, 7).unwrap();
        let re = BpeModel::from_text(&model.to_text()).unwrap();
        assert_eq!(model, re);
        assert_eq!(re.encode("китоб"), model.encode("китоб"));
    }

    #[test]
    fn vocab_not_above_alphabet_is_an_error() {
        let c = corpus(&["abc"]);
        // alphabet is {a, b, c, EOW} = 4
        assert!(matches!(
            BpeModel::train(&c, 4, 0),
            Err(SubwordError::VocabTooSmall { requested: 4, alphabet: 4 })
        ));
        assert!(matches!(BpeModel::train(&[], 10, 0), Err(SubwordError::EmptyCorpus)));
    }

    #[test]
    fn encode_single_learned_symbol_is_one_id() {
        // "aa" appears often enough that (a,a) then (aa,EOW) merge.
        let c = corpus(&["aa aa aa ab"]);
        let model = BpeModel::train(&c, 8, 0).unwrap();
        let ids = model.encode("aa");
        assert_eq!(ids.len(), 1, "symbols: {:?}", model.decode_symbols(&ids));
    }

    #[test]
    fn encode_marks_out_of_alphabet_chars_unk() {
        let c = corpus(&["abc abc"]);
        let model = BpeModel::train(&c, 10, 0).unwrap();
        let ids = model.encode("axc");
        assert!(ids.contains(&UNK_ID));
        assert_eq!(model.decode(&ids), "a\u{FFFD}c");
    }

    #[test]
    fn covered_words_roundtrip_through_encode_decode() {
        let c = corpus(&[
            "об мактаб китоб дарё",
            "обод мактабҳо китобхона дарёфт",
            "обу мактаби китоби дарёи",
        ]);
        let model = BpeModel::train(&c, 60, 42).unwrap();
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        let words: Vec<&str> = c.iter().flat_map(|l| l.split_whitespace()).collect();
        for _ in 0..500 {
            let w = words[rng.random_range(0..words.len())];
            assert_eq!(model.decode(&model.encode(w)), w);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_over_base_alphabet(words in proptest::collection::vec("[абвг]{1,8}", 1..10)) {
            let c: Vec<String> = words.clone();
            let model = BpeModel::train(&c, 64, 1).unwrap();
            for w in &words {
                prop_assert_eq!(model.decode(&model.encode(w)), w.clone());
            }
        }

        #[test]
        fn vocab_size_is_respected(vocab in 6usize..40) {
            let c = corpus(&["абвабв абваб вабв абаб"]);
            if let Ok(model) = BpeModel::train(&c, vocab, 0) {
                prop_assert!(model.vocab_len() <= vocab);
            }
        }
    }
}

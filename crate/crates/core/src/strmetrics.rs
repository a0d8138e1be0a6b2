//! String distance and transliteration-quality metrics.
//!
//! All metrics operate on NFC-normalized Unicode scalar values; combining
//! sequences count one per scalar. Levenshtein is the plain
//! insert/delete/substitute distance, `norm_sim` its [0,1] similarity form,
//! CER the reference-length-normalized distance, and chrF the character
//! n-gram F-score averaged over orders 1..=max_n.

use std::collections::HashMap;

use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

/// chrF configuration: maximum n-gram order and the beta of F_beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfParams {
    pub max_n: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self { max_n: 6, beta: 2.0 }
    }
}

fn nfc_chars(s: &str) -> Vec<char> {
    match is_nfc_quick(s.chars()) {
        IsNormalized::Yes => s.chars().collect(),
        _ => s.nfc().collect(),
    }
}

/// Minimal number of character insertions, deletions, and substitutions
/// transforming `a` into `b`, over NFC scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a = nfc_chars(a);
    let b = nfc_chars(b);
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Two-row DP over the shorter string.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &cl) in long.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = i + 1;
        for (j, &cs) in short.iter().enumerate() {
            let cost = usize::from(cl != cs);
            let next = (prev_diag + cost).min(row[j] + 1).min(row[j + 1] + 1);
            prev_diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[short.len()]
}

/// Normalized Levenshtein similarity: `1 - dist / max(|a|, |b|)`.
/// Both strings empty yields 1.0.
pub fn norm_sim(a: &str, b: &str) -> f64 {
    let a = nfc_chars(a);
    let b = nfc_chars(b);
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(&a, &b) as f64 / denom as f64
}

/// Character error rate: `levenshtein(hyp, ref) / max(1, |ref|)`.
pub fn cer(hyp: &str, reference: &str) -> f64 {
    let h = nfc_chars(hyp);
    let r = nfc_chars(reference);
    levenshtein_chars(&h, &r) as f64 / r.len().max(1) as f64
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts: HashMap<&[char], usize> = HashMap::new();
    if chars.len() >= n {
        for win in chars.windows(n) {
            *counts.entry(win).or_insert(0) += 1;
        }
    }
    counts
}

/// Character n-gram F_beta score, arithmetic mean over orders 1..=max_n whose
/// reference n-gram multiset is non-empty. Whitespace is removed before
/// n-gram extraction. Empty hypothesis against a non-empty reference is 0.
pub fn chrf(hyp: &str, reference: &str, params: ChrfParams) -> f64 {
    assert!(params.max_n >= 1, "chrF max_n must be >= 1");
    assert!(params.beta > 0.0, "chrF beta must be positive");
    let h: Vec<char> = nfc_chars(hyp).into_iter().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = nfc_chars(reference)
        .into_iter()
        .filter(|c| !c.is_whitespace())
        .collect();

    let beta2 = params.beta * params.beta;
    let mut sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=params.max_n {
        if r.len() < n {
            continue; // empty reference n-gram set: order excluded
        }
        orders += 1;
        let rc = ngram_counts(&r, n);
        let hc = ngram_counts(&h, n);
        let overlap: usize = hc
            .iter()
            .map(|(gram, &cnt)| cnt.min(rc.get(gram).copied().unwrap_or(0)))
            .sum();
        let hyp_total = h.len().saturating_sub(n - 1);
        let ref_total = r.len() - (n - 1);
        if overlap == 0 || hyp_total == 0 {
            continue; // F is 0 for this order
        }
        let precision = overlap as f64 / hyp_total as f64;
        let recall = overlap as f64 / ref_total as f64;
        let denom = beta2 * precision + recall;
        if denom > 0.0 {
            sum += (1.0 + beta2) * precision * recall / denom;
        }
    }
    if orders == 0 {
        // No order has a non-empty reference set: only happens for an empty
        // (or all-whitespace) reference.
        return if h.is_empty() { 1.0 } else { 0.0 };
    }
    sum / orders as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent full-matrix DP oracle. Kept deliberately naive and
    /// separate from the two-row production implementation.
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

    /// Independent chrF reference, written before the production code and
    /// structured differently: sorted-vector n-gram counting and explicit
    /// per-order accumulation.
    fn chrf_oracle(hyp: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
        fn grams(s: &str, n: usize) -> Vec<String> {
            let cs: Vec<char> = s
                .nfc()
                .filter(|c| !c.is_whitespace())
                .collect();
            if cs.len() < n {
                return Vec::new();
            }
            let mut out: Vec<String> = (0..=cs.len() - n)
                .map(|i| cs[i..i + n].iter().collect())
                .collect();
            out.sort();
            out
        }
        fn overlap(mut a: Vec<String>, mut b: Vec<String>) -> usize {
            // Sorted-merge multiset intersection.
            a.sort();
            b.sort();
            let (mut i, mut j, mut o) = (0usize, 0usize, 0usize);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        o += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            o
        }
        let b2 = beta * beta;
        let mut scores = Vec::new();
        for n in 1..=max_n {
            let rg = grams(reference, n);
            if rg.is_empty() {
                continue;
            }
            let hg = grams(hyp, n);
            let ov = overlap(hg.clone(), rg.clone());
            let f = if ov == 0 {
                0.0
            } else {
                let p = ov as f64 / hg.len() as f64;
                let r = ov as f64 / rg.len() as f64;
                (1.0 + b2) * p * r / (b2 * p + r)
            };
            scores.push(f);
        }
        if scores.is_empty() {
            let hyp_empty = hyp.nfc().filter(|c| !c.is_whitespace()).count() == 0;
            return if hyp_empty { 1.0 } else { 0.0 };
        }
        scores.iter().sum::<f64>() / scores.len() as f64
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(lev_oracle("kitten", "sitting"), 3);
        assert_eq!(levenshtein("об", "об"), 0);
    }

    #[test]
    fn levenshtein_is_nfc_aware() {
        // "о" + combining macron vs precomposed form: same scalar sequence
        // after NFC, so distance 0.
        let decomposed = "o\u{0304}";
        let precomposed = "\u{014D}";
        assert_eq!(levenshtein(decomposed, precomposed), 0);
    }

    #[test]
    fn norm_sim_cases() {
        assert_eq!(norm_sim("тоҷик", "тоҷик"), 1.0);
        assert_eq!(norm_sim("ab", "cd"), 0.0);
        assert_eq!(norm_sim("abcd", "abcf"), 0.75);
        assert_eq!(norm_sim("", ""), 1.0);
    }

    #[test]
    fn cer_cases() {
        assert_eq!(cer("same", "same"), 0.0);
        assert_eq!(cer("abc", ""), 3.0);
        assert_eq!(cer("ab", "abcd"), 0.5);
    }

    #[test]
    fn cer_matches_oracle_on_random_pairs() {
        // 100 seeded pairs over a small alphabet, cross-checked against the
        // independent DP oracle.
        let mut rng = crate::seed::rng(991);
        use rand::Rng;
        let alphabet: Vec<char> = "abво∂ёқج".chars().collect();
        for _ in 0..100 {
            let mk = |rng: &mut rand_pcg::Pcg64| -> String {
                let len = rng.random_range(0..12);
                (0..len)
                    .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                    .collect()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let expected = lev_oracle(&a, &b) as f64 / b.chars().count().max(1) as f64;
            assert!((cer(&a, &b) - expected).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn chrf_trivial_cases() {
        let p = ChrfParams::default();
        assert_eq!(chrf("дарё", "дарё", p), 1.0);
        assert_eq!(chrf("aaaa", "bbbb", p), 0.0);
        assert_eq!(chrf("", "abc", p), 0.0);
        assert_eq!(chrf("", "", p), 1.0);
    }

    #[test]
    fn chrf_matches_independent_reference_on_fixed_vectors() {
        // Fixed 50-pair vector set spanning scripts, lengths, and overlap
        // levels; agreement with the independently written reference must be
        // within 1e-9.
        let words = [
            "об", "آب", "kitab", "китоб", "کتاب", "дарё", "дарьё", "abcabc",
            "xyz", "a", "", "мактаб", "مکتب", "talk", "walk", "салом",
            "سلام", "hello world", "helloworld", "шаҳр", "шахр", "şehir",
            "aaaa", "aaab", "середина", "mavj мавҷ",
        ];
        let p = ChrfParams::default();
        let mut checked = 0;
        for (i, h) in words.iter().enumerate() {
            for r in words.iter().skip(i).take(2) {
                let got = chrf(h, r, p);
                let want = chrf_oracle(h, r, 6, 2.0);
                assert!(
                    (got - want).abs() < 1e-9,
                    "chrf({h:?}, {r:?}) = {got}, oracle = {want}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 50, "vector set too small: {checked}");
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle(a in "\\PC{0,12}", b in "\\PC{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&a, &b));
        }

        #[test]
        fn levenshtein_metric_axioms(
            a in "[abcд]{0,8}",
            b in "[abcд]{0,8}",
            c in "[abcд]{0,8}",
        ) {
            let ab = levenshtein(&a, &b);
            let ba = levenshtein(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(levenshtein(&a, &a), 0);
            if ab == 0 {
                prop_assert_eq!(a.nfc().collect::<String>(), b.nfc().collect::<String>());
            }
            let ac = levenshtein(&a, &c);
            let cb = levenshtein(&c, &b);
            prop_assert!(ab <= ac + cb);
        }

        #[test]
        fn norm_sim_bounded_and_symmetric(a in "\\PC{0,10}", b in "\\PC{0,10}") {
            let s = norm_sim(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((s - norm_sim(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn chrf_bounded_and_exact_on_copy(a in "\\PC{0,14}", b in "\\PC{0,14}") {
            let p = ChrfParams::default();
            let s = chrf(&a, &b, p);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((chrf(&a, &a, p) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn cer_upper_bound(h in "\\PC{0,10}", r in "\\PC{0,10}") {
            let hl = h.nfc().count();
            let rl = r.nfc().count();
            let bound = hl.max(rl) as f64 / rl.max(1) as f64;
            prop_assert!(cer(&h, &r) <= bound + 1e-12);
        }
    }
}

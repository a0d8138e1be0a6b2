//! # crosslex-core
//!
//! CPU-only toolkit for Tajik–Persian cross-script lexical retrieval,
//! transliteration, and OCR post-correction.
//!
//! The pipeline is built from small, deterministic pieces:
//!
//! - [`corpus`] — JSONL lexicon ingestion, normalization, deduplication,
//!   stratified splitting, dataset statistics
//! - [`translit`] — rule-based grapheme transliteration, coarse romanization,
//!   script-specific phonetic (Soundex-style) coding
//! - [`strmetrics`] — Levenshtein distance, normalized similarity, CER, chrF
//! - [`subword`] — joint BPE tokenizer trained on both scripts
//! - [`embed`] — skip-gram embeddings over subword units (wordpiece and
//!   character n-gram variants) with word vectors by subword averaging
//! - [`retrieval`] — candidate pools and the single-signal rankers
//!   (BM25, edit distance, rule transliteration, phonetic, random)
//! - [`fusion`] — the linear hybrid ranker and development-set weight tuning
//! - [`harness`] — retrieval metrics, bootstrap confidence intervals, OCR
//!   corruption and correction evaluation, report emission
//! - [`synth`] — synthetic parallel lexica with known ground truth, used as
//!   the verification oracle for the whole pipeline
//! - [`pipeline`] — the one-shot `reproduce` driver chaining every stage
//!
//! Everything is single-threaded by default and fully seeded: identical
//! inputs and seeds produce byte-identical model files and reports.

pub mod corpus;
pub mod embed;
pub mod fusion;
pub mod harness;
pub mod pipeline;
pub mod retrieval;
pub mod seed;
pub mod strmetrics;
pub mod subword;
pub mod synth;
pub mod translit;

pub use corpus::LexiconEntry;
pub use fusion::FusionWeights;
pub use harness::EvalReport;
pub use retrieval::{CandidatePool, RankedList};
pub use subword::BpeModel;

//! `crosslex` — CPU-only Tajik–Persian cross-script retrieval toolkit.
//!
//! Every pipeline stage is a subcommand; `reproduce` chains them all and
//! writes a manifest of every seed and artifact hash. All stages are
//! deterministic given their seeds.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crosslex_core::corpus::{self, Charset, NormalizationPolicy, SplitSpec};
use crosslex_core::embed::{
    build_training_stream, build_word_stream, train_skipgram, EmbeddingKind, EmbeddingModel,
    SkipgramParams,
};
use crosslex_core::fusion::{self, FeatureCache, FusionWeights, HybridModels, ScoreMode};
use crosslex_core::harness::{
    corrupt_all, emit_report, emit_timings, eval_run, rank_with, CorruptParams, Method,
    RankContext, ReportFormat,
};
use crosslex_core::pipeline::{reproduce, RunConfig};
use crosslex_core::retrieval::build_pool;
use crosslex_core::strmetrics::{cer, chrf, ChrfParams};
use crosslex_core::subword::BpeModel;
use crosslex_core::synth::{gen_lexicon, SynthParams};
use crosslex_core::translit::{GraphemeRuleSet, PhoneticTable, Romanizer};

#[derive(Parser)]
#[command(
    name = "crosslex",
    version,
    about = "Tajik-Persian cross-script lexical retrieval, transliteration, and OCR post-correction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, normalize, and deduplicate a JSONL lexicon
    Ingest(IngestArgs),
    /// Dataset statistics as CSV and Markdown
    Stats(StatsArgs),
    /// Deterministic stratified train/dev/test split
    Split(SplitArgs),
    /// BPE subword model operations
    #[command(subcommand)]
    Bpe(BpeCommand),
    /// Skip-gram embedding training
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Rule-based transliteration of a word list
    Translit(TranslitArgs),
    /// Per-pair and corpus CER/chrF for a TSV of hypothesis/reference pairs
    Metrics(MetricsArgs),
    /// Rank candidate pools with a single method
    Rank(RankArgs),
    /// Hybrid weight tuning and ranking
    #[command(subcommand)]
    Fusion(FusionCommand),
    /// Retrieval evaluation producing a report
    #[command(subcommand)]
    Eval(EvalCommand),
    /// OCR noise simulation
    #[command(subcommand)]
    Ocr(OcrCommand),
    /// Synthetic lexicon generation with ground truth
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Full pipeline: ingest, split, train, tune, evaluate, report
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input JSONL lexicon
    #[arg(long = "in")]
    input: PathBuf,
    /// Normalized, deduplicated output JSONL
    #[arg(long)]
    out: PathBuf,
    /// Where to write rejected lines (JSONL)
    #[arg(long)]
    rejects: Option<PathBuf>,
    /// Disable the Tajik yo->e fold
    #[arg(long)]
    no_yo_fold: bool,
    /// Enforce the shipped Tajik/Persian alphabets
    #[arg(long)]
    charset_check: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_md: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Split seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    dev_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    test_ratio: f64,
}

#[derive(Subcommand)]
enum BpeCommand {
    /// Train a joint BPE model on tajik+persian forms
    Train(BpeTrainArgs),
    /// Encode a word list with a trained model
    Encode(BpeEncodeArgs),
}

#[derive(Args)]
struct BpeTrainArgs {
    /// Training lexicon (JSONL)
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target vocabulary size
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also feed example sentences to training
    #[arg(long)]
    with_examples: bool,
}

#[derive(Args)]
struct BpeEncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// One word per line
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Train a skip-gram embedding model
    Train(EmbedTrainArgs),
}

#[derive(Args)]
struct EmbedTrainArgs {
    /// wordpiece or char-ngram
    #[arg(long)]
    kind: String,
    /// Training lexicon (JSONL)
    #[arg(long = "in")]
    input: PathBuf,
    /// BPE model (required for the wordpiece kind)
    #[arg(long)]
    bpe: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    with_examples: bool,
}

#[derive(Args)]
struct TranslitArgs {
    /// Rule table TSV (defaults to the shipped tables)
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Exception table TSV
    #[arg(long)]
    exceptions: Option<PathBuf>,
    /// One word per line
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// TSV with hypothesis<TAB>reference per line
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Model/table paths shared by the ranking subcommands.
#[derive(Args, Clone)]
struct ModelArgs {
    /// BPE model file
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// Wordpiece embedding model
    #[arg(long)]
    word2vec: Option<PathBuf>,
    /// Char-ngram embedding model
    #[arg(long)]
    charngram: Option<PathBuf>,
    /// Rule table TSV
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Exception table TSV
    #[arg(long)]
    exceptions: Option<PathBuf>,
    /// Synthetic ground-truth JSON (wins over --rules)
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Fusion weights JSON (from `fusion tune`)
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// random | edit | rule | phonetic | bm25 | word2vec | fasttext | hybrid
    #[arg(long)]
    method: String,
    #[command(flatten)]
    common: RankCommonArgs,
}

#[derive(Args)]
struct RankCommonArgs {
    /// Queries: JSONL lexicon whose tajik is the query, persian the gold
    #[arg(long)]
    queries: PathBuf,
    /// Candidate universe: JSONL lexicon providing persian forms
    #[arg(long)]
    universe: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pool_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Evaluate only the first N queries
    #[arg(long)]
    query_limit: Option<usize>,
    #[command(flatten)]
    models: ModelArgs,
}

#[derive(Subcommand)]
enum FusionCommand {
    /// Grid-search fusion weights on a development set
    Tune(FusionTuneArgs),
    /// Rank with the hybrid scorer
    Rank(FusionRankArgs),
}

#[derive(Args)]
struct FusionTuneArgs {
    /// Development set (JSONL)
    #[arg(long)]
    dev: PathBuf,
    /// Candidate universe (JSONL)
    #[arg(long)]
    universe: PathBuf,
    /// Output weights JSON
    #[arg(long)]
    out: PathBuf,
    /// Per-grid-point MRR log (CSV)
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Distractors per tuning pool
    #[arg(long, default_value_t = 100)]
    tune_pool: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    models: ModelArgs,
}

/// Same surface as `rank` with the method pinned to hybrid.
#[derive(Args)]
struct FusionRankArgs {
    #[command(flatten)]
    common: RankCommonArgs,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Evaluate one method over per-query pools and write a report
    Run(EvalRunArgs),
}

#[derive(Args)]
struct EvalRunArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    universe: PathBuf,
    /// Report CSV path; .md/.json twins are written alongside
    #[arg(long)]
    out: PathBuf,
    /// primary or stress
    #[arg(long, default_value = "primary")]
    regime: String,
    /// Distractors per pool (primary 1000, stress 3000)
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    query_limit: Option<usize>,
    /// Worker threads (> 1 makes wall-clock timings non-comparable)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    models: ModelArgs,
}

#[derive(Subcommand)]
enum OcrCommand {
    /// Corrupt the persian side of a lexicon with OCR-style noise
    Sim(OcrSimArgs),
}

#[derive(Args)]
struct OcrSimArgs {
    /// Input lexicon (JSONL); the persian field is corrupted
    #[arg(long = "in")]
    input: PathBuf,
    /// Output OCR samples (JSONL)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.30)]
    p_word: f64,
    #[arg(long, default_value_t = 0.20)]
    p_char: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Generate a synthetic lexicon with known ground truth
    Gen(SynthGenArgs),
}

#[derive(Args)]
struct SynthGenArgs {
    /// Number of pairs
    #[arg(long)]
    n: usize,
    /// Output lexicon (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Output ground truth (JSON)
    #[arg(long)]
    truth: PathBuf,
    /// Per-character noise rate on the target side
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of pairs replaced by recorded exceptions
    #[arg(long, default_value_t = 0.0)]
    exception_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 10)]
    max_len: usize,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Input lexicon (JSONL), real or synthetic
    #[arg(long)]
    dataset: PathBuf,
    /// Artifact directory
    #[arg(long)]
    out_dir: PathBuf,
    /// key=value config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// primary or stress
    #[arg(long)]
    regime: Option<String>,
    /// Distractors per evaluation pool
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    tune_pool: Option<usize>,
    #[arg(long)]
    bpe_vocab: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    query_limit: Option<usize>,
    /// Worker threads for evaluation (> 1 makes timings non-comparable)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    with_examples: bool,
    #[arg(long)]
    dump_pools: bool,
    /// Synthetic ground-truth JSON to use as the rule table
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    exceptions: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Split(args) => cmd_split(args),
        Command::Bpe(BpeCommand::Train(args)) => cmd_bpe_train(args),
        Command::Bpe(BpeCommand::Encode(args)) => cmd_bpe_encode(args),
        Command::Embed(EmbedCommand::Train(args)) => cmd_embed_train(args),
        Command::Translit(args) => cmd_translit(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Rank(args) => cmd_rank(&args.method, args.common),
        Command::Fusion(FusionCommand::Tune(args)) => cmd_fusion_tune(args),
        Command::Fusion(FusionCommand::Rank(args)) => cmd_rank("hybrid", args.common),
        Command::Eval(EvalCommand::Run(args)) => cmd_eval_run(args),
        Command::Ocr(OcrCommand::Sim(args)) => cmd_ocr_sim(args),
        Command::Synth(SynthCommand::Gen(args)) => cmd_synth_gen(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

fn read_lexicon(path: &PathBuf) -> Result<Vec<corpus::LexiconEntry>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = corpus::parse_jsonl(bytes.as_slice())?;
    if !parsed.rejects.is_empty() {
        eprintln!("warning: {} malformed lines in {}", parsed.rejects.len(), path.display());
    }
    Ok(parsed.entries)
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let policy = NormalizationPolicy::from_tables(
        !args.no_yo_fold,
        include_str!("../../core/data/persian_folds.tsv"),
        include_str!("../../core/data/pos_labels.tsv"),
    )?;
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let charsets = args.charset_check.then(|| (Charset::tajik(), Charset::persian()));
    let outcome = corpus::ingest(
        bytes.as_slice(),
        &policy,
        charsets.as_ref().map(|(t, p)| (t, p)),
    )?;
    let (kept, report) = corpus::dedupe(&outcome.entries);
    fs::write(&args.out, corpus::write_jsonl(&kept))?;
    if let Some(path) = args.rejects {
        let mut text = String::new();
        for r in &outcome.rejects {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    println!(
        "ingested {} entries ({} rejects, {} deduplicated)",
        kept.len(),
        outcome.rejects.len(),
        report.removals.len()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let entries = read_lexicon(&args.input)?;
    let table = corpus::stats(&entries);
    if let Some(path) = &args.out_csv {
        fs::write(path, table.to_csv())?;
    }
    if let Some(path) = &args.out_md {
        fs::write(path, table.to_markdown())?;
    }
    print!("{}", table.to_markdown());
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let entries = read_lexicon(&args.input)?;
    let spec = SplitSpec {
        train_ratio: args.train_ratio,
        dev_ratio: args.dev_ratio,
        test_ratio: args.test_ratio,
        seed: args.seed,
        ..SplitSpec::default()
    };
    let out = corpus::split(&entries, &spec)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("train.jsonl"), corpus::write_jsonl(&out.train))?;
    fs::write(args.out_dir.join("dev.jsonl"), corpus::write_jsonl(&out.dev))?;
    fs::write(args.out_dir.join("test.jsonl"), corpus::write_jsonl(&out.test))?;
    println!("split {}/{}/{}", out.train.len(), out.dev.len(), out.test.len());
    Ok(())
}

fn bpe_lines(entries: &[corpus::LexiconEntry], with_examples: bool) -> Vec<String> {
    entries
        .iter()
        .flat_map(|e| {
            let mut lines = vec![format!("{} {}", e.tajik, e.persian)];
            if with_examples {
                lines.extend(e.examples.iter().cloned());
            }
            lines
        })
        .collect()
}

fn cmd_bpe_train(args: BpeTrainArgs) -> Result<()> {
    let entries = read_lexicon(&args.input)?;
    let corpus_lines = bpe_lines(&entries, args.with_examples);
    let model = BpeModel::train(&corpus_lines, args.vocab_size, args.seed)?;
    fs::write(&args.out, model.to_text())?;
    println!(
        "trained BPE: alphabet {}, merges {}, vocab {}",
        model.alphabet_len(),
        model.merge_count(),
        model.vocab_len()
    );
    Ok(())
}

fn cmd_bpe_encode(args: BpeEncodeArgs) -> Result<()> {
    let model = BpeModel::from_text(&fs::read_to_string(&args.model)?)?;
    let words = fs::read_to_string(&args.input)?;
    let mut out = String::new();
    for word in words.lines().filter(|l| !l.trim().is_empty()) {
        let ids = model.encode(word.trim());
        let id_text: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        let symbols: Vec<&str> = model.decode_symbols(&ids);
        out.push_str(&format!("{word}\t{}\t{}\n", id_text.join(" "), symbols.join(" ")));
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn cmd_embed_train(args: EmbedTrainArgs) -> Result<()> {
    let kind = EmbeddingKind::parse(&args.kind)?;
    let entries = read_lexicon(&args.input)?;
    let params = SkipgramParams {
        dim: args.dim,
        window: args.window,
        min_count: args.min_count,
        epochs: args.epochs,
        ..SkipgramParams::default()
    };
    let stream = match kind {
        EmbeddingKind::Wordpiece => {
            let bpe_path =
                args.bpe.as_ref().context("--bpe is required for the wordpiece kind")?;
            let bpe = BpeModel::from_text(&fs::read_to_string(bpe_path)?)?;
            build_training_stream(&entries, &bpe, args.with_examples)
        }
        EmbeddingKind::CharNgram => build_word_stream(&entries, args.with_examples),
    };
    let model = train_skipgram(&stream, kind, params, args.seed)?;
    fs::write(&args.out, model.to_text())?;
    println!("trained {} embedding: {} units, dim {}", args.kind, model.unit_count(), args.dim);
    Ok(())
}

fn cmd_translit(args: TranslitArgs) -> Result<()> {
    let rules = match &args.rules {
        Some(path) => {
            let rules_text = fs::read_to_string(path)?;
            let exceptions_text = match &args.exceptions {
                Some(p) => fs::read_to_string(p)?,
                None => String::new(),
            };
            GraphemeRuleSet::from_tsv(&rules_text, &exceptions_text, "custom")?
        }
        None => GraphemeRuleSet::default_tajik_persian(),
    };
    let words = fs::read_to_string(&args.input)?;
    let mut out = String::new();
    let mut unmapped_total = 0usize;
    for word in words.lines() {
        let result = rules.apply(word.trim());
        unmapped_total += result.unmapped;
        out.push_str(&result.text);
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    if unmapped_total > 0 {
        eprintln!("warning: {unmapped_total} characters had no rule and passed through");
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.pairs)?;
    let params = ChrfParams::default();
    let mut out = String::from("hyp,ref,cer,chrf\n");
    let mut cers = Vec::new();
    let mut chrfs = Vec::new();
    let mut dist_sum = 0usize;
    let mut ref_len_sum = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (hyp, reference) = line
            .split_once('\t')
            .with_context(|| format!("line {}: expected hyp<TAB>ref", i + 1))?;
        let c = cer(hyp, reference);
        let f = chrf(hyp, reference, params);
        dist_sum += crosslex_core::strmetrics::levenshtein(hyp, reference);
        ref_len_sum += reference.chars().count();
        cers.push(c);
        chrfs.push(f);
        out.push_str(&format!("{hyp},{reference},{c:.3},{f:.3}\n"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    out.push_str(&format!(
        "macro_avg,,{:.3},{:.3}\ncorpus,,{:.3},\n",
        mean(&cers),
        mean(&chrfs),
        dist_sum as f64 / ref_len_sum.max(1) as f64,
    ));
    fs::write(&args.out, out)?;
    Ok(())
}

/// Owned model bundle loaded from CLI paths, with inert fallbacks for the
/// components a method does not use.
struct LoadedModels {
    bpe: BpeModel,
    wordpiece: EmbeddingModel,
    charngram: EmbeddingModel,
    rules: GraphemeRuleSet,
    romanizer: Romanizer,
    weights: FusionWeights,
    has_embeddings: bool,
}

impl LoadedModels {
    fn load(args: &ModelArgs) -> Result<Self> {
        let bpe = match &args.bpe {
            Some(p) => BpeModel::from_text(&fs::read_to_string(p)?)?,
            None => BpeModel::train(&["а".to_string()], 3, 0)?,
        };
        let has_embeddings = args.word2vec.is_some() && args.charngram.is_some();
        let placeholder = || -> Result<EmbeddingModel> {
            let stream = vec![vec!["а".to_string(), "б".to_string()]; 2];
            Ok(train_skipgram(
                &stream,
                EmbeddingKind::Wordpiece,
                SkipgramParams { dim: 4, epochs: 1, min_count: 1, ..SkipgramParams::default() },
                0,
            )?)
        };
        let wordpiece = match &args.word2vec {
            Some(p) => EmbeddingModel::from_text(&fs::read_to_string(p)?)?,
            None => placeholder()?,
        };
        let charngram = match &args.charngram {
            Some(p) => EmbeddingModel::from_text(&fs::read_to_string(p)?)?,
            None => placeholder()?,
        };
        let rules = if let Some(truth_path) = &args.truth {
            let truth: crosslex_core::synth::GroundTruth =
                serde_json::from_str(&fs::read_to_string(truth_path)?)?;
            truth.rule_set()
        } else if let Some(rules_path) = &args.rules {
            let exceptions_text = match &args.exceptions {
                Some(p) => fs::read_to_string(p)?,
                None => String::new(),
            };
            GraphemeRuleSet::from_tsv(&fs::read_to_string(rules_path)?, &exceptions_text, "custom")?
        } else {
            GraphemeRuleSet::default_tajik_persian()
        };
        let weights = match &args.weights {
            Some(p) => {
                let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?)?;
                let w = &v["weights"];
                FusionWeights::new(
                    w["alpha"].as_f64().context("weights.alpha")?,
                    w["beta"].as_f64().context("weights.beta")?,
                    w["gamma"].as_f64().context("weights.gamma")?,
                    w["delta"].as_f64().context("weights.delta")?,
                )?
            }
            None => FusionWeights::default(),
        };
        Ok(Self {
            bpe,
            wordpiece,
            charngram,
            rules,
            romanizer: Romanizer::default(),
            weights,
            has_embeddings,
        })
    }

    fn hybrid(&self) -> HybridModels<'_> {
        HybridModels {
            charngram: &self.charngram,
            wordpiece: &self.wordpiece,
            bpe: &self.bpe,
            rules: &self.rules,
            romanizer: &self.romanizer,
        }
    }

    fn require_embeddings_for(&self, method: Method) -> Result<()> {
        let needs = matches!(method, Method::Hybrid | Method::Word2vec | Method::Fasttext);
        if needs && !self.has_embeddings {
            bail!(
                "method {} needs --word2vec and --charngram model files",
                method.as_str()
            );
        }
        Ok(())
    }
}

fn cmd_rank(method: &str, args: RankCommonArgs) -> Result<()> {
    let method = Method::parse(method)?;
    let models = LoadedModels::load(&args.models)?;
    models.require_embeddings_for(method)?;
    let mut queries = read_lexicon(&args.queries)?;
    if let Some(limit) = args.query_limit {
        queries.truncate(limit);
    }
    let universe_entries = read_lexicon(&args.universe)?;
    let universe: Vec<String> = {
        let set: std::collections::BTreeSet<&String> =
            universe_entries.iter().map(|e| &e.persian).collect();
        set.into_iter().cloned().collect()
    };
    let phonetic_tajik = PhoneticTable::default_tajik();
    let phonetic_persian = PhoneticTable::default_persian();
    let hybrid = models.hybrid();
    let ctx = RankContext {
        models: hybrid,
        weights: models.weights,
        phonetic_tajik: &phonetic_tajik,
        phonetic_persian: &phonetic_persian,
        cache: None,
        seed: args.seed,
    };
    let mut out = String::from("query\trank\tcandidate\tscore\tcomponent\n");
    for (i, entry) in queries.iter().enumerate() {
        let pool = build_pool(&entry.persian, &universe, args.pool_size, args.seed, i as u64)?;
        let ranked = rank_with(method, &entry.tajik, &pool, &ctx, ScoreMode::CrossScript);
        for (rank, (candidate, score)) in ranked.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{}\n",
                entry.tajik,
                rank + 1,
                candidate,
                score,
                ranked.component
            ));
        }
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn cmd_fusion_tune(args: FusionTuneArgs) -> Result<()> {
    let models = LoadedModels::load(&args.models)?;
    if !models.has_embeddings {
        bail!("fusion tune needs --word2vec and --charngram model files");
    }
    let dev = read_lexicon(&args.dev)?;
    let universe_entries = read_lexicon(&args.universe)?;
    let universe: Vec<String> = {
        let set: std::collections::BTreeSet<&String> =
            universe_entries.iter().map(|e| &e.persian).collect();
        set.into_iter().cloned().collect()
    };
    let hybrid = models.hybrid();
    let cache = FeatureCache::build(universe.iter().map(String::as_str), &hybrid);
    let mut dev_pools = Vec::with_capacity(dev.len());
    for (i, e) in dev.iter().enumerate() {
        let pool = build_pool(&e.persian, &universe, args.tune_pool, args.seed, i as u64)?;
        dev_pools.push((e.tajik.clone(), pool));
    }
    let (weights, log) = fusion::tune_weights(
        &dev_pools,
        &hybrid,
        ScoreMode::CrossScript,
        args.grid_step,
        Some(&cache),
    )?;
    let best = &log.points[log.best_index];
    let payload = serde_json::json!({
        "weights": weights,
        "grid_step": args.grid_step,
        "dev_mrr": best.mrr,
    });
    fs::write(&args.out, format!("{}\n", serde_json::to_string_pretty(&payload)?))?;
    if let Some(path) = args.log {
        fs::write(path, log.to_csv())?;
    }
    println!(
        "tuned weights ({:.2}, {:.2}, {:.2}, {:.2}), dev MRR {:.4}",
        weights.alpha, weights.beta, weights.gamma, weights.delta, best.mrr
    );
    Ok(())
}

fn cmd_eval_run(args: EvalRunArgs) -> Result<()> {
    let method = Method::parse(&args.method)?;
    let models = LoadedModels::load(&args.models)?;
    models.require_embeddings_for(method)?;
    if args.regime != "primary" && args.regime != "stress" {
        bail!("regime must be primary or stress");
    }
    let pool_size = args.pool.unwrap_or(if args.regime == "stress" { 3000 } else { 1000 });
    if args.jobs > 1 {
        eprintln!(
            "warning: --jobs {} enabled; wall-clock timings are not comparable to single-threaded runs",
            args.jobs
        );
    }
    let mut queries = read_lexicon(&args.queries)?;
    if let Some(limit) = args.query_limit {
        queries.truncate(limit);
    }
    let universe_entries = read_lexicon(&args.universe)?;
    let universe: Vec<String> = {
        let set: std::collections::BTreeSet<&String> =
            universe_entries.iter().map(|e| &e.persian).collect();
        set.into_iter().cloned().collect()
    };
    let pairs: Vec<(String, String)> =
        queries.iter().map(|e| (e.tajik.clone(), e.persian.clone())).collect();
    let phonetic_tajik = PhoneticTable::default_tajik();
    let phonetic_persian = PhoneticTable::default_persian();
    let hybrid = models.hybrid();
    let cache = FeatureCache::build(universe.iter().map(String::as_str), &hybrid);
    let ctx = RankContext {
        models: hybrid,
        weights: models.weights,
        phonetic_tajik: &phonetic_tajik,
        phonetic_persian: &phonetic_persian,
        cache: Some(&cache),
        seed: args.seed,
    };
    let report = eval_run(
        method,
        &pairs,
        &universe,
        pool_size,
        args.seed,
        &args.regime,
        &ctx,
        ScoreMode::CrossScript,
        args.jobs,
    )?;
    let reports = [report];
    fs::write(&args.out, emit_report(&reports, ReportFormat::Csv))?;
    fs::write(args.out.with_extension("md"), emit_report(&reports, ReportFormat::Markdown))?;
    fs::write(args.out.with_extension("json"), emit_report(&reports, ReportFormat::Json))?;
    fs::write(
        args.out.with_file_name(format!(
            "{}_timings.csv",
            args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("report")
        )),
        emit_timings(&reports),
    )?;
    print!("{}", emit_report(&reports, ReportFormat::Markdown));
    Ok(())
}

fn cmd_ocr_sim(args: OcrSimArgs) -> Result<()> {
    let entries = read_lexicon(&args.input)?;
    let words: Vec<String> = entries.iter().map(|e| e.persian.clone()).collect();
    let alphabet: Vec<char> = {
        let set: std::collections::BTreeSet<char> =
            words.iter().flat_map(|w| w.chars()).collect();
        set.into_iter().collect()
    };
    let params = CorruptParams { p_word: args.p_word, p_char: args.p_char };
    let (samples, stats) = corrupt_all(&words, params, &alphabet, args.seed);
    let mut out = String::new();
    for s in &samples {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    println!(
        "corrupted {} of {} words (selected rate {:.3}, char edit rate {:.3})",
        stats.changed_words,
        stats.words,
        stats.selected_rate(),
        stats.char_edit_rate()
    );
    Ok(())
}

fn cmd_synth_gen(args: SynthGenArgs) -> Result<()> {
    let params = SynthParams {
        n_pairs: args.n,
        noise_rate: args.noise,
        exception_fraction: args.exception_fraction,
        min_len: args.min_len,
        max_len: args.max_len,
        seed: args.seed,
        ..SynthParams::default()
    };
    let (entries, truth) = gen_lexicon(&params)?;
    fs::write(&args.out, corpus::write_jsonl(&entries))?;
    fs::write(&args.truth, format!("{}\n", serde_json::to_string_pretty(&truth)?))?;
    println!("generated {} pairs ({} exceptions)", entries.len(), truth.exceptions.len());
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<()> {
    let mut config = RunConfig::new(&args.dataset, &args.out_dir);
    if let Some(path) = &args.config {
        config.apply_config_file(path)?;
        // flags always win over the config file
        config.dataset = args.dataset.clone();
        config.out_dir = args.out_dir.clone();
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.regime {
        config.apply_kv("regime", v)?;
    }
    if let Some(v) = args.pool {
        config.pool_size = v;
    }
    if let Some(v) = args.tune_pool {
        config.tune_pool_size = v;
    }
    if let Some(v) = args.bpe_vocab {
        config.bpe_vocab = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.query_limit {
        config.query_limit = Some(v);
    }
    if let Some(v) = args.jobs {
        config.jobs = v;
        if v > 1 {
            eprintln!(
                "warning: --jobs {v} enabled; wall-clock timings are not comparable to single-threaded runs"
            );
        }
    }
    if args.with_examples {
        config.with_examples = true;
    }
    if args.dump_pools {
        config.dump_pools = true;
    }
    if let Some(v) = &args.truth {
        config.truth_file = Some(v.clone());
    }
    if let Some(v) = &args.rules {
        config.rules_file = Some(v.clone());
    }
    if let Some(v) = &args.exceptions {
        config.exceptions_file = Some(v.clone());
    }

    let manifest = reproduce(&config)?;
    println!(
        "reproduce complete: {} stages, {} artifacts in {}",
        manifest.stages.len(),
        manifest.files.len(),
        config.out_dir.display()
    );
    Ok(())
}

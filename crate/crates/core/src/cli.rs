//! Command-line orchestration: `generate`, `train`, `evaluate`, `synth`.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then flags. The merged settings are written to
//! `config.json` in the output directory together with their SHA-256, and
//! every other artifact carries that hash and the seed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_documents, load_pairs, save_jsonl, Document};
use crate::counterfactual::{build_contrastive_dataset, GenerationConfig};
use crate::evaluator::{
    load_checkpoint, predict_grade, save_checkpoint, train, ModelParams, TrainConfig,
};
use crate::llm_client::{
    ClientStats, DiskCache, FacetMockTransport, HttpTransport, LlmClient, RateLimiter, RetryPolicy,
    Transport, API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MAX_IN_FLIGHT,
};
use crate::metrics::{evaluate, spearman, EvalReport, MetricError, PairedScores};
use crate::synth::{synth_corpus, synth_split, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "mole",
    version,
    about = "Counterfactual pair generation and joint-loss quality evaluation"
)]
pub struct Cli {
    /// TOML file with [generate], [train] and [synth] tables; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (original, rewritten) pairs for a labeled corpus.
    Generate(GenerateArgs),
    /// Train the evaluator, optionally with contrastive pairs.
    Train(TrainArgs),
    /// Score one or more checkpoints on a labeled test corpus.
    Evaluate(EvaluateArgs),
    /// Write a synthetic labeled corpus with planted degradations.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Use the offline rewriter instead of a remote model.
    #[arg(long)]
    pub mock: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Omit to train the supervised-only baseline.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Weight of the contrast loss.
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Repeat to compare several checkpoints in one table.
    #[arg(long, required = true, num_args = 1..)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a held-out `test.jsonl` of this many documents.
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub filler_sentences: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSettings {
    #[serde(flatten)]
    pub generation: GenerationConfig,
    pub endpoint: String,
    pub mock: bool,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    /// Requests per second; unlimited when absent.
    pub requests_per_second: Option<f64>,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self {
            generation: GenerationConfig::default(),
            endpoint: DEFAULT_ENDPOINT.into(),
            mock: false,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            max_attempts: RetryPolicy::default().max_attempts,
            initial_backoff_ms: RetryPolicy::default().initial_delay.as_millis() as u64,
            requests_per_second: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSettings {
    #[serde(flatten)]
    pub synth: SynthConfig,
    pub test_size: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            test_size: 0,
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub generate: GenerateSettings,
    pub train: TrainConfig,
    pub synth: SynthSettings,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum CommandConfig {
    Generate(GenerateSettings),
    Train(TrainConfig),
    Evaluate,
    Synth(SynthSettings),
}

/// Effective settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub inputs: BTreeMap<String, PathBuf>,
    pub settings: CommandConfig,
}

impl RunConfig {
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        for (role, path) in &self.inputs {
            if !path.exists() {
                bail!("{role} file not found: {}", path.display());
            }
        }
        Ok(())
    }

    fn stamp(&self) -> Stamp {
        Stamp {
            config_hash: self.config_hash(),
            seed: self.seed,
        }
    }

    fn write(&self) -> Result<Stamp> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create {}", self.out.display()))?;
        let stamp = self.stamp();
        write_json(
            &self.out.join("config.json"),
            &serde_json::json!({ "config_hash": stamp.config_hash, "seed": stamp.seed, "run": self }),
        )?;
        Ok(stamp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    #[serde(flatten)]
    record: &'a T,
    #[serde(flatten)]
    stamp: &'a Stamp,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_stamped_jsonl<T: Serialize>(path: &Path, records: &[T], stamp: &Stamp) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, &Stamped { record, stamp })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Generate(args) => cmd_generate(&generate_config(args, file)).map(|_| ()),
        Command::Train(args) => cmd_train(&train_config(args, file)).map(|_| ()),
        Command::Evaluate(args) => cmd_evaluate(&evaluate_config(args)).map(|_| ()),
        Command::Synth(args) => cmd_synth(&synth_config(args, file)).map(|_| ()),
    }
}

pub fn generate_config(args: GenerateArgs, file: FileConfig) -> RunConfig {
    let mut s = file.generate;
    if let Some(seed) = args.seed {
        s.generation.seed = seed;
    }
    if let Some(model) = args.model {
        s.generation.model = model;
    }
    if let Some(endpoint) = args.endpoint {
        s.endpoint = endpoint;
    }
    s.mock |= args.mock;
    RunConfig {
        seed: s.generation.seed,
        out: args.out,
        inputs: BTreeMap::from([("corpus".to_string(), args.corpus)]),
        settings: CommandConfig::Generate(s),
    }
}

pub fn train_config(args: TrainArgs, file: FileConfig) -> RunConfig {
    let mut t = file.train;
    if let Some(c) = args.c {
        t.c = c;
    }
    if let Some(seed) = args.seed {
        t.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        t.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        t.learning_rate = lr;
    }
    let mut inputs = BTreeMap::from([("corpus".to_string(), args.corpus)]);
    if let Some(pairs) = args.pairs {
        inputs.insert("pairs".into(), pairs);
    }
    RunConfig {
        seed: t.seed,
        out: args.out,
        inputs,
        settings: CommandConfig::Train(t),
    }
}

pub fn evaluate_config(args: EvaluateArgs) -> RunConfig {
    let mut inputs = BTreeMap::from([("test".to_string(), args.test)]);
    for (i, path) in args.checkpoint.into_iter().enumerate() {
        inputs.insert(format!("checkpoint{i}"), path);
    }
    RunConfig {
        seed: 0,
        out: args.out,
        inputs,
        settings: CommandConfig::Evaluate,
    }
}

pub fn synth_config(args: SynthArgs, file: FileConfig) -> RunConfig {
    let mut s = file.synth;
    if let Some(n) = args.size {
        s.synth.size = n;
    }
    if let Some(seed) = args.seed {
        s.synth.seed = seed;
    }
    if let Some(n) = args.test_size {
        s.test_size = n;
    }
    if let Some(n) = args.filler_sentences {
        s.synth.filler_sentences = n;
    }
    RunConfig {
        seed: s.synth.seed,
        out: args.out,
        inputs: BTreeMap::new(),
        settings: CommandConfig::Synth(s),
    }
}

/// What `generate` wrote, for callers that want to inspect it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    #[serde(flatten)]
    pub dataset: crate::counterfactual::DatasetSummary,
    pub llm: ClientStats,
    pub config_hash: String,
}

fn build_client(
    settings: &GenerateSettings,
    cache_dir: &Path,
) -> Result<LlmClient<Box<dyn Transport>>> {
    let transport: Box<dyn Transport> = if settings.mock {
        Box::new(FacetMockTransport::new())
    } else {
        Box::new(
            HttpTransport::from_env(settings.endpoint.clone()).map_err(|e| {
                anyhow::anyhow!(
                    "cannot configure the model client ({e}); set {API_KEY_ENV} or pass --mock"
                )
            })?,
        )
    };
    let cache = DiskCache::open(cache_dir)
        .with_context(|| format!("cannot open cache {}", cache_dir.display()))?;
    let mut client = LlmClient::new(transport)
        .with_cache(cache)
        .with_max_in_flight(settings.max_in_flight)
        .with_retry(RetryPolicy::new(
            settings.max_attempts,
            Duration::from_millis(settings.initial_backoff_ms),
        ));
    if let Some(rps) = settings.requests_per_second {
        if !(rps.is_finite() && rps > 0.0) {
            bail!("requests_per_second must be positive, got {rps}");
        }
        client =
            client.with_rate_limit(RateLimiter::new(settings.max_in_flight.max(1) as u32, rps));
    }
    Ok(client)
}

/// Writes `pairs.jsonl`, `skips.jsonl`, `summary.json` and `config.json`.
/// Completions are cached under `out/cache`.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateSummary> {
    let CommandConfig::Generate(settings) = &config.settings else {
        bail!("not a generate configuration");
    };
    config.validate()?;
    let corpus = load_documents(&config.inputs["corpus"])?;
    let client = build_client(settings, &config.out.join("cache"))?;
    let stamp = config.write()?;

    let mut dataset = build_contrastive_dataset(&corpus, &client, &settings.generation)?;
    for pair in &mut dataset.pairs {
        pair.provenance.config_hash = Some(stamp.config_hash.clone());
    }
    save_jsonl(&dataset.pairs, &config.out.join("pairs.jsonl"))?;
    write_stamped_jsonl(&config.out.join("skips.jsonl"), &dataset.skips, &stamp)?;
    let summary = GenerateSummary {
        dataset: dataset.summary,
        llm: client.stats(),
        config_hash: stamp.config_hash,
    };
    write_json(&config.out.join("summary.json"), &summary)?;
    if summary.dataset.pairs_built == 0 {
        let cause = dataset.skips.first().map_or("", |s| s.reason.as_str());
        bail!("no pair could be built; first failure: {cause}");
    }
    println!(
        "{} pairs, {} skipped, {} model calls, {} cache hits -> {}",
        summary.dataset.pairs_built,
        summary.dataset.skipped,
        summary.llm.transport_calls,
        summary.llm.cache_hits,
        config.out.display()
    );
    Ok(summary)
}

/// Writes `checkpoint.json`, `train_log.jsonl` and `config.json`.
pub fn cmd_train(config: &RunConfig) -> Result<crate::evaluator::TrainOutput> {
    let CommandConfig::Train(train_config) = &config.settings else {
        bail!("not a train configuration");
    };
    config.validate()?;
    let corpus = load_documents(&config.inputs["corpus"])?;
    let pairs = match config.inputs.get("pairs") {
        Some(path) => load_pairs(path)?,
        None => Vec::new(),
    };
    let stamp = config.write()?;
    let output = train(&corpus, &pairs, train_config)?;
    let metadata = serde_json::json!({
        "config_hash": stamp.config_hash,
        "seed": stamp.seed,
        "train": train_config,
        "grade_scale": "0-4; raw scores are binned with equal-width bins before training",
        "labeled_documents": corpus.len(),
        "pairs": pairs.len(),
        "final": output.log.last(),
    });
    save_checkpoint(
        &config.out.join("checkpoint.json"),
        &output.params,
        metadata,
    )?;
    write_stamped_jsonl(&config.out.join("train_log.jsonl"), &output.log, &stamp)?;
    if let Some(last) = output.log.last() {
        println!(
            "trained {} epochs on {} documents and {} pairs (C = {}): L_cls {:.4} L_ctr {:.4} L {:.4}",
            output.log.len(),
            corpus.len(),
            pairs.len(),
            train_config.c,
            last.cls,
            last.ctr,
            last.total
        );
    }
    Ok(output)
}

/// Metrics for one checkpoint on the test corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub checkpoint: PathBuf,
    /// Seed recorded in the checkpoint, if any.
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub report: EvalReport,
    /// Spearman ρ against each optional sub-score column of the test set.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sub_score_spearman: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

fn row_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    match (stem.as_deref(), path.parent().and_then(Path::file_name)) {
        (Some("checkpoint"), Some(dir)) => dir.to_string_lossy().into_owned(),
        (Some(stem), _) => stem.to_string(),
        _ => path.display().to_string(),
    }
}

fn predictions(params: &ModelParams, test: &[Document]) -> Result<Vec<u8>> {
    test.iter()
        .map(|d| Ok(predict_grade(&d.title, &d.body, params)?.0))
        .collect()
}

fn sub_score_spearman(test: &[Document], pred: &[u8]) -> Result<BTreeMap<String, Option<f64>>> {
    let keys: std::collections::BTreeSet<&String> =
        test.iter().flat_map(|d| d.sub_scores.keys()).collect();
    let mut out = BTreeMap::new();
    for key in keys {
        if !test.iter().all(|d| d.sub_scores.contains_key(key)) {
            log::warn!("sub-score {key:?} is missing for some documents; skipped");
            continue;
        }
        let gold = test.iter().map(|d| d.sub_scores[key]).collect();
        let scores = PairedScores::new(gold, pred.iter().map(|&g| f64::from(g)).collect())?;
        let rho = match spearman(&scores) {
            Ok(v) => Some(v),
            Err(MetricError::Undefined { .. } | MetricError::TooShort { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        out.insert(key.clone(), rho);
    }
    Ok(out)
}

/// Writes `report.json`, `report.txt` and `config.json`, and prints the
/// table. With several checkpoints the rows are aligned for comparison.
pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluationOutput> {
    config.validate()?;
    let test_path = &config.inputs["test"];
    let test = load_documents(test_path)?;
    if let Some(d) = test.iter().find(|d| d.grade.is_none()) {
        bail!(
            "test document {:?} in {} has no grade",
            d.id,
            test_path.display()
        );
    }
    let gold: Vec<u8> = test.iter().map(|d| d.grade.expect("checked")).collect();
    let checkpoints: Vec<&PathBuf> = config
        .inputs
        .iter()
        .filter(|(k, _)| k.starts_with("checkpoint"))
        .map(|(_, v)| v)
        .collect();

    let mut rows = Vec::new();
    for path in checkpoints {
        let ckpt = load_checkpoint(path)?;
        let params = ckpt
            .to_params()
            .with_context(|| format!("checkpoint {} is inconsistent", path.display()))?;
        let pred = predictions(&params, &test)
            .with_context(|| format!("checkpoint {}", path.display()))?;
        rows.push(ReportRow {
            name: row_name(path),
            checkpoint: path.clone(),
            seed: ckpt
                .metadata
                .get("seed")
                .and_then(serde_json::Value::as_u64),
            report: evaluate(&gold, &pred)?,
            sub_score_spearman: sub_score_spearman(&test, &pred)?,
        });
    }
    let mut run = config.clone();
    run.seed = rows.first().and_then(|r| r.seed).unwrap_or(0);
    let stamp = run.write()?;
    let output = EvaluationOutput {
        config_hash: stamp.config_hash,
        seed: stamp.seed,
        rows,
    };
    write_json(&config.out.join("report.json"), &output)?;
    let table = format_table(&output.rows);
    fs::write(config.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(output)
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "undef".to_string(), |v| format!("{v:.3}"))
}

/// Fixed-width table: ρ, τ, QWK, Acc.%, then F1 per grade and macro F1.
pub fn format_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "model");
    for h in [
        "rho", "tau", "QWK", "Acc.%", "F1@0", "F1@1", "F1@2", "F1@3", "F1@4", "macroF1",
    ] {
        let _ = write!(out, " {h:>7}");
    }
    out.push('\n');
    for row in rows {
        let r = &row.report;
        let _ = write!(out, "{:<width$}", row.name);
        let mut cells = vec![
            cell(r.spearman),
            cell(r.kendall),
            cell(r.qwk),
            format!("{:.1}", r.accuracy_percent),
        ];
        cells.extend(r.f1_per_class.iter().map(|&f| cell(Some(f))));
        cells.push(cell(Some(r.macro_f1)));
        for c in cells {
            let _ = write!(out, " {c:>7}");
        }
        out.push('\n');
    }
    let keys: std::collections::BTreeSet<&String> = rows
        .iter()
        .flat_map(|r| r.sub_score_spearman.keys())
        .collect();
    if !keys.is_empty() {
        let _ = write!(out, "\nsub-score rho\n{:<width$}", "model");
        for k in &keys {
            let _ = write!(out, " {:>w$}", k, w = k.len().max(7));
        }
        out.push('\n');
        for row in rows {
            let _ = write!(out, "{:<width$}", row.name);
            for k in &keys {
                let v = row.sub_score_spearman.get(*k).copied().flatten();
                let _ = write!(out, " {:>w$}", cell(v), w = k.len().max(7));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `corpus.jsonl`, `degradations.jsonl`, optionally `test.jsonl` and
/// `test_degradations.jsonl`, and `config.json`.
pub fn cmd_synth(config: &RunConfig) -> Result<()> {
    let CommandConfig::Synth(settings) = &config.settings else {
        bail!("not a synth configuration");
    };
    let stamp = config.write()?;
    let (train_set, test_set) = if settings.test_size > 0 {
        let split = synth_split(&settings.synth, settings.test_size);
        (split.train, Some(split.test))
    } else {
        (synth_corpus(&settings.synth), None)
    };
    write_stamped_jsonl(
        &config.out.join("corpus.jsonl"),
        &train_set.documents,
        &stamp,
    )?;
    write_stamped_jsonl(
        &config.out.join("degradations.jsonl"),
        &train_set.degradations,
        &stamp,
    )?;
    if let Some(test) = &test_set {
        write_stamped_jsonl(&config.out.join("test.jsonl"), &test.documents, &stamp)?;
        write_stamped_jsonl(
            &config.out.join("test_degradations.jsonl"),
            &test.degradations,
            &stamp,
        )?;
    }
    println!(
        "{} training documents{} -> {}",
        train_set.documents.len(),
        test_set
            .as_ref()
            .map(|t| format!(", {} test documents", t.documents.len()))
            .unwrap_or_default(),
        config.out.display()
    );
    Ok(())
}

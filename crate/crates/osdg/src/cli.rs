//! Command line interface.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, missing input files,
//! unsupported language, bad service config), 2 data or validation error,
//! 3 runtime failure (divergence, I/O, translator or extractor failure).
//! Results go to stdout, logs to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use osdg_core::metrics::BinaryMetrics;
use osdg_core::pipeline::{NoTranslator, TranslationError};
use osdg_core::{
    AggregationConfig, Classifier, Corpus, LanguageCode, Ontology, OvrModelSet, PipelineError, TrainConfig,
    Translator,
};
use thiserror::Error;

use crate::community_store::{self, CommunityStore, StoreError};
use crate::config::ServiceConfig;
use crate::corpus_io::{self, CorpusIoError, Strictness};
use crate::extract::{ExtractError, PdfExtractor};
use crate::model_io::{self, ModelIoError};
use crate::ontology_io;
use crate::service::{self, AppState, StartupError};
use crate::train::{self, TrainOptions, TrainingError};
use crate::translate::{DictionaryBackend, HttpBackend, HttpBackendConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        if e.is_runtime() {
            CliError::Runtime(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<CorpusIoError> for CliError {
    fn from(e: CorpusIoError) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        match e {
            ModelIoError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptyText => CliError::Usage(e.to_string()),
            PipelineError::EmptyDocument | PipelineError::InvalidConfig(_) => CliError::Data(e.to_string()),
            PipelineError::Translation(TranslationError::Unavailable(_)) => {
                CliError::Usage(format!("{e}; pass --dictionary or --translator-endpoint"))
            }
            PipelineError::Translation(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => CliError::Runtime(e.to_string()),
            StoreError::AlreadyInitialized(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StartupError> for CliError {
    fn from(e: StartupError) -> Self {
        match e {
            StartupError::Model(_) | StartupError::Ontology(_) | StartupError::Dictionary(_) => {
                CliError::Data(e.to_string())
            }
            StartupError::Extractor(_) | StartupError::Cors(_) => CliError::Usage(e.to_string()),
            StartupError::Feedback(_) | StartupError::Community(_) | StartupError::Bind { .. } | StartupError::Serve(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "osdg", version, about = "Classify text by Sustainable Development Goal")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the sixteen goal models from a community dataset CSV.
    Train(TrainArgs),
    /// Classify a single text and print the result as JSON.
    Classify(ClassifyArgs),
    /// Classify a long document (plain text or PDF) and print the SDG distribution.
    ClassifyDoc(ClassifyDocArgs),
    /// Recompute held-out metrics of a trained model.
    Eval(EvalArgs),
    /// Write the labels collected by a labeling store as a dataset CSV.
    ExportDataset(ExportArgs),
    /// Create a labeling store from a task pool.
    InitStore(InitStoreArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Ontology utilities.
    #[command(subcommand)]
    Ontology(OntologyCommand),
}

#[derive(Debug, clap::Args)]
pub struct SplitArgs {
    /// Minimum agreement for a row to be used.
    #[arg(long, default_value_t = 0.6)]
    pub min_agreement: f64,
    /// Share of the curated rows held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Seed for the split and for training.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model file to write. Metrics go to the same path with a `.metrics.json` extension.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Minimum document frequency of a vocabulary term.
    #[arg(long, default_value_t = 5)]
    pub min_df: usize,
    #[arg(long, default_value_t = 50_000)]
    pub max_features: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
}

#[derive(Debug, clap::Args)]
pub struct TranslatorArgs {
    /// Phrase-table JSON used to translate non-English input.
    #[arg(long, conflicts_with = "translator_endpoint")]
    pub dictionary: Option<PathBuf>,
    /// HTTP translation endpoint used for non-English input.
    #[arg(long)]
    pub translator_endpoint: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Ontology CSV; the bundled seed ontology when omitted.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Input language as an ISO 639-1 code.
    #[arg(long, default_value = "en")]
    pub language: String,
    /// Keyword matches needed to verify a goal.
    #[arg(long, default_value_t = 1)]
    pub min_hits: usize,
    #[command(flatten)]
    pub translator: TranslatorArgs,
}

#[derive(Debug, clap::Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Read the text from stdin.
    #[arg(long, conflicts_with = "text")]
    pub stdin: bool,
    pub text: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct ClassifyDocArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// A `.pdf` file (needs --pdf-extractor) or UTF-8 text.
    #[arg(long)]
    pub file: PathBuf,
    /// Extractor command template, e.g. "pdftotext {input} {output}".
    #[arg(long)]
    pub pdf_extractor: Option<String>,
    /// Minimum share of related chunks for a document to count as related.
    #[arg(long, default_value_t = AggregationConfig::default().relevance_threshold)]
    pub relevance_threshold: f64,
    /// Minimum share of related chunks for a goal to be reported.
    #[arg(long, default_value_t = AggregationConfig::default().sdg_share_threshold)]
    pub sdg_share_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[command(flatten)]
    pub split_args: SplitArgs,
}

#[derive(Debug, clap::Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rows need at least this many votes to be exported.
    #[arg(long, default_value_t = 3)]
    pub min_validators: u32,
}

#[derive(Debug, clap::Args)]
pub struct InitStoreArgs {
    /// Task pool CSV in dataset layout.
    #[arg(long)]
    pub pool: PathBuf,
    /// File with the ten intro task ids, one per line.
    #[arg(long)]
    pub intro: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Keep SDG 17 rows of the pool as tasks.
    #[arg(long)]
    pub include_sdg17: bool,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum OntologyCommand {
    /// Load an ontology CSV and report terms per goal.
    Validate { path: PathBuf },
}

/// Parses `args` and runs the command, writing results to `out`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::ClassifyDoc(a) => cmd_classify_doc(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::ExportDataset(a) => cmd_export(a, out),
        Command::InitStore(a) => cmd_init_store(a, out),
        Command::Serve(a) => cmd_serve(a),
        Command::Ontology(OntologyCommand::Validate { path }) => cmd_ontology_validate(&path, out),
    }
}

fn require_file(what: &str, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}

fn emit_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

fn load_dataset(path: &Path) -> Result<Corpus, CliError> {
    require_file("dataset", path)?;
    let report = corpus_io::load_community_dataset(path, Strictness::Strict)?;
    for w in &report.warnings {
        tracing::warn!("{w}");
    }
    tracing::info!(rows = report.corpus.len(), "dataset loaded");
    Ok(report.corpus)
}

fn train_options(split: &SplitArgs) -> TrainOptions {
    let mut o = TrainOptions {
        min_agreement: split.min_agreement,
        test_fraction: split.test_fraction,
        ..TrainOptions::default()
    };
    o.model.seed = split.seed;
    o
}

/// Path of the metrics report written next to a model file.
pub fn metrics_path(model: &Path) -> PathBuf {
    model.with_extension("metrics.json")
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load_dataset(&a.dataset)?;
    let options = TrainOptions {
        min_df: a.min_df,
        max_features: a.max_features,
        model: TrainConfig {
            epochs: a.epochs,
            lambda: a.lambda,
            lr: a.lr,
            ..train_options(&a.split).model
        },
        ..train_options(&a.split)
    };
    let (train_rows, test_rows) = train::prepare_split(&corpus, &options)?;
    tracing::info!(train = train_rows.len(), test = test_rows.len(), "split ready");
    let model_set = train::train_model_set(&train_rows, &options)?;
    let metrics = train::evaluate(&model_set, &test_rows)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    model_io::save_model_set(&model_set, &a.out)?;
    let report = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    let report_path = metrics_path(&a.out);
    fs::write(&report_path, report).map_err(|e| CliError::Runtime(format!("{}: {e}", report_path.display())))?;
    emit(out, &train::metrics_table(&metrics))
}

fn load_model(path: &Path) -> Result<OvrModelSet, CliError> {
    require_file("model", path)?;
    Ok(model_io::load_model_set(path)?)
}

fn load_ontology(path: Option<&Path>) -> Result<Ontology, CliError> {
    let Some(path) = path else {
        return Ok(ontology_io::seed_ontology());
    };
    require_file("ontology", path)?;
    let (ontology, warnings) = ontology_io::load_ontology(path).map_err(|e| CliError::Data(e.to_string()))?;
    for w in warnings {
        tracing::warn!("ontology: {w}");
    }
    Ok(ontology)
}

fn translator(a: &TranslatorArgs) -> Result<Box<dyn Translator>, CliError> {
    if let Some(path) = &a.dictionary {
        require_file("dictionary", path)?;
        let d = DictionaryBackend::load(path).map_err(|e| CliError::Data(e.to_string()))?;
        return Ok(Box::new(d));
    }
    if let Some(endpoint) = &a.translator_endpoint {
        return Ok(Box::new(HttpBackend::new(HttpBackendConfig {
            endpoint: endpoint.clone(),
            ..HttpBackendConfig::default()
        })));
    }
    Ok(Box::new(NoTranslator))
}

struct Loaded {
    model_set: OvrModelSet,
    ontology: Ontology,
    translator: Box<dyn Translator>,
    language: LanguageCode,
    min_hits: usize,
}

impl Loaded {
    fn new(a: &ModelArgs) -> Result<Self, CliError> {
        let language = LanguageCode::from_str(&a.language).map_err(|e| CliError::Usage(e.to_string()))?;
        if a.min_hits == 0 {
            return Err(CliError::Usage("--min-hits must be at least 1".into()));
        }
        Ok(Loaded {
            model_set: load_model(&a.model)?,
            ontology: load_ontology(a.ontology.as_deref())?,
            translator: translator(&a.translator)?,
            language,
            min_hits: a.min_hits,
        })
    }

    fn classifier(&self) -> Classifier<'_> {
        let mut c = Classifier::new(&self.model_set, &self.ontology, &*self.translator);
        c.min_hits = self.min_hits;
        c
    }
}

fn cmd_classify(a: ClassifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match (a.stdin, a.text) {
        (true, _) => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Usage(format!("cannot read stdin: {e}")))?;
            s
        }
        (false, Some(t)) => t,
        (false, None) => return Err(CliError::Usage("pass TEXT or --stdin".into())),
    };
    if text.trim().is_empty() {
        return Err(CliError::Usage("input text is empty".into()));
    }
    let loaded = Loaded::new(&a.model)?;
    let result = loaded.classifier().classify_text(&text, loaded.language)?;
    emit_json(out, &result)
}

fn cmd_classify_doc(a: ClassifyDocArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_file("file", &a.file)?;
    let config = AggregationConfig {
        relevance_threshold: a.relevance_threshold,
        sdg_share_threshold: a.sdg_share_threshold,
        ..AggregationConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let loaded = Loaded::new(&a.model)?;
    let bytes = fs::read(&a.file).map_err(|e| CliError::Runtime(format!("{}: {e}", a.file.display())))?;
    let is_pdf = bytes.starts_with(b"%PDF")
        || a.file.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
    let text = if is_pdf {
        let template = a
            .pdf_extractor
            .as_deref()
            .ok_or_else(|| CliError::Data("input is a PDF but no --pdf-extractor is configured".into()))?;
        let extractor = PdfExtractor::new(template).map_err(|e| CliError::Usage(e.to_string()))?;
        extractor.extract(&bytes).map_err(|e| match e {
            ExtractError::EmptyText | ExtractError::NotUtf8 => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        })?
    } else {
        String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not UTF-8 text", a.file.display())))?
    };
    let result = loaded.classifier().classify_document(&text, loaded.language, &config)?;
    emit_json(out, &result)
}

/// Metrics of `model_set` on the chosen part of the curated dataset.
pub fn eval_metrics(
    model_set: &OvrModelSet,
    corpus: &Corpus,
    split: Split,
    options: &TrainOptions,
) -> Result<Vec<BinaryMetrics>, CliError> {
    let rows = match split {
        Split::All => corpus
            .without_excluded()
            .filter_high_agreement(options.min_agreement, options.require_positive_majority),
        Split::Train => train::prepare_split(corpus, options)?.0,
        Split::Test => train::prepare_split(corpus, options)?.1,
    };
    Ok(train::evaluate(model_set, &rows)?)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model_set = load_model(&a.model)?;
    let corpus = load_dataset(&a.dataset)?;
    let metrics = eval_metrics(&model_set, &corpus, a.split, &train_options(&a.split_args))?;
    emit_json(out, &metrics)
}

fn cmd_export(a: ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_file("store", &a.store)?;
    let store = CommunityStore::open(&a.store, 0)?;
    let rows = store.export_dataset(&a.out, a.min_validators)?;
    emit(out, &format!("exported {rows} row(s) to {}\n", a.out.display()))
}

fn cmd_init_store(a: InitStoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_file("pool", &a.pool)?;
    require_file("intro list", &a.intro)?;
    let tasks = community_store::load_pool(&a.pool, a.include_sdg17)?;
    let intro_text =
        fs::read_to_string(&a.intro).map_err(|e| CliError::Runtime(format!("{}: {e}", a.intro.display())))?;
    let intro: Vec<String> = intro_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    CommunityStore::init(&a.store, &tasks, &intro)?;
    emit(out, &format!("initialized {} with {} task(s)\n", a.store.display(), tasks.len()))
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let config = ServiceConfig::load(&a.config).map_err(|e| CliError::Usage(e.to_string()))?;
    let state = AppState::from_config(&config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(service::serve_with_shutdown(&config, state, service::shutdown_signal(), |_| {}))?;
    Ok(())
}

fn cmd_ontology_validate(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    require_file("ontology", path)?;
    let (ontology, warnings) = ontology_io::load_ontology(path).map_err(|e| CliError::Data(e.to_string()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut report = format!("ontology {} ({} terms)\n", ontology.version(), ontology.terms().len());
    for sdg in osdg_core::SdgId::all() {
        report.push_str(&format!("{sdg:>4} {:>5}\n", ontology.terms_for(sdg).count()));
    }
    emit(out, &report)
}

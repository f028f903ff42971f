//! Pipeline stages over a workspace directory. Each stage reads its inputs
//! from the conventional location, writes its outputs next to them and
//! returns a summary that prints as one `key=value` line.
//!
//! ```text
//! corpus/articles.jsonl
//! claims/claims.jsonl, claims/flagged.json
//! viewpoints/candidates.jsonl, machine.json, review.txt, reviewed.json
//! profiles/actors.jsonl, profiles/overrides.tsv, profiles/cache/
//! dataset/instances.jsonl, instances.csv, build_report.json, finetune_*.jsonl
//! runs/manifest.json, runs/<cell>/predictions.jsonl, runs/<cell>/report.*
//! analytics/<dimension>.csv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classify::{self, Cell, ClassifyError, ManifestCell, RunManifest, SuiteContext, MANIFEST_FILE};
use crate::config::{Config, ConfigError};
use crate::dataset::{self, BuildOptions, BuildReport, DatasetError};
use crate::eval::{self, AnalyticsTable, Dimension, EvalError, MetricsReport};
use crate::extraction::{self, ExtractionError};
use crate::llm::{export_finetune_file, Gateway, LlmError};
use crate::model::io::{self as mio, read_json, read_jsonl, write_json, write_jsonl};
use crate::model::{ContextConfig, DatasetInstance, LearningMode, ModelError, Split, ViewpointSet};
use crate::prompts::PromptTemplates;
use crate::viewpoints::{self, CandidateViewpoint, ViewpointError};
use crate::wikidata::{Enricher, OverrideMap, ProfileCache, WikidataApi, WikidataError};

/// How a failure should be reported to an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Input,
    Remote,
    Validation,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Input => 3,
            ErrorCategory::Remote => 4,
            ErrorCategory::Validation => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage input missing: {0} (run the earlier stage or pass the path explicitly)")]
    StageInputMissing(PathBuf),
    #[error("workspace is locked by another process ({0}); remove the file if no other run is active")]
    Locked(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Integrity(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Viewpoint(#[from] ViewpointError),
    #[error(transparent)]
    Wikidata(#[from] WikidataError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn llm_category(e: &LlmError) -> ErrorCategory {
    match e {
        LlmError::Auth(_) | LlmError::RateLimited { .. } | LlmError::Transport(_) | LlmError::BadResponse(_) => ErrorCategory::Remote,
        LlmError::ReplayMiss(_) | LlmError::Transcript { .. } | LlmError::EmptySplit => ErrorCategory::Input,
        LlmError::InvalidRequest(_) | LlmError::Export(_) => ErrorCategory::Validation,
    }
}

fn model_category(e: &ModelError) -> ErrorCategory {
    match e {
        ModelError::Io { .. } => ErrorCategory::Input,
        _ => ErrorCategory::Validation,
    }
}

impl PipelineError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            PipelineError::StageInputMissing(_) | PipelineError::Locked(_) | PipelineError::Io { .. } => ErrorCategory::Input,
            PipelineError::Usage(_) | PipelineError::Config(_) => ErrorCategory::Config,
            PipelineError::Integrity(_) => ErrorCategory::Validation,
            PipelineError::Model(e) => model_category(e),
            PipelineError::Llm(e) => llm_category(e),
            PipelineError::Extraction(ExtractionError::LlmFailure { source, .. }) => llm_category(source),
            PipelineError::Extraction(_) => ErrorCategory::Validation,
            PipelineError::Viewpoint(ViewpointError::LlmFailure(e)) => llm_category(e),
            PipelineError::Viewpoint(_) => ErrorCategory::Validation,
            PipelineError::Wikidata(e) => match e {
                WikidataError::Transport(_) | WikidataError::RateLimited { .. } => ErrorCategory::Remote,
                WikidataError::FixtureMissing(_) | WikidataError::Io { .. } | WikidataError::Cache { .. } => ErrorCategory::Input,
                _ => ErrorCategory::Validation,
            },
            PipelineError::Dataset(DatasetError::Model(e)) => model_category(e),
            PipelineError::Dataset(_) => ErrorCategory::Validation,
            PipelineError::Classify(e) => match e {
                ClassifyError::Llm { source, .. } => llm_category(source),
                ClassifyError::MissingFineTunedModel(_) => ErrorCategory::Config,
                ClassifyError::Io { .. } => ErrorCategory::Input,
                ClassifyError::Model(m) => model_category(m),
                _ => ErrorCategory::Validation,
            },
            PipelineError::Eval(_) => ErrorCategory::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// Conventional file locations inside a workspace root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus/articles.jsonl")
    }
    pub fn claims(&self) -> PathBuf {
        self.root.join("claims/claims.jsonl")
    }
    pub fn flagged(&self) -> PathBuf {
        self.root.join("claims/flagged.json")
    }
    pub fn candidates(&self) -> PathBuf {
        self.root.join("viewpoints/candidates.jsonl")
    }
    pub fn machine_set(&self) -> PathBuf {
        self.root.join("viewpoints/machine.json")
    }
    pub fn review_file(&self) -> PathBuf {
        self.root.join("viewpoints/review.txt")
    }
    pub fn reviewed_set(&self) -> PathBuf {
        self.root.join("viewpoints/reviewed.json")
    }
    pub fn profiles(&self) -> PathBuf {
        self.root.join("profiles/actors.jsonl")
    }
    pub fn overrides(&self) -> PathBuf {
        self.root.join("profiles/overrides.tsv")
    }
    pub fn profile_cache(&self) -> PathBuf {
        self.root.join("profiles/cache")
    }
    pub fn instances(&self) -> PathBuf {
        self.root.join("dataset/instances.jsonl")
    }
    pub fn instances_csv(&self) -> PathBuf {
        self.root.join("dataset/instances.csv")
    }
    pub fn build_report(&self) -> PathBuf {
        self.root.join("dataset/build_report.json")
    }
    pub fn finetune(&self, split: Split, context: ContextConfig) -> PathBuf {
        self.root.join(format!("dataset/finetune_{}_{}.jsonl", split.as_str(), context.as_str().replace('+', "-")))
    }
    pub fn runs(&self) -> PathBuf {
        self.root.join("runs")
    }
    pub fn manifest(&self) -> PathBuf {
        self.runs().join(MANIFEST_FILE)
    }
    pub fn analytics(&self, dimension: Dimension) -> PathBuf {
        self.root.join(format!("analytics/{}.csv", dimension.as_str()))
    }
    fn lock_path(&self) -> PathBuf {
        self.root.join(".newsview.lock")
    }

    /// Exclusive lock for the duration of one stage; released on drop.
    pub fn lock(&self) -> Result<WorkspaceLock> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.lock_path();
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WorkspaceLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::StageInputMissing(path))
    }
}

/// Shared state for the stages of one invocation.
pub struct Stage<'a> {
    pub ws: &'a Workspace,
    pub config: &'a Config,
    pub templates: PromptTemplates,
}

impl<'a> Stage<'a> {
    pub fn new(ws: &'a Workspace, config: &'a Config) -> Result<Self> {
        let templates = match &config.prompts_dir {
            Some(dir) => PromptTemplates::load_dir(dir).map_err(io_err(dir))?,
            None => PromptTemplates::default(),
        };
        Ok(Self { ws, config, templates })
    }
}

macro_rules! summary_display {
    ($ty:ty, $name:literal, $($field:ident),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str($name)?;
                $(write!(f, " {}={}", stringify!($field), self.$field)?;)+
                Ok(())
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub articles: usize,
    pub output: String,
}
summary_display!(IngestSummary, "ingest", articles, output);

pub fn ingest(stage: &Stage<'_>, input: &Path) -> Result<IngestSummary> {
    let articles = mio::ingest_raw_corpus(&require(input.to_path_buf())?)?;
    let out = stage.ws.corpus();
    mio::save_corpus(&out, &articles)?;
    Ok(IngestSummary { articles: articles.len(), output: out.display().to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub articles: usize,
    pub claims: usize,
    pub flagged: usize,
}
summary_display!(ExtractSummary, "extract", articles, claims, flagged);

pub fn extract(stage: &Stage<'_>, gateway: &Gateway) -> Result<ExtractSummary> {
    let corpus = mio::load_corpus(&require(stage.ws.corpus())?)?;
    let out = extraction::extract_corpus(
        &corpus,
        &stage.config.topic,
        gateway,
        &stage.templates,
        &stage.config.extraction,
        stage.config.parallelism,
    )?;
    mio::save_claims(&stage.ws.claims(), &out.claims)?;
    write_json(&stage.ws.flagged(), &out.flagged)?;
    Ok(ExtractSummary { articles: corpus.len(), claims: out.claims.len(), flagged: out.flagged.len() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposeSummary {
    pub utterances: usize,
    pub batches: usize,
    pub candidates: usize,
}
summary_display!(ProposeSummary, "viewpoints-propose", utterances, batches, candidates);

pub fn propose(stage: &Stage<'_>, gateway: &Gateway) -> Result<ProposeSummary> {
    let claims = mio::load_claims(&require(stage.ws.claims())?)?;
    let utterances: Vec<String> = claims.iter().map(|c| c.utterance.clone()).collect();
    let batches = viewpoints::partition_utterances(&utterances, stage.config.viewpoints.batch_token_budget)?.len();
    let candidates = viewpoints::propose_all(
        &utterances,
        &stage.config.topic.topic,
        gateway,
        &stage.templates,
        &stage.config.viewpoints,
        stage.config.parallelism,
    )?;
    write_jsonl(&stage.ws.candidates(), &candidates)?;
    Ok(ProposeSummary { utterances: utterances.len(), batches, candidates: candidates.len() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidateSummary {
    pub candidates: usize,
    pub viewpoints: usize,
}
summary_display!(ConsolidateSummary, "viewpoints-consolidate", candidates, viewpoints);

pub fn consolidate(stage: &Stage<'_>, gateway: &Gateway) -> Result<ConsolidateSummary> {
    let candidates: Vec<CandidateViewpoint> = read_jsonl(&require(stage.ws.candidates())?)?;
    let set = viewpoints::consolidate_viewpoints(&candidates, &stage.config.topic.topic, gateway, &stage.templates, &stage.config.viewpoints)?;
    mio::save_viewpoints(&stage.ws.machine_set(), &set)?;
    Ok(ConsolidateSummary { candidates: candidates.len(), viewpoints: set.viewpoints.len() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportReviewSummary {
    pub viewpoints: usize,
    pub output: String,
}
summary_display!(ExportReviewSummary, "viewpoints-export-review", viewpoints, output);

pub fn export_review(stage: &Stage<'_>) -> Result<ExportReviewSummary> {
    let set = mio::load_viewpoints(&require(stage.ws.machine_set())?)?;
    let text = viewpoints::export_for_review(&set)?;
    let out = stage.ws.review_file();
    mio::ensure_parent(&out)?;
    fs::write(&out, text).map_err(io_err(&out))?;
    Ok(ExportReviewSummary { viewpoints: set.viewpoints.len(), output: out.display().to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReviewSummary {
    pub viewpoints: usize,
    pub kept: usize,
    pub edited: usize,
    pub added: usize,
    pub removed: usize,
}
summary_display!(ImportReviewSummary, "viewpoints-import-review", viewpoints, kept, edited, added, removed);

impl ImportReviewSummary {
    fn of(set: &ViewpointSet) -> Self {
        use crate::model::ReviewAction::*;
        let count = |a| set.review_log.iter().filter(|e| e.action == a).count();
        Self { viewpoints: set.viewpoints.len(), kept: count(Kept), edited: count(Edited), added: count(Added), removed: count(Removed) }
    }
}

pub fn import_review(stage: &Stage<'_>, review: Option<&Path>) -> Result<ImportReviewSummary> {
    let baseline = mio::load_viewpoints(&require(stage.ws.machine_set())?)?;
    let path = require(review.map(Path::to_path_buf).unwrap_or_else(|| stage.ws.review_file()))?;
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let set = viewpoints::import_reviewed(&text, &baseline)?;
    mio::save_viewpoints(&stage.ws.reviewed_set(), &set)?;
    Ok(ImportReviewSummary::of(&set))
}

/// Installs the bundled, already reviewed immigration viewpoint set.
pub fn install_case_study(stage: &Stage<'_>) -> Result<ImportReviewSummary> {
    let set = viewpoints::immigration_case_study();
    mio::save_viewpoints(&stage.ws.reviewed_set(), &set)?;
    Ok(ImportReviewSummary::of(&set))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichSummary {
    pub actors: usize,
    pub resolved: usize,
    pub unresolved: usize,
}
summary_display!(EnrichSummary, "enrich", actors, resolved, unresolved);

pub fn enrich(stage: &Stage<'_>, api: Arc<dyn WikidataApi>) -> Result<EnrichSummary> {
    let claims = mio::load_claims(&require(stage.ws.claims())?)?;
    let names: Vec<String> = claims.iter().map(|c| c.actor_name.clone()).collect();
    let wd = &stage.config.wikidata;
    let enricher = Enricher::new(api, ProfileCache::new(&stage.ws.profile_cache()), OverrideMap::load(&stage.ws.overrides())?)
        .with_properties(wd.properties.clone())
        .with_policy(wd.selection.clone());
    let actors = enricher.enrich(&names, stage.config.parallelism)?;
    mio::save_profiles(&stage.ws.profiles(), &actors)?;
    let resolved = actors.iter().filter(|a| a.profile.is_some()).count();
    Ok(EnrichSummary { actors: actors.len(), resolved, unresolved: actors.len() - resolved })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub input_pairs: usize,
    pub removed_pairs: usize,
    pub instances: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}
summary_display!(BuildSummary, "build-dataset", input_pairs, removed_pairs, instances, train, validation, test);

impl BuildSummary {
    pub fn of(r: &BuildReport) -> Self {
        let n = |s| r.split_counts.get(&s).copied().unwrap_or(0);
        Self {
            input_pairs: r.input_pairs,
            removed_pairs: r.removed_pairs,
            instances: r.final_instances,
            train: n(Split::Train),
            validation: n(Split::Validation),
            test: n(Split::Test),
        }
    }
}

/// Reads a two-column CSV (`instance_id,split`).
pub fn load_published_split(path: &Path) -> Result<BTreeMap<String, Split>> {
    let fmt = |record: usize, message: String| ModelError::Format { path: path.display().to_string(), record, message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fmt(0, e.to_string()))?;
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| fmt(i + 1, e.to_string()))?;
        let (Some(id), Some(split)) = (row.get(0), row.get(1)) else {
            return Err(fmt(i + 1, "expected instance_id,split".into()).into());
        };
        out.insert(id.trim().to_string(), split.parse()?);
    }
    Ok(out)
}

/// Inputs of `build_dataset` beyond the workspace conventions.
#[derive(Debug, Clone, Copy)]
pub struct BuildInputs<'p> {
    pub annotations: &'p Path,
    /// CSV of `instance_id,split` replacing the seeded split.
    pub published_split: Option<&'p Path>,
    /// Newline-separated claim ids; when given, only these claims (and
    /// their annotations) enter the benchmark.
    pub selection: Option<&'p Path>,
}

pub fn build_dataset(stage: &Stage<'_>, inputs: BuildInputs<'_>) -> Result<BuildSummary> {
    let ws = stage.ws;
    let mut claims = mio::load_claims(&require(ws.claims())?)?;
    let set = mio::load_viewpoints(&require(ws.reviewed_set())?)?;
    set.require_reviewed()?;
    let mut ann = mio::load_annotations_csv(&require(inputs.annotations.to_path_buf())?)?;
    if let Some(path) = inputs.selection {
        let wanted: std::collections::BTreeSet<String> = mio::load_id_list(&require(path.to_path_buf())?)?.into_iter().collect();
        let known: std::collections::BTreeSet<&str> = claims.iter().map(|c| c.claim_id.as_str()).collect();
        if let Some(missing) = wanted.iter().find(|id| !known.contains(id.as_str())) {
            return Err(DatasetError::UnknownClaim(missing.clone()).into());
        }
        claims.retain(|c| wanted.contains(&c.claim_id));
        let before = ann.len();
        ann.retain(|a| wanted.contains(&a.claim_id));
        if ann.len() < before {
            log::info!("selection dropped {} annotation records of unselected claims", before - ann.len());
        }
    }
    let profiles = mio::load_profiles(&require(ws.profiles())?)?;
    let corpus = mio::load_corpus(&require(ws.corpus())?)?;
    let options = BuildOptions {
        ratios: stage.config.dataset.ratios,
        seed: stage.config.dataset.seed,
        published_split: inputs.published_split.map(load_published_split).transpose()?,
        render: stage.config.wikidata.render.clone(),
    };
    let (instances, report) = dataset::build_benchmark(&claims, &set, &ann, &profiles, &corpus, &options, stage.config.parallelism)?;
    mio::save_instances(&ws.instances(), &instances)?;
    mio::save_instances_csv(&ws.instances_csv(), &instances)?;
    write_json(&ws.build_report(), &report)?;
    Ok(BuildSummary::of(&report))
}

fn load_split(ws: &Workspace, split: Option<Split>) -> Result<Vec<DatasetInstance>> {
    let all = mio::load_instances(&require(ws.instances())?)?;
    Ok(match split {
        Some(s) => all.into_iter().filter(|i| i.split == s).collect(),
        None => all,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneSummary {
    pub split: String,
    pub records: usize,
    pub output: String,
}
summary_display!(FineTuneSummary, "export-finetune", split, records, output);

/// Writes chat fine-tuning files using exactly the inference prompts.
pub fn export_finetune(stage: &Stage<'_>, context: ContextConfig, splits: &[Split]) -> Result<Vec<FineTuneSummary>> {
    let mut out = Vec::new();
    for &split in splits {
        let instances = load_split(stage.ws, Some(split))?;
        let path = stage.ws.finetune(split, context);
        let records = export_finetune_file(
            &instances,
            |i| classify::build_prompt(i, context, "fine-tune", &stage.templates, &stage.config.classification),
            &path,
        )?;
        out.push(FineTuneSummary { split: split.as_str().into(), records, output: path.display().to_string() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub cell: String,
    pub predictions: usize,
    pub defaulted: usize,
}
summary_display!(ClassifySummary, "classify", cell, predictions, defaulted);

/// Plan for one `classify` invocation: either a single cell or every
/// configured model across the given contexts and modes.
pub struct ClassifyPlan<'p> {
    pub models: Vec<&'p crate::classify::ModelSpec>,
    pub contexts: Vec<ContextConfig>,
    pub modes: Vec<LearningMode>,
    pub split: Option<Split>,
}

pub fn classify(stage: &Stage<'_>, gateway: &Gateway, plan: &ClassifyPlan<'_>) -> Result<Vec<ClassifySummary>> {
    let set = mio::load_viewpoints(&require(stage.ws.reviewed_set())?)?;
    set.require_reviewed()?;
    let instances = load_split(stage.ws, plan.split)?;
    let ctx = SuiteContext {
        gateway,
        templates: &stage.templates,
        config: &stage.config.classification,
        parallelism: stage.config.parallelism,
    };
    let manifest_path = stage.ws.manifest();
    let mut manifest = RunManifest::load_or_default(&manifest_path)?;
    let mut out = Vec::new();
    for model in &plan.models {
        for &mode in &plan.modes {
            for &context in &plan.contexts {
                let entry: ManifestCell = classify::run_cell(&instances, Cell { model, context, mode }, &stage.ws.runs(), &ctx)?;
                out.push(ClassifySummary { cell: entry.cell.clone(), predictions: entry.instances, defaulted: entry.defaulted });
                manifest.upsert(entry);
                write_json(&manifest_path, &manifest)?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub cell: String,
    pub instances: u64,
    pub macro_f1: String,
    pub positive_f1: String,
    pub defaulted: usize,
}
summary_display!(EvaluateSummary, "evaluate", cell, instances, macro_f1, positive_f1, defaulted);

fn cell_dir(ws: &Workspace, cell: &str) -> Result<PathBuf> {
    let manifest: RunManifest = read_json(&require(ws.manifest())?)?;
    let entry = manifest.cells.iter().find(|c| c.cell == cell).ok_or_else(|| PipelineError::StageInputMissing(ws.runs().join(cell)))?;
    Ok(ws.runs().join(&entry.predictions))
}

/// Scores a cell against the gold labels of the instances it predicted
/// and writes `report.json`, `report.txt` and `report.csv` beside it.
pub fn evaluate(stage: &Stage<'_>, cell: &str) -> Result<(EvaluateSummary, MetricsReport)> {
    let pred_path = require(cell_dir(stage.ws, cell)?)?;
    let predictions = mio::load_predictions(&pred_path)?;
    let wanted: std::collections::HashSet<&str> = predictions.iter().map(|p| p.instance_id.as_str()).collect();
    let gold: Vec<DatasetInstance> = load_split(stage.ws, None)?.into_iter().filter(|i| wanted.contains(i.instance_id.as_str())).collect();
    let report = eval::evaluate_run(&predictions, &gold)?;
    let dir = pred_path.parent().expect("prediction file has a parent");
    write_json(&dir.join("report.json"), &report)?;
    let txt = dir.join("report.txt");
    fs::write(&txt, eval::render_text(&report)).map_err(io_err(&txt))?;
    let csv_path = dir.join("report.csv");
    fs::write(&csv_path, eval::render_csv(&report)?).map_err(io_err(&csv_path))?;
    let summary = EvaluateSummary {
        cell: cell.to_string(),
        instances: report.overall.confusion.total(),
        macro_f1: format!("{:.2}", report.overall.macro_two_class.f1 * 100.0),
        positive_f1: format!("{:.2}", report.overall.positive_class.f1 * 100.0),
        defaulted: report.defaulted,
    };
    Ok((summary, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyticsSummary {
    pub dimension: String,
    pub values: usize,
    pub positives: u64,
    pub unresolved: usize,
    pub output: String,
}
summary_display!(AnalyticsSummary, "analytics", dimension, values, positives, unresolved, output);

/// Distribution of positives (gold, or a run's predictions) per value.
pub fn analytics(stage: &Stage<'_>, dimension: Dimension, run: Option<&str>) -> Result<(AnalyticsSummary, AnalyticsTable)> {
    let ws = stage.ws;
    let instances = load_split(ws, None)?;
    let claims = mio::load_claims(&require(ws.claims())?)?;
    let profiles = mio::load_profiles(&require(ws.profiles())?)?;
    let predictions = run.map(|cell| cell_dir(ws, cell).and_then(|p| Ok(mio::load_predictions(&require(p)?)?))).transpose()?;
    let table = eval::analytics(&instances, predictions.as_deref(), &claims, &profiles, dimension)?;
    let out = ws.analytics(dimension);
    mio::ensure_parent(&out)?;
    fs::write(&out, eval::analytics_csv(&table)?).map_err(io_err(&out))?;
    let values = table.rows.iter().map(|r| r.value.as_str()).collect::<std::collections::BTreeSet<_>>().len();
    let summary = AnalyticsSummary {
        dimension: dimension.as_str().into(),
        values,
        positives: table.total_positives,
        unresolved: table.unresolved.len(),
        output: out.display().to_string(),
    };
    Ok((summary, table))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayVerifySummary {
    pub entries: usize,
    pub mismatched: usize,
    pub duplicates: usize,
}
summary_display!(ReplayVerifySummary, "replay-verify", entries, mismatched, duplicates);

pub fn replay_verify(path: &Path) -> Result<(ReplayVerifySummary, Vec<usize>)> {
    let (entries, bad, duplicates) = crate::llm::verify_transcript(&require(path.to_path_buf())?)?;
    Ok((ReplayVerifySummary { entries, mismatched: bad.len(), duplicates }, bad))
}

//! Binary claim-viewpoint classification under the three context
//! configurations, plus the experiment-matrix runner.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::extraction::locate_utterance;
use crate::llm::{ChatMessage, ChatRequest, Gateway, LlmError};
use crate::model::ids::sha256_hex;
use crate::model::io::{read_jsonl, write_json, write_jsonl};
use crate::model::{ContextConfig, DatasetInstance, LearningMode, ModelError, Prediction, ViewpointSet};
use crate::par::{self, Parallelism};
use crate::prompts::{fill, PromptTemplates};
use crate::text::sentence_spans;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("instance {0} has no article body")]
    MissingArticleBody(String),
    #[error("response {0:?} is not a 0/1 label")]
    ParseFailure(String),
    #[error("instance {instance_id}: {source}")]
    Llm { instance_id: String, source: LlmError },
    #[error("model {0} has no fine-tuned model id configured")]
    MissingFineTunedModel(String),
    #[error("duplicate instance id {0}")]
    DuplicateInstance(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextOptions {
    /// Sentences kept on each side of the located utterance.
    pub window: usize,
    /// In text+kg, put the actor description before the article text.
    pub kg_first: bool,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self { window: 1, kg_first: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub context: ContextOptions,
    /// Strict parsing accepts only a bare `1` or `0`.
    pub strict: bool,
    pub max_parse_retries: u32,
    pub max_output_tokens: u32,
    /// Instances classified between checkpoint writes.
    pub checkpoint_every: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { context: ContextOptions::default(), strict: true, max_parse_retries: 2, max_output_tokens: 4, checkpoint_every: 64 }
    }
}

impl ClassifyConfig {
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

const KG_LABEL: &str = "Actor description:";
const TEXT_LABEL: &str = "Surrounding article text:";

/// The located sentence(s) plus `window` on each side. When the utterance
/// cannot be found, the lead of the article of the same length is used.
pub fn surrounding_text(utterance: &str, body: &str, window: usize) -> String {
    let sentences = sentence_spans(body);
    if sentences.is_empty() {
        return String::new();
    }
    let last_index = sentences.len() - 1;
    let (lo, hi) = match locate_utterance(utterance, body) {
        Some(span) => {
            let first = sentences.iter().position(|s| s.end > span.range.start).unwrap_or(last_index);
            let last = sentences.iter().rposition(|s| s.start < span.range.end).unwrap_or(first).max(first);
            (first.saturating_sub(window), (last + window).min(last_index))
        }
        None => {
            log::debug!("utterance not found in article; using the lead as context");
            (0, (2 * window).min(last_index))
        }
    };
    body[sentences[lo].start..sentences[hi].end].to_string()
}

pub fn build_context(instance: &DatasetInstance, config: ContextConfig, options: &ContextOptions) -> Result<String, ClassifyError> {
    let kg = || {
        let d = instance.actor_description.trim();
        if d.is_empty() {
            format!("{}.", instance.actor_name.trim())
        } else {
            d.to_string()
        }
    };
    let text = || {
        if instance.article_body.trim().is_empty() {
            return Err(ClassifyError::MissingArticleBody(instance.instance_id.clone()));
        }
        Ok(surrounding_text(&instance.utterance, &instance.article_body, options.window))
    };
    Ok(match config {
        ContextConfig::Kg => format!("{KG_LABEL}\n{}", kg()),
        ContextConfig::Text => format!("{TEXT_LABEL}\n{}", text()?),
        ContextConfig::TextAndKg => {
            let kg = format!("{KG_LABEL}\n{}", kg());
            let text = format!("{TEXT_LABEL}\n{}", text()?);
            if options.kg_first {
                format!("{kg}\n\n{text}")
            } else {
                format!("{text}\n\n{kg}")
            }
        }
    })
}

/// System message = task template; user message = claim, viewpoint,
/// context and the answer instruction, in that order.
pub fn build_prompt(
    instance: &DatasetInstance,
    config: ContextConfig,
    model_id: &str,
    templates: &PromptTemplates,
    options: &ClassifyConfig,
) -> Result<ChatRequest, ClassifyError> {
    let context = build_context(instance, config, &options.context)?;
    let user = fill(
        &templates.classification_user,
        &[
            ("actor", instance.actor_name.trim()),
            ("utterance", instance.utterance.trim()),
            ("viewpoint", instance.viewpoint_description.trim()),
            ("context", &context),
        ],
    );
    Ok(ChatRequest::new(
        model_id,
        vec![ChatMessage::system(templates.classification_task.trim_end()), ChatMessage::user(user.trim_end())],
        options.max_output_tokens,
    ))
}

/// Strict: the trimmed text is exactly `1` or `0`. Lenient: the first
/// standalone `0`/`1` token, else the first `yes`/`no`.
pub fn parse_label(text: &str, strict: bool) -> Result<bool, ClassifyError> {
    let fail = || ClassifyError::ParseFailure(text.to_string());
    match text.trim() {
        "1" => return Ok(true),
        "0" => return Ok(false),
        _ if strict => return Err(fail()),
        _ => {}
    }
    let tokens: Vec<String> = text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect();
    if let Some(t) = tokens.iter().find(|t| *t == "0" || *t == "1") {
        return Ok(t == "1");
    }
    match tokens.iter().find(|t| *t == "yes" || *t == "no") {
        Some(t) => Ok(t == "yes"),
        None => Err(fail()),
    }
}

/// Prompt, complete, parse. Unparseable answers are retried with a
/// corrective follow-up turn; after the last retry the prediction
/// defaults to `false` and is flagged.
pub fn classify_instance(
    instance: &DatasetInstance,
    context: ContextConfig,
    mode: LearningMode,
    model_id: &str,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ClassifyConfig,
) -> Result<Prediction, ClassifyError> {
    let mut request = build_prompt(instance, context, model_id, templates, config)?;
    let prompt_digest = request.digest();
    let mut attempts = 0;
    loop {
        let response = gateway
            .complete(&request)
            .map_err(|source| ClassifyError::Llm { instance_id: instance.instance_id.clone(), source })?;
        attempts += 1;
        let parsed = parse_label(&response.content, config.strict);
        let done = parsed.is_ok() || attempts > config.max_parse_retries;
        if done {
            if parsed.is_err() {
                log::warn!("{}: no parseable label after {attempts} attempts, defaulting to 0", instance.instance_id);
            }
            return Ok(Prediction {
                instance_id: instance.instance_id.clone(),
                predicted_label: parsed.as_ref().copied().unwrap_or(false),
                model_id: model_id.to_string(),
                context_config: context,
                learning_mode: mode,
                raw_response: response.content,
                attempts,
                defaulted: parsed.is_err(),
                prompt_digest,
            });
        }
        request.messages.push(ChatMessage::assistant(response.content));
        request.messages.push(ChatMessage::user(templates.label_retry.trim_end()));
    }
}

/// One model of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub base_model: String,
    #[serde(default)]
    pub fine_tuned_model: Option<String>,
}

impl ModelSpec {
    pub fn model_for(&self, mode: LearningMode) -> Result<&str, ClassifyError> {
        match mode {
            LearningMode::ZeroShot => Ok(&self.base_model),
            LearningMode::FineTuned => {
                self.fine_tuned_model.as_deref().ok_or_else(|| ClassifyError::MissingFineTunedModel(self.name.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell<'a> {
    pub model: &'a ModelSpec,
    pub context: ContextConfig,
    pub mode: LearningMode,
}

/// Directory-safe cell name, e.g. `gpt-4o-mini__text-kg__ft`.
pub fn cell_name(model: &str, context: ContextConfig, mode: LearningMode) -> String {
    let safe: String = model.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect();
    format!("{safe}__{}__{}", context.as_str().replace('+', "-"), mode.short())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub cell: String,
    pub model_name: String,
    pub model_id: String,
    pub context_config: ContextConfig,
    pub learning_mode: LearningMode,
    /// Relative to the runs directory.
    pub predictions: String,
    pub instances: usize,
    pub defaulted: usize,
    pub temperature: f64,
    pub config_digest: String,
    pub prompt_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub cells: Vec<ManifestCell>,
}

impl RunManifest {
    pub fn load_or_default(path: &Path) -> Result<Self, ClassifyError> {
        if path.exists() {
            Ok(crate::model::io::read_json(path)?)
        } else {
            Ok(Self::default())
        }
    }

    /// Inserts or replaces the entry with the same cell name; cells stay
    /// sorted by name.
    pub fn upsert(&mut self, cell: ManifestCell) {
        self.cells.retain(|c| c.cell != cell.cell);
        self.cells.push(cell);
        self.cells.sort_by(|a, b| a.cell.cmp(&b.cell));
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
const PREDICTIONS_FILE: &str = "predictions.jsonl";
const CHECKPOINT_FILE: &str = "predictions.partial.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClassifyError + '_ {
    move |source| ClassifyError::Io { path: path.display().to_string(), source }
}

fn load_previous(dir: &Path) -> Result<HashMap<(String, String), Prediction>, ClassifyError> {
    let mut out = HashMap::new();
    for name in [PREDICTIONS_FILE, CHECKPOINT_FILE] {
        let path = dir.join(name);
        if path.exists() {
            for p in read_jsonl::<Prediction>(&path)? {
                out.insert((p.instance_id.clone(), p.prompt_digest.clone()), p);
            }
        }
    }
    Ok(out)
}

pub struct SuiteContext<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a PromptTemplates,
    pub config: &'a ClassifyConfig,
    pub parallelism: Parallelism,
}

/// Classifies every instance for one cell and writes
/// `<runs_dir>/<cell>/predictions.jsonl`, sorted by instance id.
/// Predictions already on disk with a matching prompt digest are reused, so
/// an interrupted cell resumes from its checkpoint.
pub fn run_cell(
    instances: &[DatasetInstance],
    cell: Cell<'_>,
    runs_dir: &Path,
    ctx: &SuiteContext<'_>,
) -> Result<ManifestCell, ClassifyError> {
    let model_id = cell.model.model_for(cell.mode)?;
    let name = cell_name(&cell.model.name, cell.context, cell.mode);
    let dir = runs_dir.join(&name);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut seen = std::collections::HashSet::new();
    for i in instances {
        if !seen.insert(i.instance_id.as_str()) {
            return Err(ClassifyError::DuplicateInstance(i.instance_id.clone()));
        }
    }

    let previous = load_previous(&dir)?;
    let mut done: BTreeMap<String, Prediction> = BTreeMap::new();
    let mut todo = Vec::new();
    for inst in instances {
        let digest = build_prompt(inst, cell.context, model_id, ctx.templates, ctx.config)?.digest();
        match previous.get(&(inst.instance_id.clone(), digest)) {
            Some(p) if p.model_id == model_id => {
                done.insert(inst.instance_id.clone(), p.clone());
            }
            _ => todo.push(inst),
        }
    }
    if !todo.is_empty() && !done.is_empty() {
        log::info!("{name}: resuming with {} of {} predictions already done", done.len(), instances.len());
    }

    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let checkpoint = Mutex::new(
        fs::OpenOptions::new().create(true).append(true).open(&checkpoint_path).map_err(io_err(&checkpoint_path))?,
    );
    for chunk in todo.chunks(ctx.config.checkpoint_every.max(1)) {
        let results = par::map(ctx.parallelism, chunk, |inst| {
            classify_instance(inst, cell.context, cell.mode, model_id, ctx.gateway, ctx.templates, ctx.config)
        });
        let mut first_err = None;
        let mut file = checkpoint.lock().expect("checkpoint lock poisoned");
        for r in results {
            match r {
                Ok(p) => {
                    let line = serde_json::to_string(&p).expect("prediction serializes");
                    writeln!(file, "{line}").map_err(io_err(&checkpoint_path))?;
                    done.insert(p.instance_id.clone(), p);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        file.flush().map_err(io_err(&checkpoint_path))?;
        if let Some(e) = first_err {
            log::error!("{name}: aborting, checkpoint kept at {}", checkpoint_path.display());
            return Err(e);
        }
    }
    drop(checkpoint);

    let predictions: Vec<Prediction> = done.into_values().collect();
    let out_path = dir.join(PREDICTIONS_FILE);
    write_jsonl(&out_path, &predictions)?;
    fs::remove_file(&checkpoint_path).map_err(io_err(&checkpoint_path))?;

    Ok(ManifestCell {
        cell: name.clone(),
        model_name: cell.model.name.clone(),
        model_id: model_id.to_string(),
        context_config: cell.context,
        learning_mode: cell.mode,
        predictions: format!("{name}/{PREDICTIONS_FILE}"),
        instances: predictions.len(),
        defaulted: predictions.iter().filter(|p| p.defaulted).count(),
        temperature: 0.0,
        config_digest: ctx.config.digest(),
        prompt_digest: ctx.templates.digest(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuitePlan {
    pub models: Vec<ModelSpec>,
    pub contexts: Vec<ContextConfig>,
    pub modes: Vec<LearningMode>,
}

impl SuitePlan {
    pub fn cells(&self) -> Vec<Cell<'_>> {
        let mut out = Vec::new();
        for model in &self.models {
            for &mode in &self.modes {
                for &context in &self.contexts {
                    out.push(Cell { model, context, mode });
                }
            }
        }
        out
    }
}

/// Runs every cell of the plan in order and writes the manifest.
pub fn run_suite(
    instances: &[DatasetInstance],
    viewpoints: &ViewpointSet,
    plan: &SuitePlan,
    runs_dir: &Path,
    ctx: &SuiteContext<'_>,
) -> Result<RunManifest, ClassifyError> {
    viewpoints.require_reviewed()?;
    let manifest_path: PathBuf = runs_dir.join(MANIFEST_FILE);
    let mut manifest = RunManifest::load_or_default(&manifest_path)?;
    for cell in plan.cells() {
        let entry = run_cell(instances, cell, runs_dir, ctx)?;
        manifest.upsert(entry);
        write_json(&manifest_path, &manifest)?;
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatResponse;
    use crate::model::Split;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const STARMER: &str = "Keir Starmer (Prime Minister of the United Kingdom since 2024). He has worked as a barrister, politician, jurist and has held the position of Prime Minister of the United Kingdom, member of the 59th Parliament of the United Kingdom, Leader of the Opposition affiliated with the Labour Party with a religious or philosophical view of atheism and a political ideology of social democracy.";

    fn instance(body: &str, utterance: &str) -> DatasetInstance {
        DatasetInstance {
            instance_id: "c1:5".into(),
            claim_id: "c1".into(),
            utterance: utterance.into(),
            article_url: "https://example.org/a".into(),
            article_body: body.into(),
            actor_name: "Keir Starmer".into(),
            actor_description: STARMER.into(),
            viewpoint_id: 5,
            viewpoint_description: "Restricting immigration pathways. This viewpoint encompasses any utterance advocating for measures that would make it more difficult to enter the UK.".into(),
            label: true,
            split: Split::Test,
        }
    }

    #[test]
    fn kg_context_is_rendered_description() {
        let i = instance("Body.", "Body.");
        let c = build_context(&i, ContextConfig::Kg, &ContextOptions::default()).unwrap();
        assert_eq!(c, format!("{KG_LABEL}\n{STARMER}"));
    }

    #[test]
    fn text_context_windows() {
        let only = instance("Numbers must come down.", "Numbers must come down.");
        let c = build_context(&only, ContextConfig::Text, &ContextOptions::default()).unwrap();
        assert_eq!(c, format!("{TEXT_LABEL}\nNumbers must come down."));

        let body = "One. Two. Numbers must come down. Four. Five.";
        assert_eq!(surrounding_text("Numbers must come down.", body, 1), "Two. Numbers must come down. Four.");
        assert_eq!(surrounding_text("Numbers must come down.", body, 0), "Numbers must come down.");
        assert_eq!(surrounding_text("Unrelated wind farm subsidy.", body, 1), "One. Two. Numbers must come down.");
    }

    #[test]
    fn combined_context_has_both_sections_in_order() {
        let i = instance("Numbers must come down.", "Numbers must come down.");
        let c = build_context(&i, ContextConfig::TextAndKg, &ContextOptions::default()).unwrap();
        assert!(c.find(KG_LABEL).unwrap() < c.find(TEXT_LABEL).unwrap());
        let swapped = ContextOptions { kg_first: false, ..Default::default() };
        let c = build_context(&i, ContextConfig::TextAndKg, &swapped).unwrap();
        assert!(c.find(TEXT_LABEL).unwrap() < c.find(KG_LABEL).unwrap());
    }

    #[test]
    fn missing_body_only_matters_for_text() {
        let i = instance("", "x");
        assert!(matches!(build_context(&i, ContextConfig::Text, &ContextOptions::default()), Err(ClassifyError::MissingArticleBody(_))));
        assert!(build_context(&i, ContextConfig::Kg, &ContextOptions::default()).is_ok());
    }

    #[test]
    fn prompt_sections_in_fixed_order_and_stable() {
        let i = instance("Numbers must come down.", "Numbers must come down.");
        let t = PromptTemplates::default();
        let cfg = ClassifyConfig::default();
        let a = build_prompt(&i, ContextConfig::TextAndKg, "m", &t, &cfg).unwrap();
        let b = build_prompt(&i, ContextConfig::TextAndKg, "m", &t, &cfg).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        let user = &a.messages[1].content;
        let pos: Vec<usize> = ["Claim:", "Viewpoint:", "Context:", "exactly 1 or 0"].iter().map(|s| user.find(s).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.messages[0].content, t.classification_task.trim_end());
    }

    #[test]
    fn label_parsing() {
        assert!(parse_label(" 1\n", true).unwrap());
        assert!(!parse_label("0", true).unwrap());
        assert!(parse_label("The claim aligns with the viewpoint.", true).is_err());
        assert!(parse_label("Answer: 1", false).unwrap());
        assert!(!parse_label("No, it does not.", false).unwrap());
        assert!(parse_label("10", false).is_err());
    }

    #[test]
    fn persistent_garbage_defaults_to_false() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let gw = Gateway::from_fn(move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse::stop("maybe"))
        });
        let i = instance("Numbers must come down.", "Numbers must come down.");
        let p = classify_instance(&i, ContextConfig::Kg, LearningMode::ZeroShot, "m", &gw, &PromptTemplates::default(), &ClassifyConfig::default()).unwrap();
        assert!(p.defaulted);
        assert!(!p.predicted_label);
        assert_eq!(p.attempts, 3);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_recovers_label() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let gw = Gateway::from_fn(move |req| {
            let n = c.fetch_add(1, Ordering::SeqCst);
            if n == 0 {
                Ok(ChatResponse::stop("It aligns."))
            } else {
                assert_eq!(req.messages.len(), 4);
                Ok(ChatResponse::stop("1"))
            }
        });
        let i = instance("Numbers must come down.", "Numbers must come down.");
        let p = classify_instance(&i, ContextConfig::Kg, LearningMode::ZeroShot, "m", &gw, &PromptTemplates::default(), &ClassifyConfig::default()).unwrap();
        assert!(p.predicted_label && !p.defaulted);
        assert_eq!(p.attempts, 2);
    }

    #[test]
    fn fine_tuned_mode_needs_model_id() {
        let m = ModelSpec { name: "x".into(), base_model: "x".into(), fine_tuned_model: None };
        assert!(matches!(m.model_for(LearningMode::FineTuned), Err(ClassifyError::MissingFineTunedModel(_))));
        assert_eq!(cell_name("gpt-4o mini", ContextConfig::TextAndKg, LearningMode::FineTuned), "gpt-4o_mini__text-kg__ft");
    }
}

//! Viewpoint induction: batch utterances, ask the model for candidate
//! viewpoints per batch, consolidate them in one call, then round-trip the
//! result through a hand-editable review file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::llm::json::parse_json_list;
use crate::llm::{ChatMessage, ChatRequest, Gateway, LlmError};
use crate::model::{ModelError, Provenance, ReviewAction, ReviewEntry, Viewpoint, ViewpointSet};
use crate::par::{self, Parallelism};
use crate::prompts::{fill, PromptTemplates};
use crate::text::estimate_tokens;

#[derive(Debug, thiserror::Error)]
pub enum ViewpointError {
    #[error("utterance {index} needs ~{tokens} tokens, above the batch budget of {budget}")]
    UtteranceTooLarge { index: usize, tokens: usize, budget: usize },
    #[error("cannot propose viewpoints for an empty batch")]
    EmptyBatch,
    #[error("no candidate viewpoints to consolidate")]
    NoCandidates,
    #[error("model call failed: {0}")]
    LlmFailure(#[from] LlmError),
    #[error("{stage}: model output is not a JSON viewpoint list after a reformat retry")]
    UnparseableOutput { stage: &'static str },
    #[error("consolidated viewpoints repeat the title {0:?}")]
    DuplicateTitles(String),
    #[error("invalid viewpoint set: {0}")]
    Invalid(#[from] ModelError),
    #[error("review file block {block}: {message}")]
    Format { block: usize, message: String },
    #[error("review removed every viewpoint")]
    EmptySetAfterReview,
    #[error("only machine-candidate sets are exported for review")]
    AlreadyReviewed,
}

/// A proposed viewpoint before ids are assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateViewpoint {
    #[serde(alias = "name", alias = "viewpoint")]
    pub title: String,
    #[serde(default, alias = "explanation", alias = "definition")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewpointConfig {
    pub model_id: String,
    /// Estimated-token budget for the utterances of one proposal batch.
    pub batch_token_budget: usize,
    pub proposal_temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for ViewpointConfig {
    fn default() -> Self {
        Self { model_id: "gpt-4-turbo".into(), batch_token_budget: 8000, proposal_temperature: 0.0, max_output_tokens: 4096 }
    }
}

/// Greedy in-order packing of utterance indices into batches whose
/// estimated token totals stay within `budget`.
pub fn partition_utterances(utterances: &[String], budget: usize) -> Result<Vec<Vec<usize>>, ViewpointError> {
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut used = 0usize;
    for (index, u) in utterances.iter().enumerate() {
        let tokens = estimate_tokens(u);
        if tokens > budget {
            return Err(ViewpointError::UtteranceTooLarge { index, tokens, budget });
        }
        if used + tokens > budget && !current.is_empty() {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(index);
        used += tokens;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

fn ask_for_list(
    gateway: &Gateway,
    mut request: ChatRequest,
    templates: &PromptTemplates,
    stage: &'static str,
) -> Result<Vec<CandidateViewpoint>, ViewpointError> {
    let first = gateway.complete(&request)?;
    if let Some(items) = parse_json_list(&first.content) {
        return Ok(items);
    }
    log::warn!("{stage}: unparseable output, asking for a reformat");
    request.messages.push(ChatMessage::assistant(first.content));
    request.messages.push(ChatMessage::user(&templates.reformat));
    let second = gateway.complete(&request)?;
    parse_json_list(&second.content).ok_or(ViewpointError::UnparseableOutput { stage })
}

fn clean(items: Vec<CandidateViewpoint>) -> Vec<CandidateViewpoint> {
    items
        .into_iter()
        .map(|c| CandidateViewpoint { title: c.title.trim().to_string(), description: c.description.trim().to_string() })
        .filter(|c| !c.title.is_empty())
        .collect()
}

pub fn propose_viewpoints(
    batch: &[&str],
    topic: &str,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ViewpointConfig,
) -> Result<Vec<CandidateViewpoint>, ViewpointError> {
    if batch.is_empty() {
        return Err(ViewpointError::EmptyBatch);
    }
    let mut listing = String::new();
    for (i, u) in batch.iter().enumerate() {
        let _ = writeln!(listing, "{}. {}", i + 1, u.trim());
    }
    let user = fill(&templates.viewpoint_proposal, &[("topic", topic), ("utterances", listing.trim_end())]);
    let mut request = ChatRequest::new(&config.model_id, vec![ChatMessage::user(user)], config.max_output_tokens);
    request.temperature = config.proposal_temperature;
    Ok(clean(ask_for_list(gateway, request, templates, "proposal")?))
}

/// Partitions `utterances` and proposes candidates for every batch, keeping
/// batch order in the output.
pub fn propose_all(
    utterances: &[String],
    topic: &str,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ViewpointConfig,
    mode: Parallelism,
) -> Result<Vec<CandidateViewpoint>, ViewpointError> {
    let batches = partition_utterances(utterances, config.batch_token_budget)?;
    let per_batch = par::try_map(mode, &batches, |idx| {
        let batch: Vec<&str> = idx.iter().map(|&i| utterances[i].as_str()).collect();
        propose_viewpoints(&batch, topic, gateway, templates, config)
    })?;
    Ok(per_batch.into_iter().flatten().collect())
}

/// One model call merging all candidates into a machine-candidate set with
/// ids 1..n in output order.
pub fn consolidate_viewpoints(
    candidates: &[CandidateViewpoint],
    topic: &str,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ViewpointConfig,
) -> Result<ViewpointSet, ViewpointError> {
    if candidates.is_empty() {
        return Err(ViewpointError::NoCandidates);
    }
    let listing = serde_json::to_string_pretty(candidates).expect("candidates serialize");
    let user = fill(&templates.viewpoint_consolidation, &[("topic", topic), ("candidates", &listing)]);
    let request = ChatRequest::new(&config.model_id, vec![ChatMessage::user(user)], config.max_output_tokens);
    let merged = clean(ask_for_list(gateway, request, templates, "consolidation")?);
    let set = ViewpointSet {
        topic: topic.to_string(),
        viewpoints: merged
            .into_iter()
            .enumerate()
            .map(|(i, c)| Viewpoint { viewpoint_id: i as u32 + 1, title: c.title, description: c.description, topic: topic.to_string() })
            .collect(),
        provenance: Provenance::MachineCandidate,
        review_log: Vec::new(),
    };
    match set.validate() {
        Ok(()) => Ok(set),
        Err(ModelError::DuplicateTitle(t)) => Err(ViewpointError::DuplicateTitles(t)),
        Err(e) => Err(e.into()),
    }
}

const BLOCK_MARKER: &str = "[viewpoint]";

/// Writes the review file: a short header, then one block per viewpoint.
pub fn export_for_review(set: &ViewpointSet) -> Result<String, ViewpointError> {
    if set.provenance != Provenance::MachineCandidate {
        return Err(ViewpointError::AlreadyReviewed);
    }
    let mut out = String::new();
    let _ = writeln!(out, "# Viewpoint review for topic: {}", set.topic);
    out.push_str("# Edit title or description in place. Set `action: remove` to drop a block.\n");
    out.push_str("# Add a viewpoint with a new block that has no id line.\n");
    out.push_str("# Lines starting with # are ignored.\n");
    for v in &set.viewpoints {
        let _ = write!(
            out,
            "\n{BLOCK_MARKER}\nid: {}\naction: keep\ntitle: {}\ndescription: {}\n",
            v.viewpoint_id,
            v.title,
            v.description.replace('\n', " ")
        );
    }
    Ok(out)
}

#[derive(Debug, Default)]
struct ReviewBlock {
    number: usize,
    id: Option<u32>,
    remove: bool,
    title: Option<String>,
    description: Option<String>,
}

fn parse_review(text: &str) -> Result<Vec<ReviewBlock>, ViewpointError> {
    let mut blocks: Vec<ReviewBlock> = Vec::new();
    let mut last_field: Option<&'static str> = None;
    for raw in text.lines() {
        let line = raw.trim();
        if line.starts_with('#') || line.is_empty() {
            if line.is_empty() {
                last_field = None;
            }
            continue;
        }
        if line == BLOCK_MARKER {
            blocks.push(ReviewBlock { number: blocks.len() + 1, ..Default::default() });
            last_field = None;
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            return Err(ViewpointError::Format { block: 0, message: format!("text before the first {BLOCK_MARKER} line") });
        };
        let number = block.number;
        let err = |message: String| ViewpointError::Format { block: number, message };
        match line.split_once(':').map(|(k, v)| (k.trim().to_lowercase(), v.trim())) {
            Some((key, value)) if ["id", "action", "title", "description"].contains(&key.as_str()) => match key.as_str() {
                "id" => {
                    let id = value.parse().map_err(|_| err(format!("id {value:?} is not a number")))?;
                    block.id = Some(id);
                    last_field = None;
                }
                "action" => {
                    block.remove = match value.to_lowercase().as_str() {
                        "keep" | "edit" | "add" | "" => false,
                        "remove" | "delete" => true,
                        other => return Err(err(format!("unknown action {other:?}"))),
                    };
                    last_field = None;
                }
                "title" => {
                    block.title = Some(value.to_string());
                    last_field = Some("title");
                }
                _ => {
                    block.description = Some(value.to_string());
                    last_field = Some("description");
                }
            },
            _ => {
                // continuation of a wrapped title or description
                let slot = match last_field {
                    Some("title") => block.title.as_mut(),
                    Some("description") => block.description.as_mut(),
                    _ => None,
                };
                let slot = slot.ok_or_else(|| err(format!("unexpected line {line:?}")))?;
                if !slot.is_empty() {
                    slot.push(' ');
                }
                slot.push_str(line);
            }
        }
    }
    Ok(blocks)
}

/// Reads an edited review file and diffs it against the exported
/// `baseline`, producing a human-reviewed set whose review log records
/// every viewpoint as kept, edited, added or removed.
pub fn import_reviewed(text: &str, baseline: &ViewpointSet) -> Result<ViewpointSet, ViewpointError> {
    let blocks = parse_review(text)?;
    let by_id: BTreeMap<u32, &Viewpoint> = baseline.viewpoints.iter().map(|v| (v.viewpoint_id, v)).collect();
    let mut seen_ids = BTreeSet::new();
    for b in &blocks {
        if let Some(id) = b.id {
            if !seen_ids.insert(id) {
                return Err(ViewpointError::Format { block: b.number, message: format!("id {id} appears twice") });
            }
        }
    }
    let mut next_id = by_id.keys().chain(&seen_ids).max().copied().unwrap_or(0) + 1;

    let mut viewpoints = Vec::new();
    let mut log = Vec::new();
    let mut survivors = BTreeSet::new();
    for b in blocks {
        let original = b.id.and_then(|id| by_id.get(&id).copied());
        if b.remove {
            if let Some(o) = original {
                log.push(ReviewEntry { action: ReviewAction::Removed, viewpoint_id: o.viewpoint_id, note: o.title.clone() });
            }
            continue;
        }
        let field = |v: &Option<String>, name: &str| {
            v.clone().filter(|s| !s.is_empty()).ok_or_else(|| ViewpointError::Format { block: b.number, message: format!("missing {name}") })
        };
        let title = field(&b.title, "title")?;
        let description = field(&b.description, "description")?;
        let (viewpoint_id, action) = match (b.id, original) {
            (Some(id), Some(o)) if o.title == title && o.description == description => (id, ReviewAction::Kept),
            (Some(id), Some(_)) => (id, ReviewAction::Edited),
            (Some(id), None) => (id, ReviewAction::Added),
            (None, _) => {
                next_id += 1;
                (next_id - 1, ReviewAction::Added)
            }
        };
        survivors.insert(viewpoint_id);
        log.push(ReviewEntry { action, viewpoint_id, note: title.clone() });
        viewpoints.push(Viewpoint { viewpoint_id, title, description, topic: baseline.topic.clone() });
    }
    for v in &baseline.viewpoints {
        let logged = log.iter().any(|e| e.viewpoint_id == v.viewpoint_id && e.action == ReviewAction::Removed);
        if !survivors.contains(&v.viewpoint_id) && !logged {
            log.push(ReviewEntry { action: ReviewAction::Removed, viewpoint_id: v.viewpoint_id, note: v.title.clone() });
        }
    }
    if viewpoints.is_empty() {
        return Err(ViewpointError::EmptySetAfterReview);
    }
    log.sort_by_key(|e| e.viewpoint_id);
    let set = ViewpointSet { topic: baseline.topic.clone(), viewpoints, provenance: Provenance::HumanReviewed, review_log: log };
    set.validate()?;
    Ok(set)
}

/// The reviewed nine-viewpoint set of the UK immigration case study.
pub fn immigration_case_study() -> ViewpointSet {
    serde_json::from_str(include_str!("../data/immigration_viewpoints.json")).expect("bundled viewpoint set parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatResponse;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn gateway(answers: Vec<&'static str>) -> (Gateway, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let gw = Gateway::from_fn(move |_| {
            let i = c.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse::stop(answers[i.min(answers.len() - 1)]))
        });
        (gw, calls)
    }

    fn machine_set(n: u32) -> ViewpointSet {
        let mut set = immigration_case_study();
        set.viewpoints.retain(|v| v.viewpoint_id > 1 && v.viewpoint_id <= n + 1);
        for v in &mut set.viewpoints {
            v.viewpoint_id -= 1;
        }
        set.provenance = Provenance::MachineCandidate;
        set.review_log.clear();
        set
    }

    #[test]
    fn greedy_packing() {
        let u: Vec<String> = (0..4).map(|_| "x".repeat(400)).collect();
        assert_eq!(partition_utterances(&u, 250).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert!(partition_utterances(&[], 10).unwrap().is_empty());
        assert!(matches!(
            partition_utterances(&["y".repeat(80)], 10),
            Err(ViewpointError::UtteranceTooLarge { index: 0, tokens: 20, budget: 10 })
        ));
    }

    #[test]
    fn proposal_tolerates_singleton_object() {
        let (gw, _) = gateway(vec![r#"{"title": "Restricting immigration", "description": "Fewer entries."}"#]);
        let got = propose_viewpoints(&["Stop the boats.", "Stop the boats."], "immigration", &gw, &PromptTemplates::default(), &ViewpointConfig::default()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].title, "Restricting immigration");
    }

    #[test]
    fn proposal_malformed_twice() {
        let (gw, calls) = gateway(vec!["no json here", "still none"]);
        let r = propose_viewpoints(&["a"], "immigration", &gw, &PromptTemplates::default(), &ViewpointConfig::default());
        assert!(matches!(r, Err(ViewpointError::UnparseableOutput { stage: "proposal" })));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn consolidation_assigns_ids_and_rejects_duplicate_titles() {
        let cands = vec![CandidateViewpoint { title: "A".into(), description: "a".into() }];
        let (gw, _) = gateway(vec![r#"[{"title":"A","description":"a"}]"#]);
        let set = consolidate_viewpoints(&cands, "t", &gw, &PromptTemplates::default(), &ViewpointConfig::default()).unwrap();
        assert_eq!(set.viewpoints.len(), 1);
        assert_eq!(set.viewpoints[0].viewpoint_id, 1);
        assert_eq!(set.provenance, Provenance::MachineCandidate);

        let (gw, _) = gateway(vec![r#"[{"title":"A","description":"a"},{"title":"a","description":"b"}]"#]);
        let r = consolidate_viewpoints(&cands, "t", &gw, &PromptTemplates::default(), &ViewpointConfig::default());
        assert!(matches!(r, Err(ViewpointError::DuplicateTitles(_))));
    }

    #[test]
    fn untouched_review_is_identity() {
        let base = machine_set(8);
        let text = export_for_review(&base).unwrap();
        let back = import_reviewed(&text, &base).unwrap();
        assert_eq!(back.viewpoints, base.viewpoints);
        assert_eq!(back.provenance, Provenance::HumanReviewed);
        assert!(back.review_log.iter().all(|e| e.action == ReviewAction::Kept));
        assert_eq!(back.review_log.len(), 8);
    }

    #[test]
    fn expert_adds_management_viewpoint() {
        let base = machine_set(8);
        let management = &immigration_case_study().viewpoints[0];
        let mut text = export_for_review(&base).unwrap();
        text.push_str(&format!("\n[viewpoint]\ntitle: {}\ndescription: {}\n", management.title, management.description));
        let back = import_reviewed(&text, &base).unwrap();
        assert_eq!(back.viewpoints.len(), 9);
        let added: Vec<_> = back.review_log.iter().filter(|e| e.action == ReviewAction::Added).collect();
        assert_eq!(added.len(), 1);
        assert_eq!(added[0].viewpoint_id, 9);
    }

    #[test]
    fn edits_removals_and_wrapped_lines() {
        let base = machine_set(3);
        let text = "[viewpoint]\nid: 1\ntitle: Victims\ndescription: Sympathy\n  for migrants.\n\n[viewpoint]\nid: 2\naction: remove\ntitle: x\ndescription: y\n";
        let back = import_reviewed(text, &base).unwrap();
        assert_eq!(back.viewpoints.len(), 1);
        assert_eq!(back.viewpoints[0].description, "Sympathy for migrants.");
        let actions: Vec<_> = back.review_log.iter().map(|e| (e.viewpoint_id, e.action)).collect();
        assert_eq!(actions, vec![(1, ReviewAction::Edited), (2, ReviewAction::Removed), (3, ReviewAction::Removed)]);
    }

    #[test]
    fn deleting_everything_fails() {
        let base = machine_set(2);
        assert!(matches!(import_reviewed("# nothing left\n", &base), Err(ViewpointError::EmptySetAfterReview)));
    }

    #[test]
    fn format_error_names_block() {
        let base = machine_set(2);
        let text = "[viewpoint]\nid: 1\ntitle: a\ndescription: b\n[viewpoint]\nid: two\n";
        assert!(matches!(import_reviewed(text, &base), Err(ViewpointError::Format { block: 2, .. })));
    }

    #[test]
    fn case_study_set_is_valid() {
        let set = immigration_case_study();
        set.require_reviewed().unwrap();
        assert_eq!(set.viewpoints.len(), 9);
        assert_eq!(set.get(5).unwrap().title, "Restricting immigration pathways");
    }
}

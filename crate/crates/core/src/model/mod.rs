//! Shared domain types.
//!
//! Every pipeline stage exchanges these values; [`io`] holds the file-backed
//! load/save routines and [`validate`] the cross-record checks.

pub mod ids;
pub mod io;
pub mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub use validate::{validate_article, validate_claim, ArticleIndex};

/// One news item of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub article_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
    pub source: String,
    pub published_date: NaiveDate,
    #[serde(default)]
    pub topics: Vec<String>,
}

/// An utterance attributed to an actor, anchored to the article it was
/// reported in. Source, date and topic are copied from that article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub claim_id: String,
    pub utterance: String,
    pub actor_name: String,
    pub article_id: String,
    pub source: String,
    pub date: NaiveDate,
    pub topic: String,
    /// True when the utterance was found in the article body (exactly or
    /// after case/punctuation normalization), false for paraphrases.
    #[serde(default)]
    pub verbatim_span: bool,
}

impl Claim {
    /// Builds a claim for `article`, deriving the id from its content.
    pub fn new(utterance: &str, actor_name: &str, article: &NewsArticle, topic: &str) -> Self {
        Self {
            claim_id: ids::claim_id(utterance, actor_name, &article.article_id),
            utterance: utterance.to_string(),
            actor_name: actor_name.to_string(),
            article_id: article.article_id.clone(),
            source: article.source.clone(),
            date: article.published_date,
            topic: topic.to_string(),
            verbatim_span: false,
        }
    }
}

/// Wikidata-derived attributes of a speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorProfile {
    pub qid: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub gender: Option<String>,
    #[serde(default)]
    pub occupations: Vec<String>,
    #[serde(default)]
    pub positions_held: Vec<String>,
    #[serde(default)]
    pub parties: Vec<String>,
    /// Configured attributes beyond the core set, keyed by their stable
    /// attribute name (e.g. `religion_or_worldview`).
    #[serde(default)]
    pub extra_attributes: BTreeMap<String, Vec<String>>,
    pub retrieved_at: DateTime<Utc>,
}

/// Checks the `Q[0-9]+` shape of a Wikidata item id.
pub fn is_valid_qid(qid: &str) -> bool {
    qid.len() > 1 && qid.starts_with('Q') && qid[1..].bytes().all(|b| b.is_ascii_digit())
}

/// One actor name as it appears in claims, with its resolved profile (if any).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedActor {
    pub actor_name: String,
    pub profile: Option<ActorProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub viewpoint_id: u32,
    pub title: String,
    pub description: String,
    pub topic: String,
}

impl Viewpoint {
    /// Text shown to classifiers: title and explanation as one paragraph.
    pub fn full_description(&self) -> String {
        let title = self.title.trim_end_matches('.');
        format!("{title}. {}", self.description)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    MachineCandidate,
    HumanReviewed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewAction {
    Added,
    Edited,
    Removed,
    Kept,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub action: ReviewAction,
    pub viewpoint_id: u32,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewpointSet {
    pub topic: String,
    pub viewpoints: Vec<Viewpoint>,
    pub provenance: Provenance,
    #[serde(default)]
    pub review_log: Vec<ReviewEntry>,
}

impl ViewpointSet {
    pub fn get(&self, viewpoint_id: u32) -> Option<&Viewpoint> {
        self.viewpoints.iter().find(|v| v.viewpoint_id == viewpoint_id)
    }

    /// Checks the set-level invariants: non-empty, unique ids, non-empty
    /// text and case-insensitively distinct titles.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.viewpoints.is_empty() {
            return Err(ModelError::EmptyViewpointSet);
        }
        let mut ids = std::collections::BTreeSet::new();
        let mut titles = std::collections::BTreeSet::new();
        for v in &self.viewpoints {
            if v.title.trim().is_empty() {
                return Err(ModelError::MissingField { record: v.viewpoint_id.to_string(), field: "title" });
            }
            if v.description.trim().is_empty() {
                return Err(ModelError::MissingField {
                    record: v.viewpoint_id.to_string(),
                    field: "description",
                });
            }
            if !ids.insert(v.viewpoint_id) {
                return Err(ModelError::DuplicateId(v.viewpoint_id.to_string()));
            }
            if !titles.insert(v.title.trim().to_lowercase()) {
                return Err(ModelError::DuplicateTitle(v.title.clone()));
            }
        }
        Ok(())
    }

    /// Classification only accepts sets that went through human review.
    pub fn require_reviewed(&self) -> Result<(), ModelError> {
        self.validate()?;
        match self.provenance {
            Provenance::HumanReviewed => Ok(()),
            Provenance::MachineCandidate => Err(ModelError::NotReviewed),
        }
    }
}

/// One annotator's judgement for a (claim, viewpoint) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub claim_id: String,
    pub viewpoint_id: u32,
    pub annotator_id: String,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(ModelError::UnknownValue { kind: "split", value: other.to_string() }),
        }
    }
}

/// One benchmark row: a claim paired with a viewpoint and its gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInstance {
    pub instance_id: String,
    pub claim_id: String,
    pub utterance: String,
    pub article_url: String,
    pub article_body: String,
    pub actor_name: String,
    pub actor_description: String,
    pub viewpoint_id: u32,
    pub viewpoint_description: String,
    pub label: bool,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextConfig {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "kg")]
    Kg,
    #[serde(rename = "text+kg")]
    TextAndKg,
}

impl ContextConfig {
    pub const ALL: [ContextConfig; 3] = [ContextConfig::Text, ContextConfig::Kg, ContextConfig::TextAndKg];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextConfig::Text => "text",
            ContextConfig::Kg => "kg",
            ContextConfig::TextAndKg => "text+kg",
        }
    }

    pub fn uses_text(self) -> bool {
        matches!(self, ContextConfig::Text | ContextConfig::TextAndKg)
    }

    pub fn uses_kg(self) -> bool {
        matches!(self, ContextConfig::Kg | ContextConfig::TextAndKg)
    }
}

impl fmt::Display for ContextConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextConfig {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(ContextConfig::Text),
            "kg" => Ok(ContextConfig::Kg),
            "text+kg" | "textandkg" | "text-kg" => Ok(ContextConfig::TextAndKg),
            other => Err(ModelError::UnknownValue { kind: "context config", value: other.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearningMode {
    #[serde(rename = "zero-shot")]
    ZeroShot,
    #[serde(rename = "fine-tuned")]
    FineTuned,
}

impl LearningMode {
    pub const ALL: [LearningMode; 2] = [LearningMode::ZeroShot, LearningMode::FineTuned];

    pub fn short(self) -> &'static str {
        match self {
            LearningMode::ZeroShot => "zsl",
            LearningMode::FineTuned => "ft",
        }
    }
}

impl fmt::Display for LearningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for LearningMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zsl" | "zero-shot" | "zeroshot" => Ok(LearningMode::ZeroShot),
            "ft" | "fine-tuned" | "finetuned" => Ok(LearningMode::FineTuned),
            other => Err(ModelError::UnknownValue { kind: "learning mode", value: other.to_string() }),
        }
    }
}

/// One model decision for one benchmark instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub predicted_label: bool,
    pub model_id: String,
    pub context_config: ContextConfig,
    pub learning_mode: LearningMode,
    pub raw_response: String,
    pub attempts: u32,
    /// Set when no parseable label was obtained and the label fell back to
    /// `false`.
    #[serde(default)]
    pub defaulted: bool,
    /// Digest of the first request sent for this instance; used to skip
    /// already-predicted instances on resume.
    #[serde(default)]
    pub prompt_digest: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: String, field: &'static str },
    #[error("claim {claim_id} references unknown article {article_id}")]
    DanglingArticleRef { claim_id: String, article_id: String },
    #[error("claim {claim_id}: field `{field}` does not match article metadata")]
    MetadataMismatch { claim_id: String, field: &'static str },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("duplicate viewpoint title {0:?}")]
    DuplicateTitle(String),
    #[error("viewpoint set is empty")]
    EmptyViewpointSet,
    #[error("viewpoint set has not been human-reviewed")]
    NotReviewed,
    #[error("invalid qid {0:?}")]
    InvalidQid(String),
    #[error("unparseable date {0:?}")]
    BadDate(String),
    #[error("unknown {kind} {value:?}")]
    UnknownValue { kind: &'static str, value: String },
    #[error("{path}: record {record}: {message}")]
    Format { path: String, record: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

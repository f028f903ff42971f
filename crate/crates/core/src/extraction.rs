//! Claim extraction: one model call per article, parsed into validated
//! [`Claim`]s, plus best-effort location of each utterance in the body.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::llm::json::parse_json_list;
use crate::llm::{ChatMessage, ChatRequest, Gateway, LlmError};
use crate::model::{validate_claim, ArticleIndex, Claim, NewsArticle};
use crate::par::{self, Parallelism};
use crate::prompts::{fill, PromptTemplates};
use crate::text::{content_tokens, estimate_tokens, normalize, normalize_with_offsets, sentence_spans};

/// Minimum share of the utterance's content words a sentence must contain
/// to count as the paraphrased source.
pub const MIN_SENTENCE_OVERLAP: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("model call failed for article {article_id}: {source}")]
    LlmFailure { article_id: String, source: LlmError },
    #[error("article {article_id}: model output is not a JSON claim list after a reformat retry")]
    UnparseableOutput { article_id: String },
    #[error("article {0} has an empty body")]
    EmptyBody(String),
}

/// Selects relevant articles: the topic tag is present or any keyword
/// occurs in the title or body (case-insensitive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicFilter {
    pub topic: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl TopicFilter {
    pub fn new(topic: &str) -> Self {
        Self { topic: topic.to_string(), keywords: Vec::new() }
    }

    pub fn with_keywords(mut self, keywords: &[&str]) -> Self {
        self.keywords = keywords.iter().map(|k| k.to_string()).collect();
        self
    }

    pub fn matches(&self, article: &NewsArticle) -> bool {
        if article.topics.iter().any(|t| t.eq_ignore_ascii_case(&self.topic)) {
            return true;
        }
        let title = article.title.to_lowercase();
        let body = article.body.to_lowercase();
        self.keywords.iter().map(|k| k.to_lowercase()).any(|k| !k.is_empty() && (title.contains(&k) || body.contains(&k)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub model_id: String,
    /// Article bodies above this estimate are cut at a sentence boundary.
    pub max_article_tokens: usize,
    pub max_output_tokens: u32,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self { model_id: "gpt-4o".into(), max_article_tokens: 100_000, max_output_tokens: 4096 }
    }
}

#[derive(Debug, Deserialize)]
struct RawClaim {
    #[serde(default, alias = "claim", alias = "statement")]
    utterance: String,
    #[serde(default, alias = "actor_name", alias = "speaker")]
    actor: String,
}

/// Keeps whole sentences from the start of `body` while the token estimate
/// stays within `max_tokens`.
pub fn truncate_body(body: &str, max_tokens: usize) -> &str {
    if estimate_tokens(body) <= max_tokens {
        return body;
    }
    let mut end = 0;
    for span in sentence_spans(body) {
        if estimate_tokens(&body[..span.end]) > max_tokens {
            break;
        }
        end = span.end;
    }
    &body[..end]
}

fn extraction_request(article: &NewsArticle, templates: &PromptTemplates, config: &ExtractionConfig) -> ChatRequest {
    let body = truncate_body(&article.body, config.max_article_tokens);
    if body.len() < article.body.len() {
        log::warn!("article {}: body truncated to {} of {} bytes", article.article_id, body.len(), article.body.len());
    }
    let date = article.published_date.to_string();
    let user = fill(
        &templates.extraction_user,
        &[("title", &article.title), ("source", &article.source), ("date", &date), ("body", body)],
    );
    ChatRequest::new(&config.model_id, vec![ChatMessage::system(&templates.extraction), ChatMessage::user(user)], config.max_output_tokens)
}

/// Sends the article to the model and turns its JSON answer into claims.
/// Items that fail validation are dropped (logged); duplicates by
/// normalized utterance and actor are collapsed. Output is sorted by
/// `claim_id`.
pub fn extract_claims(
    article: &NewsArticle,
    filter: &TopicFilter,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ExtractionConfig,
) -> Result<Vec<Claim>, ExtractionError> {
    if article.body.trim().is_empty() {
        return Err(ExtractionError::EmptyBody(article.article_id.clone()));
    }
    if !filter.matches(article) {
        return Ok(Vec::new());
    }
    let llm_err = |source| ExtractionError::LlmFailure { article_id: article.article_id.clone(), source };
    let request = extraction_request(article, templates, config);
    let first = gateway.complete(&request).map_err(llm_err)?;
    let raw: Vec<RawClaim> = match parse_json_list(&first.content) {
        Some(items) => items,
        None => {
            log::warn!("article {}: unparseable extraction output, asking for a reformat", article.article_id);
            let mut retry = request.clone();
            retry.messages.push(ChatMessage::assistant(first.content));
            retry.messages.push(ChatMessage::user(&templates.reformat));
            let second = gateway.complete(&retry).map_err(llm_err)?;
            parse_json_list(&second.content)
                .ok_or_else(|| ExtractionError::UnparseableOutput { article_id: article.article_id.clone() })?
        }
    };

    let index = ArticleIndex::new([article.clone()]).expect("single article index");
    let mut seen = HashSet::new();
    let mut claims = Vec::new();
    for item in raw {
        let utterance = item.utterance.trim();
        let actor = item.actor.trim();
        let mut claim = Claim::new(utterance, actor, article, &filter.topic);
        if let Err(e) = validate_claim(&claim, &index) {
            log::info!("article {}: dropping extracted item: {e}", article.article_id);
            continue;
        }
        if !seen.insert((normalize(utterance), actor.to_string())) {
            continue;
        }
        claim.verbatim_span = locate_utterance(&claim.utterance, &article.body).is_some_and(|s| s.kind.is_verbatim());
        claims.push(claim);
    }
    claims.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    Ok(claims)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedArticle {
    pub article_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusExtraction {
    pub claims: Vec<Claim>,
    /// Articles whose output could not be parsed; rerun them later.
    pub flagged: Vec<FlaggedArticle>,
}

/// Runs [`extract_claims`] over a corpus. Unparseable articles are flagged
/// instead of aborting; model failures abort. Claims are ordered by
/// article id, then claim id.
pub fn extract_corpus(
    articles: &[NewsArticle],
    filter: &TopicFilter,
    gateway: &Gateway,
    templates: &PromptTemplates,
    config: &ExtractionConfig,
    mode: Parallelism,
) -> Result<CorpusExtraction, ExtractionError> {
    let mut sorted: Vec<&NewsArticle> = articles.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    let results = par::map(mode, &sorted, |a| extract_claims(a, filter, gateway, templates, config));
    let mut out = CorpusExtraction::default();
    for (article, result) in sorted.iter().zip(results) {
        match result {
            Ok(claims) => out.claims.extend(claims),
            Err(ExtractionError::UnparseableOutput { .. }) => out.flagged.push(FlaggedArticle {
                article_id: article.article_id.clone(),
                reason: "unparseable model output".into(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanKind {
    /// `body[range] == utterance`.
    Exact,
    /// Equal after case, quote-style and punctuation normalization.
    Normalized,
    /// Highest-overlap sentence; the utterance is a paraphrase.
    Overlap,
}

impl SpanKind {
    pub fn is_verbatim(self) -> bool {
        !matches!(self, SpanKind::Overlap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceSpan {
    pub range: Range<usize>,
    pub kind: SpanKind,
}

/// Finds the utterance in `body`: exact substring, then normalized match,
/// then the sentence sharing the largest share of content words (at least
/// [`MIN_SENTENCE_OVERLAP`]). `None` when nothing qualifies.
pub fn locate_utterance(utterance: &str, body: &str) -> Option<UtteranceSpan> {
    let utterance = utterance.trim();
    if utterance.is_empty() {
        return None;
    }
    if let Some(start) = body.find(utterance) {
        return Some(UtteranceSpan { range: start..start + utterance.len(), kind: SpanKind::Exact });
    }

    let needle = normalize(utterance);
    if !needle.is_empty() {
        let (hay, offsets) = normalize_with_offsets(body);
        if let Some(pos) = hay.find(&needle) {
            let first = hay[..pos].chars().count();
            let last = first + needle.chars().count() - 1;
            let start = offsets[first];
            let end_char = offsets[last];
            let end = end_char + body[end_char..].chars().next().map_or(1, char::len_utf8);
            return Some(UtteranceSpan { range: start..end, kind: SpanKind::Normalized });
        }
    }

    let wanted: BTreeSet<String> = content_tokens(utterance).into_iter().collect();
    if wanted.is_empty() {
        return None;
    }
    let mut best: Option<(f64, Range<usize>)> = None;
    for span in sentence_spans(body) {
        let have: BTreeSet<String> = content_tokens(&body[span.clone()]).into_iter().collect();
        let score = wanted.intersection(&have).count() as f64 / wanted.len() as f64;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, span));
        }
    }
    best.filter(|(score, _)| *score >= MIN_SENTENCE_OVERLAP)
        .map(|(_, range)| UtteranceSpan { range, kind: SpanKind::Overlap })
}

use std::collections::HashMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{Claim, ModelError, NewsArticle};

/// Articles keyed by `article_id`.
#[derive(Debug, Default, Clone)]
pub struct ArticleIndex {
    by_id: HashMap<String, NewsArticle>,
}

impl ArticleIndex {
    pub fn new(articles: impl IntoIterator<Item = NewsArticle>) -> Result<Self, ModelError> {
        let mut by_id = HashMap::new();
        for article in articles {
            if by_id.contains_key(&article.article_id) {
                return Err(ModelError::DuplicateId(article.article_id));
            }
            by_id.insert(article.article_id.clone(), article);
        }
        Ok(Self { by_id })
    }

    pub fn get(&self, article_id: &str) -> Option<&NewsArticle> {
        self.by_id.get(article_id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

pub fn validate_article(article: &NewsArticle) -> Result<(), ModelError> {
    if article.article_id.trim().is_empty() {
        return Err(ModelError::MissingField { record: article.url.clone(), field: "article_id" });
    }
    if article.body.trim().is_empty() {
        return Err(ModelError::MissingField { record: article.article_id.clone(), field: "body" });
    }
    Ok(())
}

/// Returns the claim unchanged when every field is present and its
/// (source, date, topic) agree with the referenced article.
pub fn validate_claim<'a>(claim: &'a Claim, corpus: &ArticleIndex) -> Result<&'a Claim, ModelError> {
    let record = || claim.claim_id.clone();
    if claim.utterance.trim().is_empty() {
        return Err(ModelError::MissingField { record: record(), field: "utterance" });
    }
    if claim.actor_name.trim().is_empty() {
        return Err(ModelError::MissingField { record: record(), field: "actor_name" });
    }
    if claim.topic.trim().is_empty() {
        return Err(ModelError::MissingField { record: record(), field: "topic" });
    }
    let article = corpus.get(&claim.article_id).ok_or_else(|| ModelError::DanglingArticleRef {
        claim_id: claim.claim_id.clone(),
        article_id: claim.article_id.clone(),
    })?;
    if article.source != claim.source {
        return Err(ModelError::MetadataMismatch { claim_id: record(), field: "source" });
    }
    if article.published_date != claim.date {
        return Err(ModelError::MetadataMismatch { claim_id: record(), field: "date" });
    }
    // topic is not compared: keyword-selected articles may lack the tag
    Ok(claim)
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%d/%m/%Y", "%Y/%m/%d", "%d %B %Y", "%B %d, %Y", "%d %b %Y", "%b %d, %Y"];
const DATETIME_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"];

/// Parses the date spellings found in news feeds into a calendar date.
/// Slash dates are read day-first (UK convention).
pub fn normalize_date(raw: &str) -> Result<NaiveDate, ModelError> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.date_naive());
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(s) {
        return Ok(dt.date_naive());
    }
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.date());
        }
    }
    for fmt in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Ok(d);
        }
    }
    Err(ModelError::BadDate(raw.to_string()))
}

//! JSON-lines, JSON and CSV persistence for the domain types.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::validate::normalize_date;
use super::{
    AnnotationRecord, Claim, DatasetInstance, EnrichedActor, ModelError, NewsArticle, Prediction, Split, ViewpointSet,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, record: usize, message: impl ToString) -> ModelError {
    ModelError::Format { path: path.display().to_string(), record, message: message.to_string() }
}

/// Reads one JSON value per non-blank line. Record numbers in errors are
/// 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ModelError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| format_err(path, idx + 1, e))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ModelError> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| format_err(path, 0, e))?;
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ModelError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.line(), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ModelError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, 0, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn ensure_parent(path: &Path) -> Result<(), ModelError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    Ok(())
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ModelError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Canonical corpus: one [`NewsArticle`] per line.
pub fn load_corpus(path: &Path) -> Result<Vec<NewsArticle>, ModelError> {
    let articles: Vec<NewsArticle> = read_jsonl(path)?;
    check_unique(articles.iter().map(|a| a.article_id.as_str()))?;
    for (idx, a) in articles.iter().enumerate() {
        super::validate_article(a).map_err(|e| format_err(path, idx + 1, e))?;
    }
    Ok(articles)
}

pub fn save_corpus(path: &Path, articles: &[NewsArticle]) -> Result<(), ModelError> {
    write_jsonl(path, articles)
}

/// Article as delivered by a news feed, before date normalization.
#[derive(Debug, Clone, Deserialize)]
pub struct RawArticle {
    pub article_id: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub source: String,
    pub published_date: String,
    #[serde(default)]
    pub topics: Vec<String>,
}

/// Reads a feed dump, normalizing dates to ISO-8601. Articles with an empty
/// body or an unparseable date are format errors.
pub fn ingest_raw_corpus(path: &Path) -> Result<Vec<NewsArticle>, ModelError> {
    let raw: Vec<RawArticle> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(raw.len());
    for (idx, r) in raw.into_iter().enumerate() {
        let published_date = normalize_date(&r.published_date).map_err(|e| format_err(path, idx + 1, e))?;
        let article = NewsArticle {
            article_id: r.article_id,
            url: r.url,
            title: r.title,
            body: r.body,
            source: r.source,
            published_date,
            topics: r.topics,
        };
        super::validate_article(&article).map_err(|e| format_err(path, idx + 1, e))?;
        out.push(article);
    }
    check_unique(out.iter().map(|a| a.article_id.as_str()))?;
    out.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    Ok(out)
}

pub fn load_claims(path: &Path) -> Result<Vec<Claim>, ModelError> {
    let claims: Vec<Claim> = read_jsonl(path)?;
    check_unique(claims.iter().map(|c| c.claim_id.as_str()))?;
    Ok(claims)
}

pub fn save_claims(path: &Path, claims: &[Claim]) -> Result<(), ModelError> {
    write_jsonl(path, claims)
}

pub fn load_instances(path: &Path) -> Result<Vec<DatasetInstance>, ModelError> {
    let rows: Vec<DatasetInstance> = read_jsonl(path)?;
    check_unique(rows.iter().map(|r| r.instance_id.as_str()))?;
    Ok(rows)
}

pub fn save_instances(path: &Path, rows: &[DatasetInstance]) -> Result<(), ModelError> {
    write_jsonl(path, rows)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, ModelError> {
    read_jsonl(path)
}

pub fn save_predictions(path: &Path, rows: &[Prediction]) -> Result<(), ModelError> {
    write_jsonl(path, rows)
}

pub fn load_profiles(path: &Path) -> Result<Vec<EnrichedActor>, ModelError> {
    let rows: Vec<EnrichedActor> = read_jsonl(path)?;
    check_unique(rows.iter().map(|r| r.actor_name.as_str()))?;
    Ok(rows)
}

pub fn save_profiles(path: &Path, rows: &[EnrichedActor]) -> Result<(), ModelError> {
    write_jsonl(path, rows)
}

pub fn load_viewpoints(path: &Path) -> Result<ViewpointSet, ModelError> {
    let set: ViewpointSet = read_json(path)?;
    set.validate()?;
    Ok(set)
}

pub fn save_viewpoints(path: &Path, set: &ViewpointSet) -> Result<(), ModelError> {
    write_json(path, set)
}

/// CSV header of the benchmark export.
pub const INSTANCE_CSV_HEADER: [&str; 11] = [
    "id",
    "claim_id",
    "utterance",
    "url",
    "article_body",
    "actor_name",
    "actor_description",
    "viewpoint_id",
    "viewpoint_description",
    "label",
    "split",
];

fn bool_cell(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn parse_bool_cell(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

pub fn save_instances_csv(path: &Path, rows: &[DatasetInstance]) -> Result<(), ModelError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, 0, e))?;
    w.write_record(INSTANCE_CSV_HEADER).map_err(|e| format_err(path, 0, e))?;
    for (idx, r) in rows.iter().enumerate() {
        let vp = r.viewpoint_id.to_string();
        w.write_record([
            r.instance_id.as_str(),
            r.claim_id.as_str(),
            r.utterance.as_str(),
            r.article_url.as_str(),
            r.article_body.as_str(),
            r.actor_name.as_str(),
            r.actor_description.as_str(),
            vp.as_str(),
            r.viewpoint_description.as_str(),
            bool_cell(r.label),
            r.split.as_str(),
        ])
        .map_err(|e| format_err(path, idx + 2, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_instances_csv(path: &Path) -> Result<Vec<DatasetInstance>, ModelError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_err(path, 0, e))?;
    let headers = reader.headers().map_err(|e| format_err(path, 1, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut cols = Vec::with_capacity(INSTANCE_CSV_HEADER.len());
    for name in INSTANCE_CSV_HEADER {
        cols.push(col(name).ok_or_else(|| format_err(path, 1, format!("missing column {name}")))?);
    }
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| format_err(path, line, e))?;
        let cell = |i: usize| rec.get(cols[i]).unwrap_or("").to_string();
        let viewpoint_id = cell(7).trim().parse().map_err(|e| format_err(path, line, format!("viewpoint_id: {e}")))?;
        let label = parse_bool_cell(&cell(9)).ok_or_else(|| format_err(path, line, "label must be 1/0"))?;
        let split: Split = cell(10).parse().map_err(|e| format_err(path, line, e))?;
        out.push(DatasetInstance {
            instance_id: cell(0),
            claim_id: cell(1),
            utterance: cell(2),
            article_url: cell(3),
            article_body: cell(4),
            actor_name: cell(5),
            actor_description: cell(6),
            viewpoint_id,
            viewpoint_description: cell(8),
            label,
            split,
        });
    }
    check_unique(out.iter().map(|r| r.instance_id.as_str()))?;
    Ok(out)
}

/// Raw annotations: `claim_id,viewpoint_id,annotator_id,label` with a
/// header row. Labels are `1`/`0` (or `true`/`false`).
pub fn load_annotations_csv(path: &Path) -> Result<Vec<AnnotationRecord>, ModelError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_err(path, 0, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| format_err(path, line, e))?;
        if rec.len() < 4 {
            return Err(format_err(path, line, "expected 4 columns"));
        }
        let viewpoint_id: u32 = rec[1].trim().parse().map_err(|e| format_err(path, line, format!("viewpoint_id: {e}")))?;
        let label = parse_bool_cell(&rec[3]).ok_or_else(|| format_err(path, line, "label must be 1/0"))?;
        let record = AnnotationRecord {
            claim_id: rec[0].trim().to_string(),
            viewpoint_id,
            annotator_id: rec[2].trim().to_string(),
            label,
        };
        if !seen.insert((record.claim_id.clone(), record.viewpoint_id, record.annotator_id.clone())) {
            return Err(ModelError::DuplicateId(format!(
                "{}/{}/{}",
                record.claim_id, record.viewpoint_id, record.annotator_id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn save_annotations_csv(path: &Path, rows: &[AnnotationRecord]) -> Result<(), ModelError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, 0, e))?;
    w.write_record(["claim_id", "viewpoint_id", "annotator_id", "label"]).map_err(|e| format_err(path, 0, e))?;
    for r in rows {
        w.write_record([r.claim_id.as_str(), &r.viewpoint_id.to_string(), r.annotator_id.as_str(), bool_cell(r.label)])
            .map_err(|e| format_err(path, 0, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Newline-separated id list; blank lines and `#` comments ignored.
pub fn load_id_list(path: &Path) -> Result<Vec<String>, ModelError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

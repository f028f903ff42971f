//! Actor enrichment from Wikidata.
//!
//! Actor names are searched with `wbsearchentities`, disambiguated by
//! [`select_entity`], and the chosen entity's configured properties are
//! fetched with `wbgetentities`, resolved to English labels and cached on disk
//! as [`ActorProfile`](crate::model::ActorProfile) JSON. [`render_description`]
//! turns a profile into the sentence used as KG context.

mod api;
mod cache;
mod enrich;
mod overrides;
mod render;
mod select;

pub use api::{FixtureApi, HttpApi, OfflineApi, RecordingApi, WikidataApi, DEFAULT_ENDPOINT};
pub use cache::ProfileCache;
pub use enrich::{Enricher, PropertySet, ExtraProperty};
pub use overrides::{OverrideMap, OverrideTarget};
pub use render::{render_description, RenderConfig};
pub use select::{select_entity, Candidate, CandidateFacts, SelectionPolicy};

use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum WikidataError {
    #[error("empty actor name")]
    EmptyName,
    #[error("no candidates to select from for {0:?}")]
    NoCandidates(String),
    #[error("ambiguous entity for {name:?}: {tied:?}")]
    Ambiguous { name: String, tied: Vec<String> },
    #[error("entity {0} not found")]
    EntityNotFound(String),
    #[error("invalid qid {0:?}")]
    InvalidQid(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("no recorded fixture for {0}")]
    FixtureMissing(String),
    #[error("cache file {path} is corrupt ({message}); delete it to rebuild from Wikidata")]
    Cache { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("override file {path} line {line}: {message}")]
    Override { path: String, line: usize, message: String },
}

/// English label of a raw entity document.
pub(crate) fn entity_label(entity: &Value) -> Option<String> {
    entity.pointer("/labels/en/value").and_then(Value::as_str).map(str::to_string)
}

pub(crate) fn entity_description(entity: &Value) -> Option<String> {
    entity.pointer("/descriptions/en/value").and_then(Value::as_str).map(str::to_string)
}

/// Item ids referenced by `property` statements, in statement order,
/// without deprecated statements and without repeats.
pub(crate) fn claim_item_ids(entity: &Value, property: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let Some(statements) = entity.pointer(&format!("/claims/{property}")).and_then(Value::as_array) else {
        return out;
    };
    for st in statements {
        if st.get("rank").and_then(Value::as_str) == Some("deprecated") {
            continue;
        }
        let id = st
            .pointer("/mainsnak/datavalue/value/id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .or_else(|| st.pointer("/mainsnak/datavalue/value/numeric-id").and_then(Value::as_u64).map(|n| format!("Q{n}")));
        if let Some(id) = id {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

pub(crate) fn is_missing(entity: &Value) -> bool {
    entity.get("missing").is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn statement_order_dedup_and_rank() {
        let e = json!({"claims": {"P106": [
            {"mainsnak": {"datavalue": {"value": {"id": "Q2"}}}, "rank": "normal"},
            {"mainsnak": {"datavalue": {"value": {"id": "Q1"}}}, "rank": "preferred"},
            {"mainsnak": {"datavalue": {"value": {"id": "Q2"}}}, "rank": "normal"},
            {"mainsnak": {"datavalue": {"value": {"id": "Q3"}}}, "rank": "deprecated"},
            {"mainsnak": {"snaktype": "novalue"}, "rank": "normal"}
        ]}});
        assert_eq!(claim_item_ids(&e, "P106"), vec!["Q2", "Q1"]);
        assert!(claim_item_ids(&e, "P39").is_empty());
    }
}

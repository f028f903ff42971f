use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::api::WikidataApi;
use super::cache::ProfileCache;
use super::overrides::{OverrideMap, OverrideTarget};
use super::select::{select_entity, Candidate, CandidateFacts, SelectionPolicy};
use super::{claim_item_ids, entity_description, entity_label, is_missing, WikidataError};
use crate::model::{is_valid_qid, ActorProfile, EnrichedActor};
use crate::par::{self, Parallelism};

/// A property fetched beyond the core set, stored under `key` in
/// `extra_attributes` and rendered with `clause` (`{}` = comma-joined values).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraProperty {
    pub property: String,
    pub key: String,
    pub clause: String,
}

impl ExtraProperty {
    pub fn defaults() -> Vec<Self> {
        vec![
            ExtraProperty {
                property: "P140".into(),
                key: "religion_or_worldview".into(),
                clause: "a religious or philosophical view of {}".into(),
            },
            ExtraProperty {
                property: "P1142".into(),
                key: "political_ideology".into(),
                clause: "a political ideology of {}".into(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropertySet {
    pub gender: String,
    pub occupation: String,
    pub position: String,
    pub party: String,
    pub extras: Vec<ExtraProperty>,
}

impl Default for PropertySet {
    fn default() -> Self {
        Self {
            gender: "P21".into(),
            occupation: "P106".into(),
            position: "P39".into(),
            party: "P102".into(),
            extras: ExtraProperty::defaults(),
        }
    }
}

type Clock = Box<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Name → entity → profile resolution with caching and operator overrides.
pub struct Enricher {
    api: Arc<dyn WikidataApi>,
    cache: ProfileCache,
    overrides: Mutex<OverrideMap>,
    properties: PropertySet,
    policy: SelectionPolicy,
    clock: Clock,
}

impl Enricher {
    pub fn new(api: Arc<dyn WikidataApi>, cache: ProfileCache, overrides: OverrideMap) -> Self {
        Self {
            api,
            cache,
            overrides: Mutex::new(overrides),
            properties: PropertySet::default(),
            policy: SelectionPolicy::default(),
            clock: Box::new(Utc::now),
        }
    }

    pub fn with_properties(mut self, properties: PropertySet) -> Self {
        self.properties = properties;
        self
    }

    pub fn with_policy(mut self, policy: SelectionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Search hits with exact (case-insensitive) label matches first; the
    /// service order is kept within each group.
    pub fn search_entity(&self, name: &str) -> Result<Vec<Candidate>, WikidataError> {
        if name.trim().is_empty() {
            return Err(WikidataError::EmptyName);
        }
        let mut hits = self.api.search(name.trim())?;
        let wanted = name.trim().to_lowercase();
        hits.sort_by_key(|c| c.label.trim().to_lowercase() != wanted);
        Ok(hits)
    }

    fn candidate_facts(&self, candidates: &[Candidate]) -> Result<HashMap<String, CandidateFacts>, WikidataError> {
        if candidates.len() < 2 {
            return Ok(HashMap::new());
        }
        let ids: Vec<String> = candidates.iter().map(|c| c.qid.clone()).collect();
        let docs = self.api.entities(&ids)?;
        Ok(docs
            .iter()
            .filter(|(_, d)| !is_missing(d))
            .map(|(id, d)| {
                let facts = CandidateFacts {
                    is_human: claim_item_ids(d, "P31").iter().any(|q| q == "Q5"),
                    occupations: claim_item_ids(d, &self.properties.occupation),
                };
                (id.clone(), facts)
            })
            .collect())
    }

    /// Resolves a name to a qid. An override entry wins; otherwise the
    /// selection policy picks among search hits and the choice is recorded
    /// in the override map. `Ok(None)` when nothing matches.
    pub fn resolve_qid(&self, name: &str) -> Result<Option<String>, WikidataError> {
        if let Some(target) = self.overrides.lock().expect("overrides poisoned").get(name).cloned() {
            return Ok(match target {
                OverrideTarget::Entity(q) => Some(q),
                OverrideTarget::Unresolved => None,
            });
        }
        let candidates = self.search_entity(name)?;
        if candidates.is_empty() {
            log::info!("no Wikidata entity found for {name:?}");
            return Ok(None);
        }
        let facts = self.candidate_facts(&candidates)?;
        let qid = select_entity(name, &candidates, &facts, &self.policy)?;
        self.overrides.lock().expect("overrides poisoned").insert(name, OverrideTarget::Entity(qid.clone()));
        Ok(Some(qid))
    }

    /// Profile for `qid`, from the cache when present.
    pub fn fetch_profile(&self, qid: &str) -> Result<ActorProfile, WikidataError> {
        if !is_valid_qid(qid) {
            return Err(WikidataError::InvalidQid(qid.to_string()));
        }
        if let Some(p) = self.cache.get(qid)? {
            return Ok(p);
        }
        let docs = self.api.entities(&[qid.to_string()])?;
        let entity = docs.get(qid).filter(|d| !is_missing(d)).ok_or_else(|| WikidataError::EntityNotFound(qid.to_string()))?;
        let profile = self.build_profile(qid, entity)?;
        self.cache.put(&profile)?;
        Ok(profile)
    }

    fn build_profile(&self, qid: &str, entity: &Value) -> Result<ActorProfile, WikidataError> {
        let props = &self.properties;
        let gender_ids = claim_item_ids(entity, &props.gender);
        let occupation_ids = claim_item_ids(entity, &props.occupation);
        let position_ids = claim_item_ids(entity, &props.position);
        let party_ids = claim_item_ids(entity, &props.party);
        let extra_ids: Vec<(String, Vec<String>)> =
            props.extras.iter().map(|x| (x.key.clone(), claim_item_ids(entity, &x.property))).collect();

        let referenced: BTreeSet<String> = gender_ids
            .iter()
            .chain(&occupation_ids)
            .chain(&position_ids)
            .chain(&party_ids)
            .chain(extra_ids.iter().flat_map(|(_, v)| v))
            .cloned()
            .collect();
        let referenced: Vec<String> = referenced.into_iter().collect();
        let label_docs = if referenced.is_empty() { HashMap::new() } else { self.api.entities(&referenced)? };
        let labels = |ids: &[String]| -> Vec<String> {
            ids.iter()
                .filter_map(|id| {
                    let label = label_docs.get(id).and_then(entity_label);
                    if label.is_none() {
                        log::warn!("{qid}: no English label for referenced item {id}");
                    }
                    label
                })
                .collect()
        };

        let mut extra_attributes = BTreeMap::new();
        for (key, ids) in &extra_ids {
            let values = labels(ids);
            if !values.is_empty() {
                extra_attributes.insert(key.clone(), values);
            }
        }
        let name = entity_label(entity).filter(|n| !n.trim().is_empty()).ok_or_else(|| WikidataError::EntityNotFound(format!("{qid} has no English label")))?;
        Ok(ActorProfile {
            qid: qid.to_string(),
            name,
            description: entity_description(entity).unwrap_or_default(),
            gender: labels(&gender_ids).into_iter().next(),
            occupations: labels(&occupation_ids),
            positions_held: labels(&position_ids),
            parties: labels(&party_ids),
            extra_attributes,
            retrieved_at: (self.clock)(),
        })
    }

    /// Resolves and fetches every distinct name, returning one entry per
    /// name sorted by name, then persists the override map.
    pub fn enrich(&self, names: &[String], mode: Parallelism) -> Result<Vec<EnrichedActor>, WikidataError> {
        let distinct: Vec<String> = names.iter().map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect::<BTreeSet<_>>().into_iter().collect();
        let out = par::try_map(mode, &distinct, |name| {
            let profile = match self.resolve_qid(name)? {
                Some(qid) => Some(self.fetch_profile(&qid)?),
                None => None,
            };
            Ok::<_, WikidataError>(EnrichedActor { actor_name: name.clone(), profile })
        })?;
        self.save_overrides()?;
        Ok(out)
    }

    pub fn save_overrides(&self) -> Result<(), WikidataError> {
        self.overrides.lock().expect("overrides poisoned").save()
    }
}

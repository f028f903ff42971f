use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::WikidataError;
use crate::model::is_valid_qid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OverrideTarget {
    Entity(String),
    /// The operator decided the actor has no Wikidata entity.
    Unresolved,
}

/// Editable `name<TAB>qid` mapping. A qid of `none` marks a name as
/// deliberately unresolved. Lines starting with `#` are comments.
#[derive(Debug, Clone, Default)]
pub struct OverrideMap {
    path: Option<PathBuf>,
    entries: BTreeMap<String, OverrideTarget>,
}

impl OverrideMap {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path`; a missing file yields an empty map bound to that path.
    pub fn load(path: &Path) -> Result<Self, WikidataError> {
        let mut map = Self { path: Some(path.to_path_buf()), entries: BTreeMap::new() };
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(map),
            Err(e) => return Err(WikidataError::Io { path: path.display().to_string(), message: e.to_string() }),
        };
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: &str| WikidataError::Override {
                path: path.display().to_string(),
                line: idx + 1,
                message: message.to_string(),
            };
            let (name, qid) = line.split_once('\t').ok_or_else(|| err("expected name<TAB>qid"))?;
            let qid = qid.trim();
            let target = if qid.eq_ignore_ascii_case("none") {
                OverrideTarget::Unresolved
            } else if is_valid_qid(qid) {
                OverrideTarget::Entity(qid.to_string())
            } else {
                return Err(err("qid must look like Q123 or be `none`"));
            };
            map.entries.insert(name.trim().to_string(), target);
        }
        Ok(map)
    }

    pub fn get(&self, name: &str) -> Option<&OverrideTarget> {
        self.entries.get(name.trim())
    }

    pub fn insert(&mut self, name: &str, target: OverrideTarget) {
        self.entries.insert(name.trim().to_string(), target);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rewrites the bound file (sorted by name). No-op for in-memory maps.
    pub fn save(&self) -> Result<(), WikidataError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut text = String::from("# actor name<TAB>Wikidata qid (or `none`); edit to override entity selection\n");
        for (name, target) in &self.entries {
            let qid = match target {
                OverrideTarget::Entity(q) => q.as_str(),
                OverrideTarget::Unresolved => "none",
            };
            text.push_str(&format!("{name}\t{qid}\n"));
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| WikidataError::Io { path: parent.display().to_string(), message: e.to_string() })?;
        }
        fs::write(path, text).map_err(|e| WikidataError::Io { path: path.display().to_string(), message: e.to_string() })
    }
}

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::select::Candidate;
use super::WikidataError;
use crate::retry::{Attempt, RetryPolicy};

pub const DEFAULT_ENDPOINT: &str = "https://www.wikidata.org/w/api.php";
const USER_AGENT: &str = concat!("newsview/", env!("CARGO_PKG_VERSION"), " (viewpoint analytics; contact via repository)");
const IDS_PER_CALL: usize = 50;

/// Raw access to the Wikidata action API.
pub trait WikidataApi: Send + Sync {
    /// `wbsearchentities` hits in service order.
    fn search(&self, name: &str) -> Result<Vec<Candidate>, WikidataError>;

    /// `wbgetentities` documents keyed by id. Missing entities are returned
    /// with a `missing` key, as the service does.
    fn entities(&self, ids: &[String]) -> Result<HashMap<String, Value>, WikidataError>;
}

fn parse_search(value: &Value) -> Vec<Candidate> {
    value
        .get("search")
        .and_then(Value::as_array)
        .map(|hits| {
            hits.iter()
                .filter_map(|h| {
                    Some(Candidate {
                        qid: h.get("id")?.as_str()?.to_string(),
                        label: h.get("label").and_then(Value::as_str).unwrap_or_default().to_string(),
                        description: h.get("description").and_then(Value::as_str).unwrap_or_default().to_string(),
                    })
                })
                .collect()
        })
        .unwrap_or_default()
}

fn parse_entities(value: &Value) -> HashMap<String, Value> {
    value
        .get("entities")
        .and_then(Value::as_object)
        .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default()
}

/// Live client over HTTPS.
pub struct HttpApi {
    client: Client,
    endpoint: String,
    retry: RetryPolicy,
}

impl HttpApi {
    pub fn new(endpoint: &str, retry: RetryPolicy) -> Result<Self, WikidataError> {
        let client = Client::builder()
            .user_agent(USER_AGENT)
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| WikidataError::Transport(e.to_string()))?;
        Ok(Self { client, endpoint: endpoint.to_string(), retry })
    }

    fn get(&self, params: &[(&str, &str)]) -> Result<Value, WikidataError> {
        let result = self.retry.run(|_| {
            let resp = match self.client.get(&self.endpoint).query(params).send() {
                Ok(r) => r,
                Err(e) => return Attempt::Retry { error: WikidataError::Transport(e.to_string()), retry_after: None },
            };
            let status = resp.status();
            if status == StatusCode::TOO_MANY_REQUESTS {
                let retry_after = resp
                    .headers()
                    .get(reqwest::header::RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.parse::<u64>().ok())
                    .map(Duration::from_secs);
                return Attempt::Retry { error: WikidataError::RateLimited { attempts: 0 }, retry_after };
            }
            if status.is_server_error() {
                return Attempt::Retry { error: WikidataError::Transport(format!("server error {status}")), retry_after: None };
            }
            if !status.is_success() {
                return Attempt::Fatal(WikidataError::Transport(format!("HTTP {status}")));
            }
            match resp.json::<Value>() {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Fatal(WikidataError::Transport(e.to_string())),
            }
        });
        match result {
            Ok((v, _)) => Ok(v),
            Err((WikidataError::RateLimited { .. }, attempts)) => Err(WikidataError::RateLimited { attempts }),
            Err((e, _)) => Err(e),
        }
    }

    fn search_raw(&self, name: &str) -> Result<Value, WikidataError> {
        self.get(&[
            ("action", "wbsearchentities"),
            ("search", name),
            ("language", "en"),
            ("uselang", "en"),
            ("type", "item"),
            ("limit", "10"),
            ("format", "json"),
        ])
    }

    fn entities_raw(&self, ids: &[String]) -> Result<Value, WikidataError> {
        let joined = ids.join("|");
        self.get(&[
            ("action", "wbgetentities"),
            ("ids", &joined),
            ("props", "labels|descriptions|claims"),
            ("languages", "en"),
            ("format", "json"),
        ])
    }
}

impl WikidataApi for HttpApi {
    fn search(&self, name: &str) -> Result<Vec<Candidate>, WikidataError> {
        Ok(parse_search(&self.search_raw(name)?))
    }

    fn entities(&self, ids: &[String]) -> Result<HashMap<String, Value>, WikidataError> {
        let mut out = HashMap::new();
        for chunk in ids.chunks(IDS_PER_CALL) {
            out.extend(parse_entities(&self.entities_raw(chunk)?));
        }
        Ok(out)
    }
}

/// File name used for a recorded search response.
pub fn search_fixture_name(name: &str) -> String {
    let slug: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    format!("{slug}.json")
}

/// Serves recorded API responses from a directory:
/// `search/<slug>.json` holds raw `wbsearchentities` output and every
/// `entities/*.json` holds a raw `wbgetentities` document; all entity files
/// are merged into one index.
pub struct FixtureApi {
    dir: PathBuf,
    entities: HashMap<String, Value>,
}

impl FixtureApi {
    pub fn open(dir: &Path) -> Result<Self, WikidataError> {
        let mut entities = HashMap::new();
        let ent_dir = dir.join("entities");
        if ent_dir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&ent_dir)
                .map_err(|e| WikidataError::Io { path: ent_dir.display().to_string(), message: e.to_string() })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            for f in files {
                let v = read_value(&f)?;
                entities.extend(parse_entities(&v));
            }
        }
        Ok(Self { dir: dir.to_path_buf(), entities })
    }
}

fn read_value(path: &Path) -> Result<Value, WikidataError> {
    let text = fs::read_to_string(path).map_err(|e| WikidataError::Io { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| WikidataError::Io { path: path.display().to_string(), message: e.to_string() })
}

impl WikidataApi for FixtureApi {
    fn search(&self, name: &str) -> Result<Vec<Candidate>, WikidataError> {
        let path = self.dir.join("search").join(search_fixture_name(name));
        if !path.exists() {
            return Err(WikidataError::FixtureMissing(format!("search {name:?}")));
        }
        Ok(parse_search(&read_value(&path)?))
    }

    fn entities(&self, ids: &[String]) -> Result<HashMap<String, Value>, WikidataError> {
        Ok(ids
            .iter()
            .map(|id| {
                let v = self.entities.get(id).cloned().unwrap_or_else(|| json!({"id": id, "missing": ""}));
                (id.clone(), v)
            })
            .collect())
    }
}

/// Refuses every call; used to prove that a warm cache is sufficient.
pub struct OfflineApi;

impl WikidataApi for OfflineApi {
    fn search(&self, name: &str) -> Result<Vec<Candidate>, WikidataError> {
        Err(WikidataError::Transport(format!("network disabled (search {name:?})")))
    }

    fn entities(&self, ids: &[String]) -> Result<HashMap<String, Value>, WikidataError> {
        Err(WikidataError::Transport(format!("network disabled (entities {ids:?})")))
    }
}

/// Live client that also writes every response into a [`FixtureApi`]
/// directory layout.
pub struct RecordingApi {
    inner: HttpApi,
    dir: PathBuf,
    lock: Mutex<()>,
}

impl RecordingApi {
    pub fn new(inner: HttpApi, dir: &Path) -> Self {
        Self { inner, dir: dir.to_path_buf(), lock: Mutex::new(()) }
    }

    fn save(&self, path: PathBuf, value: &Value) -> Result<(), WikidataError> {
        let _g = self.lock.lock().expect("recording lock poisoned");
        let io = |e: std::io::Error| WikidataError::Io { path: path.display().to_string(), message: e.to_string() };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let text = serde_json::to_string_pretty(value).expect("json value serializes");
        fs::write(&path, text + "\n").map_err(io)
    }
}

impl WikidataApi for RecordingApi {
    fn search(&self, name: &str) -> Result<Vec<Candidate>, WikidataError> {
        let raw = self.inner.search_raw(name)?;
        self.save(self.dir.join("search").join(search_fixture_name(name)), &raw)?;
        Ok(parse_search(&raw))
    }

    fn entities(&self, ids: &[String]) -> Result<HashMap<String, Value>, WikidataError> {
        let mut out = HashMap::new();
        for chunk in ids.chunks(IDS_PER_CALL) {
            let raw = self.inner.entities_raw(chunk)?;
            let name = format!("{}.json", chunk.join("_"));
            let name = if name.len() > 120 { format!("{}.json", crate::model::ids::sha256_hex(name.as_bytes())) } else { name };
            self.save(self.dir.join("entities").join(name), &raw)?;
            out.extend(parse_entities(&raw));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_slug() {
        assert_eq!(search_fixture_name("Keir Starmer"), "keir_starmer.json");
        assert_eq!(search_fixture_name(" Tom  Hunt"), "tom__hunt.json");
    }

    #[test]
    fn fixture_api_marks_unknown_entities_missing() {
        let dir = tempfile::tempdir().unwrap();
        let api = FixtureApi::open(dir.path()).unwrap();
        let got = api.entities(&["Q1".to_string()]).unwrap();
        assert!(super::super::is_missing(&got["Q1"]));
        assert!(matches!(api.search("Nobody"), Err(WikidataError::FixtureMissing(_))));
    }
}

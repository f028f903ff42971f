use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::WikidataError;
use crate::model::ActorProfile;

/// One JSON file per qid. Concurrent readers, serialized writers; writes go
/// through a temporary file and a rename.
pub struct ProfileCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ProfileCache {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), write_lock: Mutex::new(()) }
    }

    pub fn path_for(&self, qid: &str) -> PathBuf {
        self.dir.join(format!("{qid}.json"))
    }

    pub fn get(&self, qid: &str) -> Result<Option<ActorProfile>, WikidataError> {
        let path = self.path_for(qid);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(WikidataError::Io { path: path.display().to_string(), message: e.to_string() }),
        };
        let profile: ActorProfile = serde_json::from_str(&text)
            .map_err(|e| WikidataError::Cache { path: path.display().to_string(), message: e.to_string() })?;
        if profile.qid != qid {
            return Err(WikidataError::Cache {
                path: path.display().to_string(),
                message: format!("holds {} instead of {qid}", profile.qid),
            });
        }
        Ok(Some(profile))
    }

    pub fn put(&self, profile: &ActorProfile) -> Result<(), WikidataError> {
        let _g = self.write_lock.lock().expect("cache lock poisoned");
        let path = self.path_for(&profile.qid);
        let io = |e: std::io::Error| WikidataError::Io { path: path.display().to_string(), message: e.to_string() };
        fs::create_dir_all(&self.dir).map_err(io)?;
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(profile).expect("profile serializes") + "\n";
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }
}

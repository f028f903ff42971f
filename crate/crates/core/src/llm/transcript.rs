use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, ChatRequest, ChatResponse, LlmError};

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

impl TranscriptEntry {
    pub fn new(request: &ChatRequest, response: &ChatResponse) -> Self {
        Self { digest: request.digest(), request: request.clone(), response: response.clone() }
    }
}

/// Serialized, append-only transcript writer.
pub struct TranscriptRecorder {
    path: String,
    file: Mutex<File>,
}

impl TranscriptRecorder {
    pub fn create(path: &Path) -> Result<Self, LlmError> {
        let err = |e: std::io::Error| LlmError::Transcript { path: path.display().to_string(), message: e.to_string() };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(err)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        Ok(Self { path: path.display().to_string(), file: Mutex::new(file) })
    }

    pub fn append(&self, request: &ChatRequest, response: &ChatResponse) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(&TranscriptEntry::new(request, response))
            .map_err(|e| LlmError::Transcript { path: self.path.clone(), message: e.to_string() })?;
        line.push('\n');
        let mut file = self.file.lock().expect("transcript poisoned");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| LlmError::Transcript { path: self.path.clone(), message: e.to_string() })
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let err = |message: String| LlmError::Transcript { path: path.display().to_string(), message };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", idx + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

/// Answers requests from a recorded transcript by digest.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, ChatResponse>,
    duplicates: usize,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::from_entries(read_transcript(path)?))
    }

    /// Later entries with an already-seen digest replace earlier ones.
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut responses = HashMap::new();
        let mut duplicates = 0;
        for e in entries {
            if responses.insert(e.digest.clone(), e.response).is_some() {
                log::warn!("transcript digest {} recorded more than once; keeping the last response", e.digest);
                duplicates += 1;
            }
        }
        Self { responses, duplicates }
    }

    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let digest = request.digest();
        self.responses.get(&digest).cloned().ok_or(LlmError::ReplayMiss(digest))
    }
}

/// Checks every entry's stored digest against its request. Returns the
/// number of entries and the list of mismatching line numbers.
pub fn verify_transcript(path: &Path) -> Result<(usize, Vec<usize>, usize), LlmError> {
    let entries = read_transcript(path)?;
    let mismatches = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.request.digest() != e.digest)
        .map(|(i, _)| i + 1)
        .collect();
    let dupes = ReplayBackend::from_entries(entries.clone()).duplicate_count();
    Ok((entries.len(), mismatches, dupes))
}

#[cfg(test)]
mod tests {
    use super::super::{ChatMessage, Gateway};
    use super::*;

    fn req(q: &str) -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::user(q)], 8)
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let live = Gateway::from_fn(|r| Ok(ChatResponse::stop(format!("echo {}", r.messages[0].content))))
            .with_recorder(&path)
            .unwrap();
        assert_eq!(live.complete(&req("a")).unwrap().content, "echo a");
        assert_eq!(read_transcript(&path).unwrap().len(), 1);

        let replay = Gateway::replay(&path).unwrap();
        assert_eq!(replay.complete(&req("a")).unwrap().content, "echo a");
        assert!(matches!(replay.complete(&req("b")), Err(LlmError::ReplayMiss(_))));
    }

    #[test]
    fn duplicate_digests_last_write_wins() {
        let r = req("same");
        let entries = vec![
            TranscriptEntry::new(&r, &ChatResponse::stop("first")),
            TranscriptEntry::new(&r, &ChatResponse::stop("second")),
        ];
        let backend = ReplayBackend::from_entries(entries);
        assert_eq!(backend.duplicate_count(), 1);
        assert_eq!(backend.complete(&r).unwrap().content, "second");
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut e = TranscriptEntry::new(&req("a"), &ChatResponse::stop("x"));
        e.digest = "deadbeef".into();
        let good = TranscriptEntry::new(&req("b"), &ChatResponse::stop("y"));
        let text = format!("{}\n{}\n", serde_json::to_string(&good).unwrap(), serde_json::to_string(&e).unwrap());
        std::fs::write(&path, text).unwrap();
        let (n, bad, _) = verify_transcript(&path).unwrap();
        assert_eq!((n, bad), (2, vec![2]));
    }
}

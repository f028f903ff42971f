use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatRequest, LlmError, Role};
use crate::model::DatasetInstance;

/// One chat-format fine-tuning example: the inference prompt followed by the
/// gold answer as the assistant turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub messages: Vec<ChatMessage>,
}

impl FineTuneRecord {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.last() {
            Some(m) if m.role == Role::Assistant && (m.content == "1" || m.content == "0") => Ok(()),
            _ => Err(LlmError::Export("last message must be an assistant turn of \"1\" or \"0\"".into())),
        }
    }
}

/// Appends the gold label to an inference prompt.
pub fn finetune_record(prompt: &ChatRequest, label: bool) -> FineTuneRecord {
    let mut messages = prompt.messages.clone();
    messages.push(ChatMessage::assistant(if label { "1" } else { "0" }));
    FineTuneRecord { messages }
}

/// Writes one record per instance to `path` using the same prompt builder as
/// inference. Returns the number of records written.
pub fn export_finetune_file<F, E>(instances: &[DatasetInstance], build_prompt: F, path: &Path) -> Result<usize, LlmError>
where
    F: Fn(&DatasetInstance) -> Result<ChatRequest, E>,
    E: std::fmt::Display,
{
    if instances.is_empty() {
        return Err(LlmError::EmptySplit);
    }
    let mut records = Vec::with_capacity(instances.len());
    for inst in instances {
        let prompt = build_prompt(inst).map_err(|e| LlmError::Export(format!("{}: {e}", inst.instance_id)))?;
        let record = finetune_record(&prompt, inst.label);
        record.validate()?;
        records.push(record);
    }
    crate::model::io::write_jsonl(path, &records).map_err(|e| LlmError::Export(e.to_string()))?;
    Ok(records.len())
}

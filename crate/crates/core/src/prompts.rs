//! Prompt templates. Defaults ship in `prompts/`; a directory with files of
//! the same names overrides them one by one.

use std::path::Path;

use serde::Serialize;

use crate::model::ids::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplates {
    pub extraction: String,
    pub extraction_user: String,
    pub reformat: String,
    pub viewpoint_proposal: String,
    pub viewpoint_consolidation: String,
    pub classification_task: String,
    pub classification_user: String,
    pub label_retry: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            extraction: include_str!("../prompts/extraction.txt").to_string(),
            extraction_user: include_str!("../prompts/extraction_user.txt").to_string(),
            reformat: include_str!("../prompts/reformat.txt").to_string(),
            viewpoint_proposal: include_str!("../prompts/viewpoint_proposal.txt").to_string(),
            viewpoint_consolidation: include_str!("../prompts/viewpoint_consolidation.txt").to_string(),
            classification_task: include_str!("../prompts/classification_task.txt").to_string(),
            classification_user: include_str!("../prompts/classification_user.txt").to_string(),
            label_retry: include_str!("../prompts/label_retry.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        let slots: [(&str, &mut String); 8] = [
            ("extraction.txt", &mut t.extraction),
            ("extraction_user.txt", &mut t.extraction_user),
            ("reformat.txt", &mut t.reformat),
            ("viewpoint_proposal.txt", &mut t.viewpoint_proposal),
            ("viewpoint_consolidation.txt", &mut t.viewpoint_consolidation),
            ("classification_task.txt", &mut t.classification_task),
            ("classification_user.txt", &mut t.classification_user),
            ("label_retry.txt", &mut t.label_retry),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }

    /// Digest of every template, recorded in run manifests.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("templates serialize"))
    }
}

/// Substitutes `{name}` placeholders in one pass; substituted values are
/// never rescanned. Unknown placeholders are left as they are.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter().find(|(k, _)| *k == key).map(|(_, v)| (v, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

//! The operator configuration file (TOML). Every section is optional;
//! missing keys take their defaults. Secrets are never read from here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyConfig, ModelSpec};
use crate::dataset::SplitRatios;
use crate::extraction::{ExtractionConfig, TopicFilter};
use crate::llm::{GatewayConfig, HttpConfig};
use crate::par::Parallelism;
use crate::retry::RetryPolicy;
use crate::viewpoints::ViewpointConfig;
use crate::wikidata::{PropertySet, RenderConfig, SelectionPolicy, DEFAULT_ENDPOINT};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    pub http: HttpConfig,
    pub gateway: GatewayConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WikidataSection {
    pub endpoint: String,
    pub retry: RetryPolicy,
    pub properties: PropertySet,
    pub selection: SelectionPolicy,
    pub render: RenderConfig,
}

impl Default for WikidataSection {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            retry: RetryPolicy::default(),
            properties: PropertySet::default(),
            selection: SelectionPolicy::default(),
            render: RenderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub ratios: SplitRatios,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub workspace: PathBuf,
    /// Directory of prompt-template overrides.
    pub prompts_dir: Option<PathBuf>,
    pub parallelism: Parallelism,
    pub topic: TopicFilter,
    pub llm: LlmSection,
    pub extraction: ExtractionConfig,
    pub viewpoints: ViewpointConfig,
    pub wikidata: WikidataSection,
    pub dataset: DatasetSection,
    pub classification: ClassifyConfig,
    pub models: Vec<ModelSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            workspace: PathBuf::from("workspace"),
            prompts_dir: None,
            parallelism: Parallelism::default(),
            topic: TopicFilter::new("immigration"),
            llm: LlmSection::default(),
            extraction: ExtractionConfig::default(),
            viewpoints: ViewpointConfig::default(),
            wikidata: WikidataSection::default(),
            dataset: DatasetSection { ratios: SplitRatios::default(), seed: 42 },
            classification: ClassifyConfig::default(),
            models: Vec::new(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_string(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative workspace and prompt paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.workspace.is_relative() {
            cfg.workspace = base.join(&cfg.workspace);
        }
        if let Some(dir) = cfg.prompts_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = base.join(&*dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dataset.ratios.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.topic.topic.trim().is_empty() {
            return Err(ConfigError::Invalid("topic must not be empty".into()));
        }
        if self.llm.gateway.max_in_flight == 0 {
            return Err(ConfigError::Invalid("llm.gateway.max_in_flight must be at least 1".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return Err(ConfigError::Invalid(format!("model {:?} is listed twice", m.name)));
            }
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name || m.base_model == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("", "x").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
workspace = "ws"
parallelism = "sequential"

[topic]
topic = "immigration"
keywords = ["asylum", "small boats"]

[classification.context]
window = 2

[dataset.ratios]
train = 80
validation = 10
test = 10

[wikidata.render]
position_top_k = 3

[[models]]
name = "gpt-4o-mini"
base_model = "gpt-4o-mini"
fine_tuned_model = "ft:gpt-4o-mini:org:immigration3k"
"#;
        let c = Config::parse(text, "x").unwrap();
        assert_eq!(c.parallelism, Parallelism::Sequential);
        assert_eq!(c.classification.context.window, 2);
        assert!(c.classification.strict);
        assert_eq!(c.dataset.ratios.train, 80);
        assert_eq!(c.wikidata.render.position_top_k, Some(3));
        assert_eq!(c.model("gpt-4o-mini").unwrap().fine_tuned_model.as_deref(), Some("ft:gpt-4o-mini:org:immigration3k"));
    }

    #[test]
    fn bad_values_and_unknown_keys_fail() {
        assert!(matches!(Config::parse("[dataset.ratios]\ntrain = 50\nvalidation = 50\ntest = 10\n", "x"), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::parse("workspace = 3", "x"), Err(ConfigError::Parse { .. })));
        assert!(matches!(Config::parse("worksapce = \"ws\"", "x"), Err(ConfigError::Parse { .. })));
    }
}

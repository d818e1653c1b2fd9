//! TOML configuration with `[embedder]`, `[generator]`, `[explain]`,
//! `[rag]` and `[service]` sections. Every field has a default, so an empty
//! file (or no file) runs fully offline on the local reference backends.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{
    EmbedderProvider, ExtractiveMockGenerator, FixedEmbedder, Generator, LexicalProvider, OpenAiEmbedder,
    OpenAiGenerator, API_KEY_ENV,
};
use crate::error::{Error, Result};
use crate::rag::{PromptTemplate, DEFAULT_TEMPLATE};
use crate::types::ExplainerConfig;

const REDACTED: &str = "***";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub embedder: EmbedderConfig,
    pub generator: GeneratorConfig,
    pub explain: ExplainerConfig,
    pub rag: RagConfig,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    /// `lexical` or `openai`.
    pub kind: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub dimension: Option<usize>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: "lexical".into(),
            endpoint: None,
            model: None,
            api_key: None,
            dimension: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// `mock` or `openai`.
    pub kind: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub seed: Option<u64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            kind: "mock".into(),
            endpoint: None,
            model: None,
            api_key: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RagConfig {
    pub index: PathBuf,
    pub k: usize,
    pub template: String,
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            index: PathBuf::from("index.ragx"),
            k: 2,
            template: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub port: u16,
    pub cors_origin: Option<String>,
    pub timeout_secs: u64,
    pub max_inflight: usize,
    pub lru_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            cors_origin: None,
            timeout_secs: 120,
            max_inflight: 32,
            lru_capacity: 128,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&raw)
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        let config: AppConfig = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.explain.validate()?;
        PromptTemplate::new(self.rag.template.as_str())?;
        if self.rag.k == 0 {
            return Err(Error::Config("rag.k must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy with every secret replaced by a placeholder.
    pub fn redacted(&self) -> Self {
        let mut out = self.clone();
        if out.embedder.api_key.is_some() {
            out.embedder.api_key = Some(REDACTED.into());
        }
        if out.generator.api_key.is_some() {
            out.generator.api_key = Some(REDACTED.into());
        }
        out
    }
}

fn remote_setting(value: &Option<String>, section: &str, field: &str) -> Result<String> {
    value
        .clone()
        .ok_or_else(|| Error::Config(format!("[{section}] {field} is required for openai backends")))
}

fn api_key(configured: &Option<String>) -> Option<String> {
    std::env::var(API_KEY_ENV).ok().or_else(|| configured.clone())
}

impl EmbedderConfig {
    /// `base_texts` seed the lexical vocabulary; remote backends ignore them.
    pub fn provider(&self, base_texts: Vec<String>) -> Result<Arc<dyn EmbedderProvider>> {
        match self.kind.as_str() {
            "lexical" | "local-lexical" => Ok(Arc::new(LexicalProvider::new(base_texts))),
            "openai" => {
                let endpoint = remote_setting(&self.endpoint, "embedder", "endpoint")?;
                let model = remote_setting(&self.model, "embedder", "model")?;
                let mut client = OpenAiEmbedder::new(&endpoint, &model, api_key(&self.api_key));
                if let Some(d) = self.dimension {
                    client = client.with_dimension(d);
                }
                Ok(Arc::new(FixedEmbedder(Arc::new(client))))
            }
            other => Err(Error::Config(format!("unknown embedder `{other}`"))),
        }
    }
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<Arc<dyn Generator>> {
        match self.kind.as_str() {
            "mock" | "mock-extractive" => Ok(Arc::new(ExtractiveMockGenerator::default())),
            "openai" => {
                let endpoint = remote_setting(&self.endpoint, "generator", "endpoint")?;
                let model = remote_setting(&self.model, "generator", "model")?;
                let mut client = OpenAiGenerator::new(&endpoint, &model, api_key(&self.api_key));
                if let Some(seed) = self.seed {
                    client = client.with_seed(seed);
                }
                Ok(Arc::new(client))
            }
            other => Err(Error::Config(format!("unknown generator `{other}`"))),
        }
    }
}

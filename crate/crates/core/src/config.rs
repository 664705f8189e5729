//! Run configuration: one TOML or JSON document with `[retrieval]`,
//! `[backends]`, `[ablation]` and `[runner]` sections. Every field has a
//! default, so an empty document is a valid all-mock configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{AgentSettings, HttpLlm, LlmBackend};
use crate::backend::BackendError;
use crate::mock::{HashEmbedder, MockLlm, MockScript};
use crate::retrieval::{Bm25Params, EmbeddingBackend, HttpEmbedder};

pub const ENV_LLM_ENDPOINT: &str = "LLM_ENDPOINT";
pub const ENV_LLM_API_KEY: &str = "LLM_API_KEY";
pub const ENV_EMBED_ENDPOINT: &str = "EMBED_ENDPOINT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub k1: f64,
    pub b: f64,
    pub top_k_coarse: usize,
    pub top_k_rerank: usize,
    /// Maximum characters of statute text quoted per hit in the summary.
    pub excerpt_chars: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self {
            k1: p.k1,
            b: p.b,
            top_k_coarse: p.top_k_coarse,
            top_k_rerank: p.top_k_rerank,
            excerpt_chars: 240,
        }
    }
}

impl RetrievalConfig {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
            top_k_coarse: self.top_k_coarse,
            top_k_rerank: self.top_k_rerank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub kind: LlmKind,
    /// Script for the mock backend; built-in templates only when absent.
    pub mock_script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            kind: LlmKind::Mock,
            mock_script: None,
            endpoint: None,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EmbeddingKind {
    #[default]
    #[serde(rename = "mock-hash")]
    MockHash,
    #[serde(rename = "http")]
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::MockHash,
            dimension: 64,
            endpoint: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendsConfig {
    pub llm: LlmConfig,
    pub embedding: EmbeddingConfig,
}

/// Stage switches. Each one replaces exactly one stage with its degenerate
/// behavior; all sixteen combinations are runnable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    /// Off: the video description is treated as empty.
    pub use_video_caption: bool,
    /// Off: the fact statement is the raw text concatenation.
    pub use_fact_aggregation: bool,
    /// Off: no retrieval, the judges get the no-support digest.
    pub use_assistant: bool,
    /// Off: the Issue Judge's preliminary judgment is final.
    pub use_multi_judge: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::ALL_ON
    }
}

impl AblationFlags {
    pub const ALL_ON: AblationFlags = AblationFlags {
        use_video_caption: true,
        use_fact_aggregation: true,
        use_assistant: true,
        use_multi_judge: true,
    };

    pub const ALL_OFF: AblationFlags = AblationFlags {
        use_video_caption: false,
        use_fact_aggregation: false,
        use_assistant: false,
        use_multi_judge: false,
    };

    /// The cumulative sweep: nothing, then caption, fact aggregation,
    /// assistant and multi-judge switched on one after another.
    pub fn sweep() -> [AblationFlags; 5] {
        let mut rows = [Self::ALL_OFF; 5];
        for (i, row) in rows.iter_mut().enumerate() {
            row.use_video_caption = i >= 1;
            row.use_fact_aggregation = i >= 2;
            row.use_assistant = i >= 3;
            row.use_multi_judge = i >= 4;
        }
        rows
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.use_video_caption, "caption"),
            (self.use_fact_aggregation, "fact-agg"),
            (self.use_assistant, "assistant"),
            (self.use_multi_judge, "multi-judge"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, name)| *name)
        .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunnerConfig {
    /// Maximum number of cases processed at once.
    pub concurrency: usize,
    pub agents: AgentSettings,
    /// Off: stage wall times are recorded as zero so traces are
    /// reproducible byte for byte.
    pub record_timings: bool,
    pub trace_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            concurrency: 4,
            agents: AgentSettings::default(),
            record_timings: true,
            trace_dir: None,
            report_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub retrieval: RetrievalConfig,
    pub backends: BackendsConfig,
    pub ablation: AblationFlags,
    pub runner: RunnerConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Reads and validates a config file; see [`PipelineConfig::read`].
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let config = Self::read(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a `.json` or TOML file (any other extension) without
    /// validating it. Relative paths inside the file are resolved against
    /// the file's directory.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let origin = path.display().to_string();
        let mut config = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text, &origin)?
        } else {
            Self::from_toml_str(&text, &origin)?
        };
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut self.backends.llm.mock_script);
        resolve(&mut self.runner.trace_dir);
        resolve(&mut self.runner.report_dir);
    }

    /// `LLM_ENDPOINT` and `EMBED_ENDPOINT` replace the configured endpoints.
    /// The backend kinds are left as configured.
    pub fn apply_env_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(v) = lookup(ENV_LLM_ENDPOINT).filter(|v| !v.trim().is_empty()) {
            self.backends.llm.endpoint = Some(v);
        }
        if let Some(v) = lookup(ENV_EMBED_ENDPOINT).filter(|v| !v.trim().is_empty()) {
            self.backends.embedding.endpoint = Some(v);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.retrieval
            .bm25()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.retrieval.excerpt_chars == 0 {
            return Err(ConfigError::Invalid("retrieval.excerpt_chars must be positive".into()));
        }
        if self.runner.concurrency == 0 {
            return Err(ConfigError::Invalid("runner.concurrency must be positive".into()));
        }
        let agents = &self.runner.agents;
        if !(agents.temperature.is_finite() && agents.temperature >= 0.0) {
            return Err(ConfigError::Invalid("runner.agents.temperature must be >= 0".into()));
        }
        if agents.max_output_tokens == 0 {
            return Err(ConfigError::Invalid("runner.agents.max_output_tokens must be positive".into()));
        }
        if self.backends.embedding.dimension == 0 {
            return Err(ConfigError::Invalid("backends.embedding.dimension must be positive".into()));
        }
        if self.backends.llm.kind == LlmKind::Http && self.backends.llm.endpoint.is_none() {
            return Err(ConfigError::Invalid(format!(
                "backends.llm.kind = \"http\" needs an endpoint (or {ENV_LLM_ENDPOINT})"
            )));
        }
        if self.backends.embedding.kind == EmbeddingKind::Http && self.backends.embedding.endpoint.is_none() {
            return Err(ConfigError::Invalid(format!(
                "backends.embedding.kind = \"http\" needs an endpoint (or {ENV_EMBED_ENDPOINT})"
            )));
        }
        Ok(())
    }

    /// The configuration as recorded in traces and reports.
    pub fn snapshot(&self) -> Value {
        serde_json::to_value(self).expect("configuration serializes")
    }

    /// The settings that decide a run's outcome, without machine-local
    /// paths or endpoints. Seeds trace ids.
    pub fn fingerprint(&self) -> Value {
        serde_json::json!({
            "retrieval": self.retrieval,
            "ablation": self.ablation,
            "agents": self.runner.agents,
            "llm": self.backends.llm.kind,
            "embedding": {"kind": self.backends.embedding.kind, "dimension": self.backends.embedding.dimension},
        })
    }

    pub fn build_llm(&self, api_key: Option<String>) -> Result<Arc<dyn LlmBackend>, BackendError> {
        let llm = &self.backends.llm;
        match llm.kind {
            LlmKind::Mock => {
                let script = match &llm.mock_script {
                    Some(path) => MockScript::load(path)?,
                    None => MockScript::default(),
                };
                Ok(Arc::new(MockLlm::new(script)))
            }
            LlmKind::Http => {
                let endpoint = llm
                    .endpoint
                    .clone()
                    .ok_or_else(|| BackendError::Config("no LLM endpoint configured".into()))?;
                Ok(Arc::new(HttpLlm::new(
                    endpoint,
                    api_key,
                    Duration::from_secs(llm.timeout_secs),
                )))
            }
        }
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn EmbeddingBackend>, BackendError> {
        let emb = &self.backends.embedding;
        match emb.kind {
            EmbeddingKind::MockHash => Ok(Arc::new(HashEmbedder::new(emb.dimension))),
            EmbeddingKind::Http => {
                let endpoint = emb
                    .endpoint
                    .clone()
                    .ok_or_else(|| BackendError::Config("no embedding endpoint configured".into()))?;
                Ok(Arc::new(HttpEmbedder::new(
                    endpoint,
                    emb.dimension,
                    Duration::from_secs(emb.timeout_secs),
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let c = PipelineConfig::from_toml_str("", "t").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.retrieval.bm25(), Bm25Params::default());
        c.validate().unwrap();
    }

    #[test]
    fn toml_sections() {
        let text = r#"
            [retrieval]
            k1 = 1.5
            top_k_rerank = 5

            [backends.llm]
            kind = "mock"
            mock_script = "script.json"

            [backends.embedding]
            kind = "mock-hash"
            dimension = 32

            [ablation]
            use_multi_judge = false

            [runner]
            concurrency = 2
            record_timings = false

            [runner.agents]
            max_repairs = 1
        "#;
        let mut c = PipelineConfig::from_toml_str(text, "t").unwrap();
        assert_eq!(c.retrieval.k1, 1.5);
        assert_eq!(c.retrieval.b, 0.75);
        assert_eq!(c.backends.embedding.dimension, 32);
        assert!(!c.ablation.use_multi_judge && c.ablation.use_assistant);
        assert_eq!(c.runner.agents.max_repairs, 1);
        assert_eq!(c.runner.agents.max_retries, 1);
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.backends.llm.mock_script.as_deref(), Some(Path::new("/cfg/script.json")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml_str("[retrieval]\nk3 = 1", "t").is_err());
        assert!(PipelineConfig::from_json_str(r#"{"extra": {}}"#, "t").is_err());
    }

    #[test]
    fn invalid_values() {
        let c = PipelineConfig::from_toml_str("[retrieval]\nb = 1.5", "t").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        let c = PipelineConfig::from_toml_str("[backends.llm]\nkind = \"http\"", "t").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn env_overrides_endpoints() {
        let mut c = PipelineConfig::default();
        c.backends.llm.kind = LlmKind::Http;
        c.apply_env_overrides(|k| (k == ENV_LLM_ENDPOINT).then(|| "http://localhost:9/v1".to_string()));
        assert_eq!(c.backends.llm.endpoint.as_deref(), Some("http://localhost:9/v1"));
        assert!(c.backends.embedding.endpoint.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn sweep_rows_are_cumulative() {
        let rows = AblationFlags::sweep();
        assert_eq!(rows[0], AblationFlags::ALL_OFF);
        assert_eq!(rows[4], AblationFlags::ALL_ON);
        assert_eq!(
            rows.map(|r| r.label()),
            [
                "none",
                "caption",
                "caption+fact-agg",
                "caption+fact-agg+assistant",
                "caption+fact-agg+assistant+multi-judge"
            ]
            .map(String::from)
        );
    }
}

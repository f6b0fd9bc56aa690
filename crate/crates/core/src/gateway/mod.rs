//! Talking to the model: prompt construction, a chat-completion client,
//! a deterministic mock, a content-addressed transcript cache and retries.

mod cache;
mod http;
mod mock;
mod prompt;
mod retry;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use cache::TranscriptCache;
pub use http::HttpBackend;
pub use mock::{MockBackend, MockEntry, MockScript};
pub use prompt::{build_annotation_prompt, build_interpretation_prompt, PromptTemplate};
pub use retry::RetryPolicy;

use crate::text::sha256_hex;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("passage is empty")]
    EmptyPassage,
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingCredentials(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by backend")]
    RateLimited,
    #[error("unusable backend response: {0}")]
    BadResponse(String),
    #[error("mock has no canned response for this prompt")]
    NoCannedResponse,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("cache I/O on {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GatewayError {
    /// Transport failures and rate limiting are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_) | GatewayError::RateLimited)
    }
}

fn default_temperature() -> f64 {
    0.0
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    60
}

fn default_max_in_flight() -> usize {
    4
}

/// Backend settings, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Fixed output budget. When absent it is derived from the passage.
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: default_temperature(),
            max_tokens: None,
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!(
                "temperature {} is outside [0, 2]",
                self.temperature
            )));
        }
        if self.timeout_secs == 0 {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be positive".into()));
        }
        if self.model.trim().is_empty() {
            return Err(GatewayError::Config("model is empty".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, GatewayError> {
        let raw = std::fs::read_to_string(path).map_err(|source| GatewayError::Cache {
            path: path.to_path_buf(),
            source,
        })?;
        let config: BackendConfig = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Output budget for a passage: twice a chars/4 token estimate, never
    /// below 256 so short passages still fit their tags.
    pub fn max_tokens_for(&self, passage: &str) -> u32 {
        if let Some(n) = self.max_tokens {
            return n;
        }
        let estimate = crate::text::char_len(passage).div_ceil(4);
        (2 * estimate).max(256).min(u32::MAX as usize) as u32
    }
}

/// One single-turn request as handed to a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// 0 for a first request; a renewed request for the same prompt (after
    /// the pipeline rejected an answer) gets a higher number. Not sent over
    /// the wire.
    pub variant: u32,
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

/// A stored exchange with the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub model: String,
    pub prompt: String,
    pub response: String,
    pub prompt_digest: String,
    pub timestamp: String,
}

impl Transcript {
    pub fn digest_matches(&self) -> bool {
        prompt_digest(&self.model, &self.prompt) == self.prompt_digest
    }
}

/// SHA-256 hex of `model + "\n" + prompt`.
pub fn prompt_digest(model: &str, prompt: &str) -> String {
    sha256_hex(&format!("{model}\n{prompt}"))
}

/// Source of transcript timestamps. Offline runs use a fixed instant so
/// their outputs are byte-stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(String),
}

impl Clock {
    pub fn epoch() -> Self {
        Clock::Fixed("1970-01-01T00:00:00Z".to_string())
    }

    pub fn now(&self) -> String {
        match self {
            Clock::System => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            Clock::Fixed(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub transcript: Transcript,
    /// Backend calls made; 0 on a cache hit.
    pub attempts: u32,
    pub cached: bool,
}

/// Backend + cache + retry policy + concurrency bound.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: BackendConfig,
    cache: Option<TranscriptCache>,
    retry: RetryPolicy,
    clock: Clock,
    permits: Semaphore,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, config: BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Gateway {
            backend,
            permits: Semaphore::new(config.max_in_flight),
            config,
            cache: None,
            retry: RetryPolicy::default(),
            clock: Clock::System,
        })
    }

    pub fn with_cache(mut self, cache: TranscriptCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub async fn complete(&self, prompt: &str, budget_text: &str) -> Result<Completion, GatewayError> {
        self.complete_variant(prompt, budget_text, 0).await
    }

    /// Sends `prompt` unless a transcript for (model, prompt, variant) is
    /// cached. `budget_text` sizes the default output budget.
    pub async fn complete_variant(
        &self,
        prompt: &str,
        budget_text: &str,
        variant: u32,
    ) -> Result<Completion, GatewayError> {
        let digest = prompt_digest(&self.config.model, prompt);
        if let Some(cache) = &self.cache {
            if let Some(transcript) = cache.get(&digest, variant) {
                tracing::debug!(%digest, variant, "transcript cache hit");
                return Ok(Completion { transcript, attempts: 0, cached: true });
            }
        }

        let request = ChatRequest {
            model: self.config.model.clone(),
            prompt: prompt.to_string(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens_for(budget_text),
            variant,
        };
        let (response, attempts) = {
            let _permit = self
                .permits
                .acquire()
                .await
                .map_err(|_| GatewayError::Transport("gateway closed".into()))?;
            self.retry.run(|| self.backend.chat(&request)).await
        };
        let response = response?;

        let transcript = Transcript {
            model: self.config.model.clone(),
            prompt: prompt.to_string(),
            response,
            prompt_digest: digest,
            timestamp: self.clock.now(),
        };
        if let Some(cache) = &self.cache {
            cache.put(&transcript, variant).await?;
        }
        Ok(Completion { transcript, attempts, cached: false })
    }
}

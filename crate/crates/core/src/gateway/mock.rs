use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, GatewayError, PromptTemplate};

/// Canned answers for one passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    pub passage: String,
    /// Annotation replies: request variant `n` gets `replies[min(n, len-1)]`.
    #[serde(default)]
    pub replies: Vec<String>,
    /// Reply to any other prompt mentioning the passage (interpretation).
    #[serde(default)]
    pub commentary: Option<String>,
}

/// Contents of `responses.json` in a mock directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    /// Returned for prompts no entry covers: a plausible but invented
    /// answer, to exercise the hallucination path.
    pub pastiche: Option<String>,
    /// The first calls fail with a transport error...
    pub transient_failures: u32,
    /// ...after the first calls are rate limited.
    pub rate_limited: u32,
}

/// Offline backend answering from a [`MockScript`].
#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    rate_limited_left: AtomicU32,
    failures_left: AtomicU32,
    calls: AtomicU32,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            rate_limited_left: AtomicU32::new(script.rate_limited),
            failures_left: AtomicU32::new(script.transient_failures),
            calls: AtomicU32::new(0),
            script,
        }
    }

    /// Loads `<dir>/responses.json`.
    pub fn load(dir: &Path) -> Result<Self, GatewayError> {
        let path = dir.join("responses.json");
        let raw = std::fs::read_to_string(&path).map_err(|source| GatewayError::Cache {
            path: path.clone(),
            source,
        })?;
        let script = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(MockBackend::new(script))
    }

    /// Total calls received, failed ones included.
    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    fn take(counter: &AtomicU32) -> bool {
        counter
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }

    fn answer(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let template = PromptTemplate::default();
        let annotation = template.extract_passage(&request.prompt);
        let entry = self
            .script
            .entries
            .iter()
            .filter(|e| !e.passage.is_empty())
            .filter(|e| match annotation {
                Some(p) => p == e.passage,
                None => request.prompt.contains(&e.passage),
            })
            .max_by_key(|e| e.passage.len());

        let canned = match (entry, annotation) {
            (Some(e), Some(_)) if !e.replies.is_empty() => {
                let i = (request.variant as usize).min(e.replies.len() - 1);
                Some(e.replies[i].clone())
            }
            (Some(e), None) => e.commentary.clone(),
            _ => None,
        };
        canned
            .or_else(|| self.script.pastiche.clone())
            .ok_or(GatewayError::NoCannedResponse)
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if Self::take(&self.rate_limited_left) {
            return Err(GatewayError::RateLimited);
        }
        if Self::take(&self.failures_left) {
            return Err(GatewayError::Transport("scripted failure".into()));
        }
        self.answer(request)
    }
}

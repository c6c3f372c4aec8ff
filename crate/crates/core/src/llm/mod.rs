//! Chat-completion gateway: a backend trait, a scripted mock, an HTTP
//! backend for OpenAI-compatible endpoints, retries, budgets and the
//! per-episode transcript.

mod http;
mod mock;
mod scoring;

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::TranscriptEntry;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV, BASE_URL_ENV, MODEL_ENV};
pub use mock::{MockBackend, Reply};
pub use scoring::{score_candidates, Combine, Scored};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Rough token estimate used when a backend reports no usage.
    pub fn estimated_tokens(&self) -> u64 {
        self.messages.iter().map(|m| m.content.len() as u64 / 4 + 4).sum()
    }
}

/// One candidate next action with its two likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub text: String,
    pub llm_likelihood: f64,
    pub feasibility_likelihood: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Prompt plus completion tokens, when the backend reports them.
    pub tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: transport failures, 5xx, 429.
    #[error("transient backend error: {0}")]
    Transient(String),
    #[error("backend error: {0}")]
    Fatal(String),
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    /// `role` names the calling component (task, check, steer, ...); remote
    /// backends ignore it.
    fn complete(&self, role: &str, request: &ChatRequest) -> Result<Completion, BackendError>;

    /// Whether `candidate_likelihoods` is available. Without it scoring
    /// falls back to a rating prompt.
    fn supports_likelihoods(&self) -> bool {
        false
    }

    /// Per-candidate likelihoods from token log-probabilities.
    fn candidate_likelihoods(
        &self,
        _request: &ChatRequest,
        _candidates: &[String],
    ) -> Result<Vec<f64>, BackendError> {
        Err(BackendError::Fatal(format!("{} exposes no log-probabilities", self.name())))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("backend unavailable after {retries} retries: {last}")]
    BackendUnavailable { retries: u32, last: String },
    #[error("backend rejected request: {0}")]
    Fatal(String),
    #[error("token budget exceeded ({used} of {budget})")]
    BudgetExceeded { used: u64, budget: u64 },
    #[error("episode call budget of {0} exhausted")]
    CallBudgetExceeded(u32),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay() -> Self {
        RetryPolicy {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            ..RetryPolicy::default()
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << attempt.min(16))
            .min(self.max_delay)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GatewayConfig {
    pub retry: RetryPolicy,
    /// Per-run token budget across all episodes.
    pub token_budget: Option<u64>,
    /// Minimum spacing between calls to the backend.
    pub min_interval: Duration,
}

/// Shared entry point to one backend. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: GatewayConfig,
    tokens_used: Arc<AtomicU64>,
    last_call: Arc<Mutex<Option<Instant>>>,
    log: Option<Arc<Mutex<File>>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, config: GatewayConfig) -> Self {
        Gateway {
            backend,
            config,
            tokens_used: Arc::new(AtomicU64::new(0)),
            last_call: Arc::new(Mutex::new(None)),
            log: None,
        }
    }

    /// Also append every transcript entry to a JSONL file.
    pub fn with_transcript_log(mut self, path: &Path) -> std::io::Result<Self> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        self.log = Some(Arc::new(Mutex::new(f)));
        Ok(self)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn tokens_used(&self) -> u64 {
        self.tokens_used.load(Ordering::SeqCst)
    }

    pub fn session(&self, call_budget: u32) -> Session<'_> {
        Session {
            gateway: self,
            call_budget,
            transcript: Vec::new(),
        }
    }

    fn check_budget(&self) -> Result<(), LlmError> {
        if let Some(budget) = self.config.token_budget {
            let used = self.tokens_used();
            if used >= budget {
                return Err(LlmError::BudgetExceeded { used, budget });
            }
        }
        Ok(())
    }

    fn pace(&self) {
        if self.config.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_call.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let ready = t + self.config.min_interval;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }

    /// Runs `call` with pacing and retries. Returns the result and the retry count.
    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> (Result<T, LlmError>, u32) {
        let mut retries = 0;
        loop {
            self.pace();
            match call() {
                Ok(v) => return (Ok(v), retries),
                Err(BackendError::Fatal(m)) => return (Err(LlmError::Fatal(m)), retries),
                Err(BackendError::Transient(m)) => {
                    if retries >= self.config.retry.max_retries {
                        return (
                            Err(LlmError::BackendUnavailable { retries, last: m }),
                            retries,
                        );
                    }
                    tracing::debug!(attempt = retries, "transient backend error: {m}");
                    std::thread::sleep(self.config.retry.delay(retries));
                    retries += 1;
                }
            }
        }
    }

    fn log_entry(&self, entry: &TranscriptEntry) {
        if let Some(log) = &self.log {
            let mut f = log.lock().unwrap_or_else(|e| e.into_inner());
            if let Ok(line) = serde_json::to_string(entry) {
                let _ = writeln!(f, "{line}");
            }
        }
    }
}

/// Per-episode view of the gateway: counts calls against the episode budget
/// and records the transcript.
pub struct Session<'g> {
    gateway: &'g Gateway,
    call_budget: u32,
    transcript: Vec<TranscriptEntry>,
}

impl Session<'_> {
    pub fn calls(&self) -> u32 {
        self.transcript.len() as u32
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<TranscriptEntry> {
        self.transcript
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.gateway.backend.as_ref()
    }

    fn admit(&self, request: &ChatRequest) -> Result<(), LlmError> {
        request.validate()?;
        if self.calls() >= self.call_budget {
            return Err(LlmError::CallBudgetExceeded(self.call_budget));
        }
        self.gateway.check_budget()
    }

    fn record(&mut self, role: &str, request: &ChatRequest, response: Option<String>, error: Option<String>, retries: u32) {
        let entry = TranscriptEntry {
            call_index: self.calls(),
            role: role.to_string(),
            request: request.clone(),
            response,
            error,
            retries,
        };
        self.gateway.log_entry(&entry);
        self.transcript.push(entry);
    }

    pub fn complete(&mut self, role: &str, request: &ChatRequest) -> Result<String, LlmError> {
        self.admit(request)?;
        let backend = self.gateway.backend.clone();
        let (res, retries) = self.gateway.with_retries(|| backend.complete(role, request));
        match res {
            Ok(c) => {
                let tokens = c.tokens.unwrap_or_else(|| request.estimated_tokens() + c.text.len() as u64 / 4);
                self.gateway.tokens_used.fetch_add(tokens, Ordering::SeqCst);
                self.record(role, request, Some(c.text.clone()), None, retries);
                Ok(c.text)
            }
            Err(e) => {
                self.record(role, request, None, Some(e.to_string()), retries);
                Err(e)
            }
        }
    }

    /// Log-probability likelihoods, or `Ok(None)` when the backend has none.
    pub fn candidate_likelihoods(
        &mut self,
        role: &str,
        request: &ChatRequest,
        candidates: &[String],
    ) -> Result<Option<Vec<f64>>, LlmError> {
        self.admit(request)?;
        let backend = self.gateway.backend.clone();
        if !backend.supports_likelihoods() {
            return Ok(None);
        }
        let (res, retries) = self
            .gateway
            .with_retries(|| backend.candidate_likelihoods(request, candidates));
        match res {
            Ok(v) => {
                self.gateway
                    .tokens_used
                    .fetch_add(request.estimated_tokens(), Ordering::SeqCst);
                let shown = serde_json::to_string(&v).unwrap_or_default();
                self.record(role, request, Some(shown), None, retries);
                Ok(Some(v))
            }
            Err(e) => {
                self.record(role, request, None, Some(e.to_string()), retries);
                Err(e)
            }
        }
    }
}

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::{BackendError, ChatBackend, ChatRequest, Completion};

/// One scripted backend outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Text(String),
    Transient(String),
    Fatal(String),
}

impl From<&str> for Reply {
    fn from(s: &str) -> Self {
        Reply::Text(s.to_string())
    }
}

type Responder = Box<dyn Fn(&str, &ChatRequest) -> Reply + Send + Sync>;
type Likelihoods = Box<dyn Fn(&ChatRequest, &[String]) -> Vec<f64> + Send + Sync>;

/// Offline backend. Replies come from a queue, or from a responder function
/// once the queue is empty.
pub struct MockBackend {
    queue: Mutex<VecDeque<Reply>>,
    responder: Option<Responder>,
    likelihoods: Option<Likelihoods>,
    calls: AtomicU64,
}

impl MockBackend {
    pub fn from_replies(replies: impl IntoIterator<Item = Reply>) -> Self {
        MockBackend {
            queue: Mutex::new(replies.into_iter().collect()),
            responder: None,
            likelihoods: None,
            calls: AtomicU64::new(0),
        }
    }

    pub fn scripted<S: AsRef<str>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::from_replies(texts.into_iter().map(|t| Reply::Text(t.as_ref().to_string())))
    }

    pub fn repeating(text: &str) -> Self {
        let text = text.to_string();
        Self::responder(move |_, _| Reply::Text(text.clone()))
    }

    pub fn responder(f: impl Fn(&str, &ChatRequest) -> Reply + Send + Sync + 'static) -> Self {
        MockBackend {
            responder: Some(Box::new(f)),
            ..Self::from_replies([])
        }
    }

    /// Expose log-probability style likelihoods.
    pub fn with_likelihoods(
        mut self,
        f: impl Fn(&ChatRequest, &[String]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.likelihoods = Some(Box::new(f));
        self
    }

    /// Number of backend invocations so far, including failed ones.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, role: &str, request: &ChatRequest) -> Result<Completion, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self.queue.lock().unwrap_or_else(|e| e.into_inner()).pop_front();
        let reply = match (next, &self.responder) {
            (Some(r), _) => r,
            (None, Some(f)) => f(role, request),
            (None, None) => Reply::Fatal("mock script exhausted".into()),
        };
        match reply {
            Reply::Text(text) => Ok(Completion { text, tokens: None }),
            Reply::Transient(m) => Err(BackendError::Transient(m)),
            Reply::Fatal(m) => Err(BackendError::Fatal(m)),
        }
    }

    fn supports_likelihoods(&self) -> bool {
        self.likelihoods.is_some()
    }

    fn candidate_likelihoods(
        &self,
        request: &ChatRequest,
        candidates: &[String],
    ) -> Result<Vec<f64>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.likelihoods {
            Some(f) => Ok(f(request, candidates)),
            None => Err(BackendError::Fatal("mock has no likelihoods".into())),
        }
    }
}

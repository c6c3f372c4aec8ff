use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, ChatBackend, ChatRequest, Completion};

pub const BASE_URL_ENV: &str = "TAMPFORGE_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "TAMPFORGE_LLM_API_KEY";
pub const MODEL_ENV: &str = "TAMPFORGE_LLM_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Endpoint root, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    /// Reads base URL and API key from the environment.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var(BASE_URL_ENV).ok()?;
        Some(HttpConfig {
            base_url,
            api_key: std::env::var(API_KEY_ENV).ok(),
            timeout: Duration::from_secs(300),
        })
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

fn body_of(req: &ChatRequest) -> Value {
    json!({
        "model": req.model_id,
        "messages": req.messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

fn completion_of(v: &Value) -> Result<Completion, BackendError> {
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Fatal("response has no choices[0].message.content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        tokens: v.pointer("/usage/total_tokens").and_then(Value::as_u64),
    })
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, _role: &str, request: &ChatRequest) -> Result<Completion, BackendError> {
        let mut call = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(body_of(request))
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        match status {
            200..=299 => {
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| BackendError::Fatal(format!("bad JSON from backend: {e}")))?;
                completion_of(&v)
            }
            429 | 500..=599 => Err(BackendError::Transient(format!("HTTP {status}"))),
            _ => Err(BackendError::Fatal(format!("HTTP {status}: {}", text.chars().take(300).collect::<String>()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, Gateway, GatewayConfig, RetryPolicy};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Serves the given (status, body) pairs, one per connection.
    fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut sock, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(sock.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                sock.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v1")
    }

    fn req() -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::user("hi")],
            temperature: 0.0,
            max_tokens: 8,
            model_id: "m".into(),
        }
    }

    #[test]
    fn transient_5xx_then_success() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}],"usage":{"total_tokens":7}}"#;
        let base = serve(vec![(503, "{}".into()), (200, ok.into())]);
        let backend = HttpBackend::new(HttpConfig {
            base_url: base,
            api_key: Some("k".into()),
            timeout: Duration::from_secs(10),
        });
        let gw = Gateway::new(
            Arc::new(backend),
            GatewayConfig {
                retry: RetryPolicy::no_delay(),
                ..GatewayConfig::default()
            },
        );
        let mut s = gw.session(5);
        assert_eq!(s.complete("task", &req()).unwrap(), "hello");
        assert_eq!(s.transcript()[0].retries, 1);
        assert_eq!(gw.tokens_used(), 7);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let base = serve(vec![(401, r#"{"error":"no"}"#.into())]);
        let backend = HttpBackend::new(HttpConfig {
            base_url: base,
            api_key: None,
            timeout: Duration::from_secs(10),
        });
        let err = backend.complete("task", &req()).unwrap_err();
        assert!(matches!(err, BackendError::Fatal(m) if m.starts_with("HTTP 401")));
    }

    #[test]
    fn request_body_shape() {
        let v = body_of(&req());
        assert_eq!(v["messages"][0]["role"], "user");
        assert_eq!(v["model"], "m");
    }
}

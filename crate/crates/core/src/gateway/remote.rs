use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{BackendKind, BackendReply, CompletionRequest, GatewayError, RateLimiter, TextBackend};

/// Request/response shape of the remote endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointStyle {
    /// `messages: [{role, content}]`, answer in `choices[0].message.content`.
    Chat,
    /// `prompt: ...`, answer in `choices[0].text`.
    Completion,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // 3 attempts, exponential backoff starting at 1s; retries fire only on
        // transport errors and HTTP 429/5xx.
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub path: String,
    pub style: EndpointStyle,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub auth_header: String,
    pub auth_prefix: String,
    pub retry: RetryPolicy,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "https://api.openai.com".to_string(),
            path: "/v1/chat/completions".to_string(),
            style: EndpointStyle::Chat,
            api_key_env: "OPENAI_API_KEY".to_string(),
            auth_header: "Authorization".to_string(),
            auth_prefix: "Bearer ".to_string(),
            retry: RetryPolicy::default(),
        }
    }
}

/// HTTP+JSON backend for any chat/completions-style vendor endpoint.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::Client,
    api_key: Option<String>,
    limiter: Option<Arc<RateLimiter>>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, limiter: Option<Arc<RateLimiter>>) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok();
        RemoteBackend {
            config,
            client: reqwest::Client::new(),
            api_key,
            limiter,
        }
    }

    fn url(&self) -> String {
        format!(
            "{}{}",
            self.config.base_url.trim_end_matches('/'),
            self.config.path
        )
    }

    fn body(&self, req: &CompletionRequest) -> Value {
        let mut body = match self.config.style {
            EndpointStyle::Chat => json!({
                "model": req.model_id,
                "messages": [{"role": "user", "content": req.prompt}],
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            }),
            EndpointStyle::Completion => json!({
                "model": req.model_id,
                "prompt": req.prompt,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            }),
        };
        if !req.stop_sequences.is_empty() {
            body["stop"] = json!(req.stop_sequences);
        }
        body
    }

    fn extract_text(&self, value: &Value) -> Option<String> {
        let choice = value.get("choices")?.get(0)?;
        let text = match self.config.style {
            EndpointStyle::Chat => choice.get("message")?.get("content")?.as_str()?,
            EndpointStyle::Completion => choice.get("text")?.as_str()?,
        };
        Some(text.to_string())
    }

    async fn attempt(&self, req: &CompletionRequest) -> Result<BackendReply, AttemptError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        let mut request = self.client.post(self.url()).json(&self.body(req));
        if let Some(key) = &self.api_key {
            request = request.header(
                self.config.auth_header.as_str(),
                format!("{}{}", self.config.auth_prefix, key),
            );
        }
        let response = request.send().await.map_err(|e| AttemptError {
            detail: format!("transport: {e}"),
            retryable: true,
        })?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let body = response.text().await.unwrap_or_default();
            return Err(AttemptError {
                detail: format!("http {status}: {}", truncate(&body, 200)),
                retryable,
            });
        }
        let value: Value = response.json().await.map_err(|e| AttemptError {
            detail: format!("invalid json response: {e}"),
            retryable: false,
        })?;
        let text = self.extract_text(&value).ok_or_else(|| AttemptError {
            detail: "response missing completion text".to_string(),
            retryable: false,
        })?;
        let usage = value.get("usage");
        let tokens = |field: &str| {
            usage
                .and_then(|u| u.get(field))
                .and_then(Value::as_u64)
                .unwrap_or(0)
        };
        Ok(BackendReply {
            text,
            prompt_tokens: tokens("prompt_tokens"),
            completion_tokens: tokens("completion_tokens"),
            backend: BackendKind::Remote,
        })
    }
}

struct AttemptError {
    detail: String,
    retryable: bool,
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

#[async_trait]
impl TextBackend for RemoteBackend {
    async fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        if self.api_key.is_none() && !self.config.api_key_env.is_empty() {
            return Err(GatewayError::MissingApiKey(self.config.api_key_env.clone()));
        }
        let mut last_detail = String::new();
        for attempt in 0..self.config.retry.attempts {
            if attempt > 0 {
                let delay = self.config.retry.base_delay * 2u32.pow(attempt - 1);
                tokio::time::sleep(delay).await;
            }
            match self.attempt(req).await {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    last_detail = e.detail;
                    if !e.retryable {
                        return Err(GatewayError::BackendUnavailable {
                            attempts: attempt + 1,
                            detail: last_detail,
                        });
                    }
                    tracing::warn!(attempt = attempt + 1, detail = %last_detail, "remote completion failed");
                }
            }
        }
        Err(GatewayError::BackendUnavailable {
            attempts: self.config.retry.attempts,
            detail: last_detail,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal canned HTTP/1.1 responder: serves each response body once, in
    /// order, then closes. Good enough to exercise retry behavior offline.
    fn spawn_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let reason = if status == 200 { "OK" } else { "ERR" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), handle)
    }

    fn config(base_url: &str) -> RemoteConfig {
        RemoteConfig {
            base_url: base_url.to_string(),
            path: "/v1/chat/completions".to_string(),
            api_key_env: String::new(), // no auth for the local test server
            retry: RetryPolicy {
                attempts: 3,
                base_delay: Duration::from_millis(10),
            },
            ..RemoteConfig::default()
        }
    }

    fn chat_body(content: &str) -> String {
        serde_json::to_string(&json!({
            "choices": [{"message": {"content": content}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3},
        }))
        .unwrap()
    }

    #[tokio::test]
    async fn retries_on_server_error_then_succeeds() {
        let (url, handle) = spawn_server(vec![
            (500, "{}".to_string()),
            (429, "{}".to_string()),
            (200, chat_body("hello")),
        ]);
        let backend = RemoteBackend::new(config(&url), None);
        let reply = backend
            .complete(&CompletionRequest::new("p", "m"))
            .await
            .unwrap();
        assert_eq!(reply.text, "hello");
        assert_eq!(reply.prompt_tokens, 12);
        handle.join().unwrap();
    }

    #[tokio::test]
    async fn gives_up_after_bounded_retries() {
        let (url, handle) = spawn_server(vec![
            (500, "{}".to_string()),
            (500, "{}".to_string()),
            (500, "{}".to_string()),
        ]);
        let backend = RemoteBackend::new(config(&url), None);
        let err = backend
            .complete(&CompletionRequest::new("p", "m"))
            .await
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::BackendUnavailable { attempts: 3, .. }
        ));
        handle.join().unwrap();
    }

    #[tokio::test]
    async fn client_errors_do_not_retry() {
        let (url, handle) = spawn_server(vec![(400, "{\"error\":\"bad\"}".to_string())]);
        let backend = RemoteBackend::new(config(&url), None);
        let err = backend
            .complete(&CompletionRequest::new("p", "m"))
            .await
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::BackendUnavailable { attempts: 1, .. }
        ));
        handle.join().unwrap();
    }
}

//! Uniform text-completion interface over interchangeable backends (remote
//! HTTP endpoint, scripted replay, persistent cache) with rate limiting and a
//! per-question call ledger.

mod cache;
mod ledger;
mod limiter;
mod remote;
mod scripted;

pub use cache::{cache_stats, CacheBackend};
pub use ledger::{CallLedger, LedgerSnapshot};
pub use limiter::RateLimiter;
pub use remote::{EndpointStyle, RemoteBackend, RemoteConfig, RetryPolicy};
pub use scripted::{ScriptFile, ScriptedBackend};

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default completion budget for agent steps.
pub const DEFAULT_AGENT_MAX_TOKENS: u32 = 512;
/// Default completion budget for judge calls (longer rationales).
pub const DEFAULT_JUDGE_MAX_TOKENS: u32 = 1024;

/// One completion request. `route` identifies the logical caller
/// (`<task_id>/<role>`) so the scripted backend can hand out queued responses
/// deterministically under concurrency; `sample_index` distinguishes
/// self-consistency samples that share a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub sample_index: u32,
    pub model_id: String,
    pub route: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, model_id: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_AGENT_MAX_TOKENS,
            stop_sequences: Vec::new(),
            sample_index: 0,
            model_id: model_id.into(),
            route: String::new(),
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn with_stop(mut self, stops: &[&str]) -> Self {
        self.stop_sequences = stops.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_sample_index(mut self, i: u32) -> Self {
        self.sample_index = i;
        self
    }

    pub fn with_route(mut self, route: impl Into<String>) -> Self {
        self.route = route.into();
        self
    }

    /// Content digest used as the persistent-cache key.
    pub fn cache_key(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.model_id.as_bytes());
        hasher.update([0]);
        hasher.update(self.prompt.as_bytes());
        hasher.update([0]);
        hasher.update(format!("{}", self.temperature).as_bytes());
        hasher.update([0]);
        hasher.update(self.sample_index.to_le_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Where a completion came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Scripted,
    CacheHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(skip, default)]
    pub latency: Duration,
    pub backend: BackendKind,
}

/// Raw backend reply before the gateway attaches timing and accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendReply {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub backend: BackendKind,
}

#[async_trait]
pub trait TextBackend: Send + Sync {
    async fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, GatewayError>;
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {detail}")]
    BackendUnavailable { attempts: u32, detail: String },
    #[error("scripted backend has no queued response for route {route:?} (step {step})")]
    ScriptExhausted { route: String, step: u64 },
    #[error("cache io error at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache entry at {path} is corrupt: {detail}")]
    CacheCorrupt { path: String, detail: String },
    #[error("missing api key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("empty input")]
    EmptyInput,
}

/// Whether persistent-cache hits count as LLM calls in the ledger.
///
/// `Replay` treats hits as free (re-running an experiment from cache reports
/// the original call pattern only for fresh calls); `Accounting` counts hits
/// so replayed runs report the same per-question call totals as the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    Replay,
    Accounting,
}

/// Shared entry point for completions. Cheap to clone; clones share the
/// backend but a fresh ledger can be attached per question.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn TextBackend>,
    ledger: Arc<CallLedger>,
    cache_mode: CacheMode,
}

impl Gateway {
    pub fn new(backend: Arc<dyn TextBackend>) -> Self {
        Gateway {
            backend,
            ledger: Arc::new(CallLedger::default()),
            cache_mode: CacheMode::Replay,
        }
    }

    pub fn with_cache_mode(mut self, mode: CacheMode) -> Self {
        self.cache_mode = mode;
        self
    }

    /// Same backend, fresh per-question ledger.
    pub fn fresh_ledger(&self) -> Self {
        Gateway {
            backend: Arc::clone(&self.backend),
            ledger: Arc::new(CallLedger::default()),
            cache_mode: self.cache_mode,
        }
    }

    pub fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    pub async fn complete(&self, req: CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let started = Instant::now();
        let reply = self.backend.complete(&req).await?;
        let latency = started.elapsed();
        self.ledger.record(reply.backend, self.cache_mode);
        Ok(CompletionResult {
            text: reply.text,
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
            latency,
            backend: reply.backend,
        })
    }
}

/// Arithmetic means over per-question ledgers: (mean LLM calls, mean wall time).
pub fn ledger_summary(snapshots: &[LedgerSnapshot]) -> Result<(f64, Duration), GatewayError> {
    if snapshots.is_empty() {
        return Err(GatewayError::EmptyInput);
    }
    let n = snapshots.len() as f64;
    let calls: u64 = snapshots.iter().map(|s| s.llm_calls).sum();
    let nanos: u128 = snapshots.iter().map(|s| s.wall_time.as_nanos()).sum();
    let mean_time = Duration::from_nanos((nanos as f64 / n) as u64);
    Ok((calls as f64 / n, mean_time))
}

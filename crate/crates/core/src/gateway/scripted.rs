use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendKind, BackendReply, CompletionRequest, GatewayError, TextBackend};

/// Replay backend. Responses are queued per route (`<task_id>/<role>`), so an
/// entire run is a pure function of the script no matter how concurrent
/// executions interleave. A route with no queue falls back to the shared
/// default queue, which is only deterministic for sequential callers.
#[derive(Default)]
pub struct ScriptedBackend {
    queues: Mutex<HashMap<String, VecDeque<String>>>,
    default: Mutex<VecDeque<String>>,
    served: Mutex<HashMap<String, u64>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&self, route: impl Into<String>, text: impl Into<String>) {
        self.queues
            .lock()
            .unwrap()
            .entry(route.into())
            .or_default()
            .push_back(text.into());
    }

    pub fn enqueue_default(&self, text: impl Into<String>) {
        self.default.lock().unwrap().push_back(text.into());
    }

    pub fn from_script(script: &ScriptFile) -> Self {
        let backend = Self::new();
        for (route, texts) in &script.routes {
            for text in texts {
                backend.enqueue(route.clone(), text.clone());
            }
        }
        for text in &script.default {
            backend.enqueue_default(text.clone());
        }
        backend
    }

    fn next_for(&self, route: &str) -> Option<String> {
        if let Some(queue) = self.queues.lock().unwrap().get_mut(route) {
            if let Some(text) = queue.pop_front() {
                return Some(text);
            }
            // An explicitly scripted route never spills into the default
            // queue; running dry is a script bug worth surfacing.
            return None;
        }
        self.default.lock().unwrap().pop_front()
    }
}

#[async_trait]
impl TextBackend for ScriptedBackend {
    async fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        let step = {
            let mut served = self.served.lock().unwrap();
            let counter = served.entry(req.route.clone()).or_insert(0);
            *counter += 1;
            *counter
        };
        let text = self
            .next_for(&req.route)
            .ok_or_else(|| GatewayError::ScriptExhausted {
                route: req.route.clone(),
                step,
            })?;
        Ok(BackendReply {
            prompt_tokens: req.prompt.split_whitespace().count() as u64,
            completion_tokens: text.split_whitespace().count() as u64,
            text,
            backend: BackendKind::Scripted,
        })
    }
}

/// On-disk script: route → ordered completions, plus an optional default
/// queue for ad-hoc experiments.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub routes: std::collections::BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub default: Vec<String>,
}

impl ScriptFile {
    pub fn push(&mut self, route: impl Into<String>, text: impl Into<String>) {
        self.routes
            .entry(route.into())
            .or_default()
            .push(text.into());
    }
}

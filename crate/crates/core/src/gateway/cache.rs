use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendKind, BackendReply, CompletionRequest, GatewayError, TextBackend};

/// Persistent completion cache wrapping another backend. Entries live in a
/// content-addressed directory of JSON files keyed on
/// digest(model_id, prompt, temperature, sample_index); a hit returns the
/// stored text byte-for-byte with `backend = CacheHit`.
pub struct CacheBackend {
    dir: PathBuf,
    inner: Arc<dyn TextBackend>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model_id: String,
    temperature: f64,
    sample_index: u32,
    prompt: String,
    text: String,
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl CacheBackend {
    pub fn new(dir: impl Into<PathBuf>, inner: Arc<dyn TextBackend>) -> Self {
        CacheBackend {
            dir: dir.into(),
            inner,
        }
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn load(&self, path: &Path) -> Result<Option<CacheEntry>, GatewayError> {
        let bytes = match std::fs::read(path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(GatewayError::CacheIo {
                    path: path.display().to_string(),
                    source: e,
                })
            }
        };
        let entry = serde_json::from_slice(&bytes).map_err(|e| GatewayError::CacheCorrupt {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Ok(Some(entry))
    }

    fn store(&self, path: &Path, entry: &CacheEntry) -> Result<(), GatewayError> {
        let io_err = |e: std::io::Error| GatewayError::CacheIo {
            path: path.display().to_string(),
            source: e,
        };
        let parent = path.parent().expect("cache entry path has a parent");
        std::fs::create_dir_all(parent).map_err(io_err)?;
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        // Write-then-rename so a crash never leaves a half-written entry.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, body).map_err(io_err)?;
        std::fs::rename(&tmp, path).map_err(io_err)?;
        Ok(())
    }
}

#[async_trait]
impl TextBackend for CacheBackend {
    async fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        let key = req.cache_key();
        let path = self.entry_path(&key);
        if let Some(entry) = self.load(&path)? {
            return Ok(BackendReply {
                text: entry.text,
                prompt_tokens: entry.prompt_tokens,
                completion_tokens: entry.completion_tokens,
                backend: BackendKind::CacheHit,
            });
        }
        let reply = self.inner.complete(req).await?;
        self.store(
            &path,
            &CacheEntry {
                model_id: req.model_id.clone(),
                temperature: req.temperature,
                sample_index: req.sample_index,
                prompt: req.prompt.clone(),
                text: reply.text.clone(),
                prompt_tokens: reply.prompt_tokens,
                completion_tokens: reply.completion_tokens,
            },
        )?;
        Ok(reply)
    }
}

/// Counts entries and total bytes under a cache directory.
pub fn cache_stats(dir: &Path) -> std::io::Result<(u64, u64)> {
    let mut entries = 0;
    let mut bytes = 0;
    if !dir.exists() {
        return Ok((0, 0));
    }
    for shard in std::fs::read_dir(dir)? {
        let shard = shard?;
        if !shard.file_type()?.is_dir() {
            continue;
        }
        for file in std::fs::read_dir(shard.path())? {
            let file = file?;
            if file.path().extension().is_some_and(|e| e == "json") {
                entries += 1;
                bytes += file.metadata()?.len();
            }
        }
    }
    Ok((entries, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;

    fn req(route: &str, prompt: &str) -> CompletionRequest {
        CompletionRequest::new(prompt, "m").with_route(route)
    }

    #[tokio::test]
    async fn second_identical_request_hits_cache_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let scripted = ScriptedBackend::new();
        scripted.enqueue("t/a", "the exact completion\nwith two lines");
        let cache = CacheBackend::new(dir.path(), Arc::new(scripted));

        let first = cache.complete(&req("t/a", "p")).await.unwrap();
        assert_eq!(first.backend, BackendKind::Scripted);
        let second = cache.complete(&req("t/a", "p")).await.unwrap();
        assert_eq!(second.backend, BackendKind::CacheHit);
        assert_eq!(second.text, first.text);
    }

    #[tokio::test]
    async fn cache_persists_across_instances() {
        let dir = tempfile::tempdir().unwrap();
        {
            let scripted = ScriptedBackend::new();
            scripted.enqueue("t/a", "stored once");
            let cache = CacheBackend::new(dir.path(), Arc::new(scripted));
            cache.complete(&req("t/a", "p")).await.unwrap();
        }
        // Fresh wrapper over an empty scripted backend: only the cache can answer.
        let cache = CacheBackend::new(dir.path(), Arc::new(ScriptedBackend::new()));
        let hit = cache.complete(&req("t/a", "p")).await.unwrap();
        assert_eq!(hit.backend, BackendKind::CacheHit);
        assert_eq!(hit.text, "stored once");
    }

    #[tokio::test]
    async fn different_prompts_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let scripted = ScriptedBackend::new();
        scripted.enqueue_default("answer one");
        scripted.enqueue_default("answer two");
        let cache = CacheBackend::new(dir.path(), Arc::new(scripted));
        let a = cache.complete(&req("x", "prompt one")).await.unwrap();
        let b = cache.complete(&req("x", "prompt two")).await.unwrap();
        assert_eq!(a.text, "answer one");
        assert_eq!(b.text, "answer two");
        let (entries, _) = cache_stats(dir.path()).unwrap();
        assert_eq!(entries, 2);
    }
}

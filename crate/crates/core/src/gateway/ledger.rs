use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendKind, CacheMode};

/// Per-question call accounting. Increments are atomic so concurrent agent
/// executions lose no counts.
#[derive(Debug, Default)]
pub struct CallLedger {
    llm_calls: AtomicU64,
    remote_calls: AtomicU64,
    scripted_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl CallLedger {
    pub fn record(&self, backend: BackendKind, mode: CacheMode) {
        match backend {
            BackendKind::Remote => {
                self.remote_calls.fetch_add(1, Ordering::Relaxed);
                self.llm_calls.fetch_add(1, Ordering::Relaxed);
            }
            BackendKind::Scripted => {
                self.scripted_calls.fetch_add(1, Ordering::Relaxed);
                self.llm_calls.fetch_add(1, Ordering::Relaxed);
            }
            BackendKind::CacheHit => {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                if mode == CacheMode::Accounting {
                    self.llm_calls.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm_calls.load(Ordering::Relaxed)
    }

    /// Point-in-time copy with zero wall time; callers stamp elapsed time.
    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            llm_calls: self.llm_calls.load(Ordering::Relaxed),
            remote_calls: self.remote_calls.load(Ordering::Relaxed),
            scripted_calls: self.scripted_calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            wall_time: Duration::ZERO,
        }
    }

    pub fn snapshot_with_elapsed(&self, elapsed: Duration) -> LedgerSnapshot {
        let mut snap = self.snapshot();
        snap.wall_time = elapsed;
        snap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub llm_calls: u64,
    pub remote_calls: u64,
    pub scripted_calls: u64,
    pub cache_hits: u64,
    #[serde(skip, default)]
    pub wall_time: Duration,
}

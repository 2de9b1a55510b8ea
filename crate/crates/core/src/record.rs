//! The per-question run artifact: everything needed to re-score and analyze a
//! run without re-executing it. One record per line in the run log; field
//! names here are the on-disk schema.

use serde::{Deserialize, Serialize};

use crate::gateway::LedgerSnapshot;
use crate::judge::{DebateTranscript, Verdict};
use crate::model::{CandidateAnswer, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub dataset: Dataset,
    pub strategy: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub final_answer: String,
    pub candidates: Vec<CandidateAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_taken: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debate: Option<DebateTranscript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_failures: Vec<String>,
    pub metrics: MetricsRecord,
    pub ledger: LedgerRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub em: u8,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub llm_calls: u64,
    pub remote_calls: u64,
    pub scripted_calls: u64,
    pub cache_hits: u64,
    /// Wall time for the question. Volatile across reruns; excluded from
    /// determinism comparisons.
    pub elapsed_ms: u64,
}

impl LedgerRecord {
    pub fn from_snapshot(snapshot: &LedgerSnapshot) -> Self {
        LedgerRecord {
            llm_calls: snapshot.llm_calls,
            remote_calls: snapshot.remote_calls,
            scripted_calls: snapshot.scripted_calls,
            cache_hits: snapshot.cache_hits,
            elapsed_ms: snapshot.wall_time.as_millis() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_through_json() {
        let record = RunRecord {
            task_id: "q1".to_string(),
            dataset: Dataset::HotpotQa,
            strategy: "rc".to_string(),
            question: "Who?".to_string(),
            gold_answers: vec!["x".to_string()],
            final_answer: "x".to_string(),
            candidates: vec![],
            verdict: None,
            fallback_taken: None,
            debate: None,
            vote_frequency: None,
            refine_converged: None,
            agent_failures: vec![],
            metrics: MetricsRecord { em: 1, f1: 1.0 },
            ledger: LedgerRecord {
                llm_calls: 5,
                remote_calls: 0,
                scripted_calls: 5,
                cache_hits: 0,
                elapsed_ms: 12,
            },
            error: None,
        };
        let line = serde_json::to_string(&record).unwrap();
        let parsed: RunRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed, record);
    }
}

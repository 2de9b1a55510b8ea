//! Scoring and analysis: answer normalization, EM/F1, seeded sampling,
//! judge-scenario bucketing, and aggregation of run records.

pub mod datasets;

pub use datasets::{load_dataset, DatasetItem};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::RunRecord;

/// Identifier of the normalization recipe, recorded in run manifests so
/// reported numbers are reproducible.
pub const NORMALIZATION_ID: &str = "lowercase/strip-punctuation/drop-articles/split-whitespace";
/// Identifier of the sampler, recorded in run manifests.
pub const SAMPLER_ID: &str = "fisher-yates/splitmix64";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("requested {requested} items but only {available} are available")]
    InsufficientItems { requested: usize, available: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}

/// The community-standard QA normalization: lowercase, strip punctuation,
/// drop the articles a/an/the, collapse whitespace, split into tokens.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                '\0'
            }
        })
        .filter(|&c| c != '\0')
        .collect();
    stripped
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

/// Normalized tokens joined with single spaces; the equality key for EM and
/// vote pooling.
pub fn normalized_key(text: &str) -> String {
    normalize_answer(text).join(" ")
}

/// 1 iff the normalized prediction equals any normalized gold answer.
pub fn exact_match(pred: &str, golds: &[String]) -> u8 {
    let key = normalized_key(pred);
    u8::from(golds.iter().any(|g| normalized_key(g) == key))
}

/// Max over golds of token-multiset F1. Empty-side convention: 0 unless both
/// sides are empty, then 1.
pub fn f1(pred: &str, golds: &[String]) -> f64 {
    let pred_tokens = normalize_answer(pred);
    golds
        .iter()
        .map(|g| pair_f1(&pred_tokens, &normalize_answer(g)))
        .fold(0.0, f64::max)
}

fn pair_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut gold_counts = std::collections::HashMap::new();
    for token in gold {
        *gold_counts.entry(token.as_str()).or_insert(0usize) += 1;
    }
    let mut overlap = 0usize;
    for token in pred {
        if let Some(count) = gold_counts.get_mut(token.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
}

/// Deterministic evaluation subset: seeded Fisher–Yates shuffle (splitmix64),
/// then the first `n` items. The same (items, n, seed) always yields the same
/// list, on every platform.
pub fn sample_eval_set<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>, EvalError> {
    if n > items.len() {
        return Err(EvalError::InsufficientItems {
            requested: n,
            available: items.len(),
        });
    }
    let mut shuffled: Vec<T> = items.to_vec();
    let mut rng = SplitMix64(seed);
    for i in (1..shuffled.len()).rev() {
        let j = (rng.next() % (i as u64 + 1)) as usize;
        shuffled.swap(i, j);
    }
    shuffled.truncate(n);
    Ok(shuffled)
}

/// Outcome classes for the judged subset, after marking each candidate
/// correct/incorrect by EM against gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioBucket {
    OneCorrectOneIncorrect,
    DifferentIncorrectOrBothEmpty,
    SameNonEmptyIncorrect,
    BothCorrect,
}

impl ScenarioBucket {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioBucket::OneCorrectOneIncorrect => "One correct, one incorrect",
            ScenarioBucket::DifferentIncorrectOrBothEmpty => {
                "Different incorrect answer or both empty"
            }
            ScenarioBucket::SameNonEmptyIncorrect => "Same non-empty incorrect answer",
            ScenarioBucket::BothCorrect => "Both correct",
        }
    }

    pub const ALL: [ScenarioBucket; 4] = [
        ScenarioBucket::OneCorrectOneIncorrect,
        ScenarioBucket::DifferentIncorrectOrBothEmpty,
        ScenarioBucket::SameNonEmptyIncorrect,
        ScenarioBucket::BothCorrect,
    ];
}

/// Buckets one two-candidate case. Total and mutually exclusive. Answer
/// equality here is the scoring normalization: the judged subset already
/// excludes answers identical as written, so the same-incorrect bucket
/// catches pairs that differ in surface form but normalize equal.
pub fn bucket_judge_case(c1_correct: bool, c2_correct: bool, a1: &str, a2: &str) -> ScenarioBucket {
    match (c1_correct, c2_correct) {
        (true, true) => ScenarioBucket::BothCorrect,
        (true, false) | (false, true) => ScenarioBucket::OneCorrectOneIncorrect,
        (false, false) => {
            let a1 = a1.trim();
            let a2 = a2.trim();
            if !a1.is_empty() && !a2.is_empty() && normalized_key(a1) == normalized_key(a2) {
                ScenarioBucket::SameNonEmptyIncorrect
            } else {
                ScenarioBucket::DifferentIncorrectOrBothEmpty
            }
        }
    }
}

/// The judged subset: records whose candidate answers are non-identical or
/// where any answer is empty (identical non-empty answers bypass the judge).
pub fn judged_subset(records: &[RunRecord]) -> Vec<&RunRecord> {
    records.iter().filter(|r| is_judged_case(r)).collect()
}

fn is_judged_case(record: &RunRecord) -> bool {
    let answers: Vec<&str> = record
        .candidates
        .iter()
        .map(|c| c.answer.as_str())
        .collect();
    if answers.is_empty() {
        return false;
    }
    if answers.iter().any(|a| a.trim().is_empty()) {
        return true;
    }
    let first = answers[0];
    answers[1..]
        .iter()
        .any(|a| !crate::judge::answers_match(a, first))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n: usize,
    pub em_mean: f64,
    pub f1_mean: f64,
    pub mean_llm_calls: f64,
    pub mean_elapsed_ms: f64,
    pub judged: SubsetStats,
    pub buckets: Vec<BucketRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetStats {
    pub n: usize,
    pub em_mean: f64,
    pub f1_mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: ScenarioBucket,
    pub total: usize,
    pub correct: usize,
    pub accuracy_pct: f64,
}

/// Per-run aggregation: overall EM/F1 means, efficiency means, judged-subset
/// metrics, and per-bucket judge accuracy (fraction of the bucket where the
/// final answer scores EM 1). Bucketing covers two-candidate records only.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len();
    let em_mean = records.iter().map(|r| r.metrics.em as f64).sum::<f64>() / n as f64;
    let f1_mean = records.iter().map(|r| r.metrics.f1).sum::<f64>() / n as f64;
    let mean_llm_calls = records
        .iter()
        .map(|r| r.ledger.llm_calls as f64)
        .sum::<f64>()
        / n as f64;
    let mean_elapsed_ms = records
        .iter()
        .map(|r| r.ledger.elapsed_ms as f64)
        .sum::<f64>()
        / n as f64;

    let judged_records = judged_subset(records);
    let judged = if judged_records.is_empty() {
        SubsetStats {
            n: 0,
            em_mean: 0.0,
            f1_mean: 0.0,
        }
    } else {
        let jn = judged_records.len() as f64;
        SubsetStats {
            n: judged_records.len(),
            em_mean: judged_records
                .iter()
                .map(|r| r.metrics.em as f64)
                .sum::<f64>()
                / jn,
            f1_mean: judged_records.iter().map(|r| r.metrics.f1).sum::<f64>() / jn,
        }
    };

    let mut totals: std::collections::HashMap<ScenarioBucket, (usize, usize)> =
        std::collections::HashMap::new();
    for record in &judged_records {
        if record.candidates.len() != 2 {
            continue;
        }
        let c1 = exact_match(&record.candidates[0].answer, &record.gold_answers) == 1;
        let c2 = exact_match(&record.candidates[1].answer, &record.gold_answers) == 1;
        let bucket = bucket_judge_case(
            c1,
            c2,
            &record.candidates[0].answer,
            &record.candidates[1].answer,
        );
        let entry = totals.entry(bucket).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += usize::from(record.metrics.em == 1);
    }
    let buckets = ScenarioBucket::ALL
        .iter()
        .filter_map(|bucket| {
            let (total, correct) = totals.get(bucket).copied()?;
            Some(BucketRow {
                bucket: *bucket,
                total,
                correct,
                accuracy_pct: 100.0 * correct as f64 / total as f64,
            })
        })
        .collect();

    Ok(AggregateReport {
        n,
        em_mean,
        f1_mean,
        mean_llm_calls,
        mean_elapsed_ms,
        judged,
        buckets,
    })
}

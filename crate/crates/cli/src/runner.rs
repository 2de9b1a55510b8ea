//! Run execution: seeded sampling, a manifest written before the first
//! question, parallel workers bounded by a semaphore, and a single ordered
//! appender that flushes one JSON record per question. Reruns skip completed
//! question ids, so an interrupted run resumes where it stopped.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use rcourt_core::env::{Corpus, LocalCorpus, WikiConfig, WikiCorpus};
use rcourt_core::evalkit::{
    exact_match, f1, load_dataset, sample_eval_set, DatasetItem, NORMALIZATION_ID, SAMPLER_ID,
};
use rcourt_core::gateway::{
    CacheBackend, Gateway, RateLimiter, RemoteBackend, RemoteConfig, RetryPolicy, ScriptFile,
    ScriptedBackend, TextBackend,
};
use rcourt_core::judge::JudgeConfig;
use rcourt_core::model::TaskSpec;
use rcourt_core::record::{LedgerRecord, MetricsRecord, RunRecord};
use rcourt_core::strategies::{run_strategy, Runtime, StrategyName, StrategyOutcome};

use crate::config::{config_digest, ResolvedConfig};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

/// Written to the run directory before the first question executes and never
/// touched again; every reported number traces back to this.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub code_version: String,
    pub created_at: String,
    pub sampler: String,
    pub normalization: String,
    pub dataset: String,
    pub strategy: String,
    pub seed: u64,
    pub n_questions: usize,
    #[serde(default)]
    pub first_n: Option<usize>,
    pub cache_mode: String,
    pub resolved_config: crate::config::RunConfig,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<RunManifest, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path)
            .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Runtime(format!("parsing {}: {e}", path.display())))
    }
}

/// Executes the configured strategy over the sampled evaluation set, one run
/// directory per seed. Returns the run directories.
pub async fn cmd_run(resolved: &ResolvedConfig) -> Result<Vec<PathBuf>, CliError> {
    let items = load_dataset(resolved.dataset, &resolved.raw.run.dataset_path)
        .map_err(|e| CliError::Validation(format!("loading dataset: {e}")))?;
    let multi_seed = resolved.seeds.len() > 1;
    let mut run_dirs = Vec::new();
    for &seed in &resolved.seeds {
        let dir = if multi_seed {
            resolved.raw.run.output_dir.join(format!("s{seed}"))
        } else {
            resolved.raw.run.output_dir.clone()
        };
        run_seed(resolved, &items, seed, &dir).await?;
        run_dirs.push(dir);
    }
    Ok(run_dirs)
}

async fn run_seed(
    resolved: &ResolvedConfig,
    items: &[DatasetItem],
    seed: u64,
    dir: &Path,
) -> Result<(), CliError> {
    let mut sampled = sample_eval_set(items, resolved.raw.run.n_questions, seed)
        .map_err(|e| CliError::Validation(format!("sampling: {e}")))?;
    if let Some(first_n) = resolved.raw.run.first_n {
        sampled.truncate(first_n);
    }

    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    prepare_manifest(resolved, seed, dir)?;

    let records_path = dir.join(RECORDS_FILE);
    let (completed, valid_len) = scan_record_log(&records_path)?;
    if records_path.exists() {
        let actual_len = std::fs::metadata(&records_path)
            .map_err(|e| CliError::Runtime(format!("stat {}: {e}", records_path.display())))?
            .len();
        if actual_len != valid_len {
            // A crash mid-write left a partial line; drop it so the append
            // below starts on a clean boundary. The question just reruns.
            let file = std::fs::OpenOptions::new()
                .write(true)
                .open(&records_path)
                .map_err(|e| {
                    CliError::Runtime(format!("opening {}: {e}", records_path.display()))
                })?;
            file.set_len(valid_len).map_err(|e| {
                CliError::Runtime(format!("truncating {}: {e}", records_path.display()))
            })?;
        }
    }
    let pending: Vec<TaskSpec> = sampled
        .iter()
        .filter(|item| !completed.contains(&item.id))
        .map(|item| item.to_task(resolved.dataset))
        .collect();
    tracing::info!(
        run_dir = %dir.display(),
        total = sampled.len(),
        done = completed.len(),
        pending = pending.len(),
        "starting run"
    );
    if pending.is_empty() {
        return Ok(());
    }

    let runtime = Arc::new(build_runtime(resolved)?);
    let strategy = resolved.strategy;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&records_path)
        .map_err(|e| CliError::Runtime(format!("opening {}: {e}", records_path.display())))?;

    let semaphore = Arc::new(Semaphore::new(resolved.raw.run.parallelism));
    let mut join_set = JoinSet::new();
    for (index, task) in pending.into_iter().enumerate() {
        let runtime = Arc::clone(&runtime);
        let semaphore = Arc::clone(&semaphore);
        join_set.spawn(async move {
            let _permit = semaphore.acquire_owned().await.expect("semaphore open");
            let record = execute_question(&runtime, strategy, task).await;
            (index, record)
        });
    }

    // Single ordered appender: workers finish out of order, records land in
    // task order, each flushed as soon as its turn comes.
    let mut next_to_write = 0usize;
    let mut buffer: BTreeMap<usize, RunRecord> = BTreeMap::new();
    while let Some(joined) = join_set.join_next().await {
        let (index, record) =
            joined.map_err(|e| CliError::Runtime(format!("worker panicked: {e}")))?;
        buffer.insert(index, record);
        while let Some(record) = buffer.remove(&next_to_write) {
            let line = serde_json::to_string(&record)
                .map_err(|e| CliError::Runtime(format!("serializing record: {e}")))?;
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| CliError::Runtime(format!("appending record: {e}")))?;
            next_to_write += 1;
        }
    }
    Ok(())
}

fn prepare_manifest(resolved: &ResolvedConfig, seed: u64, dir: &Path) -> Result<(), CliError> {
    let digest = config_digest(&resolved.raw);
    let path = dir.join(MANIFEST_FILE);
    if path.exists() {
        let existing = RunManifest::load(dir)?;
        if existing.config_digest != digest || existing.seed != seed {
            return Err(CliError::Validation(format!(
                "run directory {} was created by a different configuration; \
                 refusing to mix runs (digest {} vs {})",
                dir.display(),
                existing.config_digest,
                digest
            )));
        }
        return Ok(());
    }
    let manifest = RunManifest {
        config_digest: digest,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        created_at: chrono::Utc::now().to_rfc3339(),
        sampler: SAMPLER_ID.to_string(),
        normalization: NORMALIZATION_ID.to_string(),
        dataset: resolved.dataset.to_string(),
        strategy: resolved.strategy.as_str(),
        seed,
        n_questions: resolved.raw.run.n_questions,
        first_n: resolved.raw.run.first_n,
        cache_mode: format!("{:?}", resolved.cache_mode).to_lowercase(),
        resolved_config: resolved.raw.clone(),
    };
    let body = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
    std::fs::write(&path, body)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// Scans the record log, returning completed question ids and the byte
/// length of the valid newline-terminated prefix. A damaged final line (a
/// crash mid-write) is dropped with a warning so its question reruns; damage
/// anywhere else is an error.
fn scan_record_log(path: &Path) -> Result<(HashSet<String>, u64), CliError> {
    let mut ids = HashSet::new();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((ids, 0)),
        Err(e) => {
            return Err(CliError::Runtime(format!(
                "reading {}: {e}",
                path.display()
            )))
        }
    };
    let mut valid_len = 0u64;
    let mut segments = text.split_inclusive('\n').enumerate().peekable();
    while let Some((i, segment)) = segments.next() {
        let is_last = segments.peek().is_none();
        let complete = segment.ends_with('\n');
        let line = segment.trim();
        if line.is_empty() {
            if complete {
                valid_len += segment.len() as u64;
            }
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(record) if complete => {
                ids.insert(record.task_id);
                valid_len += segment.len() as u64;
            }
            Ok(_) | Err(_) if is_last => {
                tracing::warn!(
                    line = i + 1,
                    "dropping damaged final record; its question will rerun"
                );
            }
            Err(e) => {
                return Err(CliError::Runtime(format!(
                    "{}:{}: corrupt record: {e}",
                    path.display(),
                    i + 1
                )));
            }
            Ok(_) => unreachable!("complete records are handled above"),
        }
    }
    Ok((ids, valid_len))
}

/// Wires the configured backend, cache, limiter, and corpus into a runtime.
pub fn build_runtime(resolved: &ResolvedConfig) -> Result<Runtime, CliError> {
    let limiter = resolved
        .raw
        .endpoint
        .requests_per_minute
        .map(|rpm| Arc::new(RateLimiter::per_minute(rpm)));

    let base_backend: Arc<dyn TextBackend> = match resolved.raw.model.backend.as_str() {
        "scripted" => {
            let path = resolved
                .raw
                .model
                .script_path
                .as_ref()
                .expect("validated: script path present");
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
            let script: ScriptFile = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Validation(format!("parsing {}: {e}", path.display())))?;
            Arc::new(ScriptedBackend::from_script(&script))
        }
        _ => {
            let endpoint = &resolved.raw.endpoint;
            let config = RemoteConfig {
                base_url: endpoint.base_url.clone(),
                path: endpoint.path.clone(),
                style: resolved.endpoint_style,
                api_key_env: endpoint.api_key_env.clone(),
                auth_header: endpoint.auth_header.clone(),
                auth_prefix: endpoint.auth_prefix.clone(),
                retry: RetryPolicy::default(),
            };
            Arc::new(RemoteBackend::new(config, limiter.clone()))
        }
    };
    let backend: Arc<dyn TextBackend> = match &resolved.raw.cache.dir {
        Some(dir) => Arc::new(CacheBackend::new(dir.clone(), base_backend)),
        None => base_backend,
    };
    let gateway = Gateway::new(backend).with_cache_mode(resolved.cache_mode);

    let corpus: Arc<dyn Corpus> = match resolved.raw.corpus.kind.as_str() {
        "local" => match &resolved.raw.corpus.path {
            Some(path) => Arc::new(
                LocalCorpus::from_json_file(path)
                    .map_err(|e| CliError::Validation(format!("loading corpus: {e}")))?,
            ),
            // MuSiQue runs never touch the corpus; an empty one keeps the
            // runtime uniform.
            None => Arc::new(LocalCorpus::new(Vec::new())),
        },
        _ => {
            let config = WikiConfig {
                api_url: resolved
                    .raw
                    .corpus
                    .api_url
                    .clone()
                    .unwrap_or_else(|| WikiConfig::default().api_url),
                cache_dir: resolved.raw.corpus.cache_dir.clone(),
            };
            Arc::new(WikiCorpus::new(config, limiter))
        }
    };

    let mut judge = JudgeConfig::new(&resolved.raw.model.model_id);
    judge.swap_order = resolved.raw.params.swap_judge_order;
    judge.debate_rounds = resolved.params.debate_rounds;

    let mut runtime = Runtime::new(gateway, corpus, &resolved.raw.model.model_id);
    runtime.react_set = resolved.react_set;
    runtime.standard_set = resolved.standard_set;
    runtime.params = resolved.params.clone();
    runtime.judge = judge;
    Ok(runtime)
}

async fn execute_question(runtime: &Runtime, strategy: StrategyName, task: TaskSpec) -> RunRecord {
    match run_strategy(runtime, strategy, &task).await {
        Ok(outcome) => build_record(&task, strategy, outcome),
        Err(e) => {
            tracing::warn!(task_id = %task.id, error = %e, "question failed; recorded and skipped");
            failure_record(&task, strategy, e.to_string())
        }
    }
}

pub fn build_record(
    task: &TaskSpec,
    strategy: StrategyName,
    outcome: StrategyOutcome,
) -> RunRecord {
    let em = exact_match(&outcome.final_answer, task.gold.answers());
    let f1_score = f1(&outcome.final_answer, task.gold.answers());
    RunRecord {
        task_id: task.id.clone(),
        dataset: task.dataset,
        strategy: strategy.as_str(),
        question: task.question.clone(),
        gold_answers: task.gold.answers().to_vec(),
        final_answer: outcome.final_answer,
        candidates: outcome.all_candidates,
        verdict: outcome.verdict,
        fallback_taken: outcome.fallback_taken.map(|f| f.as_str().to_string()),
        debate: outcome.debate,
        vote_frequency: outcome.vote_frequency,
        refine_converged: outcome.refine_converged,
        agent_failures: outcome.agent_failures,
        metrics: MetricsRecord { em, f1: f1_score },
        ledger: LedgerRecord::from_snapshot(&outcome.ledger),
        error: None,
    }
}

fn failure_record(task: &TaskSpec, strategy: StrategyName, error: String) -> RunRecord {
    RunRecord {
        task_id: task.id.clone(),
        dataset: task.dataset,
        strategy: strategy.as_str(),
        question: task.question.clone(),
        gold_answers: task.gold.answers().to_vec(),
        final_answer: String::new(),
        candidates: Vec::new(),
        verdict: None,
        fallback_taken: None,
        debate: None,
        vote_frequency: None,
        refine_converged: None,
        agent_failures: Vec::new(),
        metrics: MetricsRecord { em: 0, f1: 0.0 },
        ledger: LedgerRecord {
            llm_calls: 0,
            remote_calls: 0,
            scripted_calls: 0,
            cache_hits: 0,
            elapsed_ms: 0,
        },
        error: Some(error),
    }
}

/// Reads a record log strictly: any corrupt line is an error naming the line
/// number (used by score/analyze/report).
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Runtime(format!("{}:{}: corrupt record: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

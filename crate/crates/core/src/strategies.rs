//! Composes agents, environments, and judges into named strategies: the
//! two-agent research-plus-judge pipeline (`rc`), its k-agent variants, and
//! every baseline and ablation (standard, CoT, CoT-SC, ReAct, MAD, hybrids).

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;

use crate::agent::{run_cot, run_react, run_standard, AgentConfig, AgentError};
use crate::env::{Corpus, EnvError, EnvSession};
use crate::evalkit::normalized_key;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, LedgerSnapshot};
use crate::judge::{
    adjudicate_answers_only, adjudicate_rc, adjudicate_with_debate, run_debate, short_circuit,
    DebateTranscript, JudgeConfig, JudgeError, JudgeInput, Verdict,
};
use crate::model::{CandidateAnswer, ModelError, TaskSpec};
use crate::prompts::{PromptError, PromptSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyName {
    Standard,
    Cot,
    CotSc,
    React,
    Mad,
    ReactThenCotSc,
    CotScThenReact,
    ReactThenSelfRefine,
    Rc,
    RcWithoutJudge,
    ReactSc,
    ReactThenMad,
    ReactThenLlmJudge,
    CotThenJudge,
    /// k-agent variant; 0 means "resolve k from params".
    RcK(u32),
}

impl StrategyName {
    pub fn as_str(&self) -> String {
        match self {
            StrategyName::Standard => "standard".to_string(),
            StrategyName::Cot => "cot".to_string(),
            StrategyName::CotSc => "cot-sc".to_string(),
            StrategyName::React => "react".to_string(),
            StrategyName::Mad => "mad".to_string(),
            StrategyName::ReactThenCotSc => "react-cot-sc".to_string(),
            StrategyName::CotScThenReact => "cot-sc-react".to_string(),
            StrategyName::ReactThenSelfRefine => "react-refine".to_string(),
            StrategyName::Rc => "rc".to_string(),
            StrategyName::RcWithoutJudge => "rc-no-judge".to_string(),
            StrategyName::ReactSc => "react-sc".to_string(),
            StrategyName::ReactThenMad => "react-mad".to_string(),
            StrategyName::ReactThenLlmJudge => "react-llm-judge".to_string(),
            StrategyName::CotThenJudge => "cot-judge".to_string(),
            StrategyName::RcK(0) => "rc-k".to_string(),
            StrategyName::RcK(k) => format!("rc-{k}"),
        }
    }

    pub fn all_names() -> &'static [&'static str] {
        &[
            "standard",
            "cot",
            "cot-sc",
            "react",
            "mad",
            "react-cot-sc",
            "cot-sc-react",
            "react-refine",
            "rc",
            "rc-no-judge",
            "react-sc",
            "react-mad",
            "react-llm-judge",
            "cot-judge",
            "rc-k (or rc-3, rc-4, rc-5, ...)",
        ]
    }
}

impl FromStr for StrategyName {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim().to_ascii_lowercase();
        let parsed = match name.as_str() {
            "standard" => StrategyName::Standard,
            "cot" => StrategyName::Cot,
            "cot-sc" | "cotsc" => StrategyName::CotSc,
            "react" => StrategyName::React,
            "mad" => StrategyName::Mad,
            "react-cot-sc" => StrategyName::ReactThenCotSc,
            "cot-sc-react" => StrategyName::CotScThenReact,
            "react-refine" | "react-self-refine" => StrategyName::ReactThenSelfRefine,
            "rc" => StrategyName::Rc,
            "rc-no-judge" | "rc-without-judge" => StrategyName::RcWithoutJudge,
            "react-sc" => StrategyName::ReactSc,
            "react-mad" => StrategyName::ReactThenMad,
            "react-llm-judge" => StrategyName::ReactThenLlmJudge,
            "cot-judge" => StrategyName::CotThenJudge,
            "rc-k" => StrategyName::RcK(0),
            other => {
                if let Some(k) = other
                    .strip_prefix("rc-")
                    .and_then(|k| k.parse::<u32>().ok())
                {
                    StrategyName::RcK(k)
                } else {
                    return Err(StrategyError::UnknownStrategy(other.to_string()));
                }
            }
        };
        Ok(parsed)
    }
}

/// Tunables shared by every strategy run; defaults mirror the evaluation
/// protocol (21 self-consistency samples at temperature 0.7, two debate
/// rounds, one refine round, k-agent variants sampled at 0.7).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyParams {
    pub sc_samples: u32,
    pub sc_temperature: f64,
    pub debate_rounds: u32,
    pub refine_rounds: u32,
    pub k: u32,
    pub k_temperature: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            sc_samples: 21,
            sc_temperature: 0.7,
            debate_rounds: 2,
            refine_rounds: 1,
            k: 3,
            k_temperature: 0.7,
        }
    }
}

/// Everything a strategy needs to run one question: the shared gateway and
/// corpus plus prompt and judge configuration.
pub struct Runtime {
    pub gateway: Gateway,
    pub corpus: Arc<dyn Corpus>,
    pub model_id: String,
    pub react_set: PromptSet,
    pub standard_set: PromptSet,
    pub params: StrategyParams,
    pub judge: JudgeConfig,
}

impl Runtime {
    pub fn new(gateway: Gateway, corpus: Arc<dyn Corpus>, model_id: impl Into<String>) -> Self {
        let model_id = model_id.into();
        Runtime {
            gateway,
            corpus,
            judge: JudgeConfig::new(&model_id),
            model_id,
            react_set: PromptSet::ReActDefault,
            standard_set: PromptSet::Standard,
            params: StrategyParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// ReAct came up empty; self-consistency CoT answered instead.
    CotScAfterReact,
    /// The self-consistency majority was under 50%; ReAct answered instead.
    ReactAfterCotSc,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::CotScAfterReact => "cot_sc_after_react",
            Fallback::ReactAfterCotSc => "react_after_cot_sc",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub final_answer: String,
    pub verdict: Option<Verdict>,
    pub all_candidates: Vec<CandidateAnswer>,
    pub ledger: LedgerSnapshot,
    pub fallback_taken: Option<Fallback>,
    pub debate: Option<DebateTranscript>,
    pub agent_failures: Vec<String>,
    pub vote_frequency: Option<f64>,
    pub refine_converged: Option<bool>,
}

impl StrategyOutcome {
    fn new(final_answer: String, candidates: Vec<CandidateAnswer>) -> Self {
        StrategyOutcome {
            final_answer,
            verdict: None,
            all_candidates: candidates,
            ledger: LedgerSnapshot {
                llm_calls: 0,
                remote_calls: 0,
                scripted_calls: 0,
                cache_hits: 0,
                wall_time: std::time::Duration::ZERO,
            },
            fallback_taken: None,
            debate: None,
            agent_failures: Vec::new(),
            vote_frequency: None,
            refine_converged: None,
        }
    }

    fn with_verdict(verdict: Verdict, candidates: Vec<CandidateAnswer>) -> Self {
        let mut outcome = Self::new(verdict.final_answer.clone(), candidates);
        outcome.verdict = Some(verdict);
        outcome
    }
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("majority vote over an empty answer list")]
    EmptyVote,
    #[error("all agents failed: {0}")]
    AllAgentsFailed(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
}

/// Modal answer and its relative frequency. Votes pool under scoring
/// normalization so surface variants of one answer count together; ties break
/// by first occurrence order; the winner keeps its first surface form.
pub fn majority_vote(answers: &[String]) -> Result<(String, f64), StrategyError> {
    if answers.is_empty() {
        return Err(StrategyError::EmptyVote);
    }
    struct Tally {
        key: String,
        count: usize,
        first_index: usize,
        surface: String,
    }
    let mut tallies: Vec<Tally> = Vec::new();
    for (index, answer) in answers.iter().enumerate() {
        let key = normalized_key(answer);
        match tallies.iter_mut().find(|t| t.key == key) {
            Some(t) => t.count += 1,
            None => tallies.push(Tally {
                key,
                count: 1,
                first_index: index,
                surface: answer.clone(),
            }),
        }
    }
    tallies.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.first_index.cmp(&b.first_index))
    });
    let winner = &tallies[0];
    Ok((
        winner.surface.clone(),
        winner.count as f64 / answers.len() as f64,
    ))
}

/// Runs one strategy over one task with a fresh per-question ledger.
pub async fn run_strategy(
    runtime: &Runtime,
    name: StrategyName,
    task: &TaskSpec,
) -> Result<StrategyOutcome, StrategyError> {
    let started = Instant::now();
    let gateway = runtime.gateway.fresh_ledger();
    let ctx = Ctx {
        runtime,
        gateway: gateway.clone(),
        task,
    };
    let mut outcome = match name {
        StrategyName::Standard => ctx.standard().await?,
        StrategyName::Cot => ctx.cot().await?,
        StrategyName::CotSc => ctx.cot_sc().await?,
        StrategyName::React | StrategyName::RcWithoutJudge => ctx.react_single().await?,
        StrategyName::Mad => ctx.mad().await?,
        StrategyName::ReactThenCotSc => ctx.react_then_cot_sc().await?,
        StrategyName::CotScThenReact => ctx.cot_sc_then_react().await?,
        StrategyName::ReactThenSelfRefine => ctx.react_self_refine().await?,
        StrategyName::Rc => ctx.rc(2, 0.0, JudgeKind::Trajectories).await?,
        StrategyName::ReactSc => ctx.react_sc().await?,
        StrategyName::ReactThenMad => ctx.rc(2, 0.0, JudgeKind::WithDebate).await?,
        StrategyName::ReactThenLlmJudge => ctx.rc(2, 0.0, JudgeKind::AnswersOnly).await?,
        StrategyName::CotThenJudge => ctx.cot_then_judge().await?,
        StrategyName::RcK(k) => {
            let k = if k == 0 { runtime.params.k } else { k };
            if k < 2 {
                return Err(StrategyError::InvalidParams(format!(
                    "rc-k needs k >= 2, got {k}"
                )));
            }
            ctx.rc(k, runtime.params.k_temperature, JudgeKind::Trajectories)
                .await?
        }
    };
    outcome.ledger = gateway.ledger().snapshot_with_elapsed(started.elapsed());
    Ok(outcome)
}

#[derive(Clone, Copy)]
enum JudgeKind {
    Trajectories,
    AnswersOnly,
    WithDebate,
}

struct Ctx<'a> {
    runtime: &'a Runtime,
    gateway: Gateway,
    task: &'a TaskSpec,
}

impl Ctx<'_> {
    fn agent_config(&self, set: PromptSet, label: &str) -> AgentConfig {
        AgentConfig::new(set, label, &self.runtime.model_id)
    }

    async fn standard(&self) -> Result<StrategyOutcome, StrategyError> {
        let config = self.agent_config(self.runtime.standard_set, "standard");
        let result = run_standard(self.task, &config, &self.gateway).await?;
        Ok(StrategyOutcome::new(
            result.candidate.answer.clone(),
            vec![result.candidate],
        ))
    }

    async fn cot(&self) -> Result<StrategyOutcome, StrategyError> {
        let config = self.agent_config(PromptSet::CoT, "cot-1");
        let result = run_cot(self.task, &config, &self.gateway).await?;
        Ok(StrategyOutcome::new(
            result.candidate.answer.clone(),
            vec![result.candidate],
        ))
    }

    async fn react_single(&self) -> Result<StrategyOutcome, StrategyError> {
        let config = self.agent_config(self.runtime.react_set, "agent-1");
        let mut session = EnvSession::for_task(self.task, Arc::clone(&self.runtime.corpus));
        let result = run_react(self.task, &mut session, &config, &self.gateway).await?;
        Ok(StrategyOutcome::new(
            result.candidate.answer.clone(),
            vec![result.candidate],
        ))
    }

    /// k concurrent ReAct agents, preserving agent order in the output. An
    /// agent that fails hard is recorded and the survivors continue; only a
    /// total wipeout is an error.
    async fn react_candidates(
        &self,
        count: u32,
        temperature: f64,
    ) -> Result<(Vec<CandidateAnswer>, Vec<String>), StrategyError> {
        let mut join_set = JoinSet::new();
        for i in 1..=count {
            let label = format!("agent-{i}");
            let config = self
                .agent_config(self.runtime.react_set, &label)
                .with_temperature(temperature)
                .with_sample_index(i);
            let task = self.task.clone();
            let corpus = Arc::clone(&self.runtime.corpus);
            let gateway = self.gateway.clone();
            join_set.spawn(async move {
                let mut session = EnvSession::for_task(&task, corpus);
                let result = run_react(&task, &mut session, &config, &gateway).await;
                (i, result)
            });
        }
        let mut succeeded: Vec<(u32, CandidateAnswer)> = Vec::new();
        let mut failures: Vec<(u32, String)> = Vec::new();
        while let Some(joined) = join_set.join_next().await {
            let (i, result) = joined.expect("agent task not cancelled");
            match result {
                Ok(r) => succeeded.push((i, r.candidate)),
                Err(e) => failures.push((i, format!("agent-{i}: {e}"))),
            }
        }
        if succeeded.is_empty() {
            let detail: Vec<String> = failures.into_iter().map(|(_, m)| m).collect();
            return Err(StrategyError::AllAgentsFailed(detail.join("; ")));
        }
        succeeded.sort_by_key(|(i, _)| *i);
        failures.sort_by_key(|(i, _)| *i);
        Ok((
            succeeded.into_iter().map(|(_, c)| c).collect(),
            failures.into_iter().map(|(_, m)| m).collect(),
        ))
    }

    /// Concurrent chain-of-thought samples labeled `<prefix>-1..n`.
    async fn cot_candidates(
        &self,
        count: u32,
        temperature: f64,
        prefix: &str,
    ) -> Result<Vec<CandidateAnswer>, StrategyError> {
        let mut join_set = JoinSet::new();
        for i in 1..=count {
            let config = self
                .agent_config(PromptSet::CoT, &format!("{prefix}-{i}"))
                .with_temperature(temperature)
                .with_sample_index(i);
            let task = self.task.clone();
            let gateway = self.gateway.clone();
            join_set.spawn(async move { (i, run_cot(&task, &config, &gateway).await) });
        }
        let mut results: Vec<(u32, CandidateAnswer)> = Vec::new();
        while let Some(joined) = join_set.join_next().await {
            let (i, result) = joined.expect("cot task not cancelled");
            results.push((i, result?.candidate));
        }
        results.sort_by_key(|(i, _)| *i);
        Ok(results.into_iter().map(|(_, c)| c).collect())
    }

    /// Core research-then-judge pipeline: k concurrent agents, identical
    /// non-empty answers short-circuit the judge, otherwise the configured
    /// judge kind adjudicates (optionally after a debate phase).
    async fn rc(
        &self,
        agents: u32,
        temperature: f64,
        judge_kind: JudgeKind,
    ) -> Result<StrategyOutcome, StrategyError> {
        let (candidates, failures) = self.react_candidates(agents, temperature).await?;
        let mut outcome = self.judged_outcome(candidates, judge_kind).await?;
        outcome.agent_failures = failures;
        Ok(outcome)
    }

    async fn judged_outcome(
        &self,
        candidates: Vec<CandidateAnswer>,
        judge_kind: JudgeKind,
    ) -> Result<StrategyOutcome, StrategyError> {
        if let Some(verdict) = short_circuit(&candidates) {
            return Ok(StrategyOutcome::with_verdict(verdict, candidates));
        }
        let include_trajectories = !matches!(judge_kind, JudgeKind::AnswersOnly);
        let input = JudgeInput {
            task: self.task,
            candidates: &candidates,
            include_trajectories,
        };
        let judge_config = &self.runtime.judge;
        let (verdict, debate) = match judge_kind {
            JudgeKind::Trajectories => (
                adjudicate_rc(&input, judge_config, &self.gateway).await?,
                None,
            ),
            JudgeKind::AnswersOnly => (
                adjudicate_answers_only(&input, judge_config, &self.gateway).await?,
                None,
            ),
            JudgeKind::WithDebate => {
                let transcript =
                    run_debate(self.task, &candidates, judge_config, &self.gateway).await?;
                let verdict =
                    adjudicate_with_debate(&input, &transcript, judge_config, &self.gateway)
                        .await?;
                (verdict, Some(transcript))
            }
        };
        let mut outcome = StrategyOutcome::with_verdict(verdict, candidates);
        outcome.debate = debate;
        Ok(outcome)
    }

    async fn cot_sc(&self) -> Result<StrategyOutcome, StrategyError> {
        let params = &self.runtime.params;
        let candidates = self
            .cot_candidates(params.sc_samples, params.sc_temperature, "cot-sc")
            .await?;
        let answers: Vec<String> = candidates.iter().map(|c| c.answer.clone()).collect();
        let (winner, frequency) = majority_vote(&answers)?;
        let mut outcome = StrategyOutcome::new(winner, candidates);
        outcome.vote_frequency = Some(frequency);
        Ok(outcome)
    }

    async fn react_sc(&self) -> Result<StrategyOutcome, StrategyError> {
        let params = &self.runtime.params;
        let (candidates, failures) = self.react_candidates(3, params.sc_temperature).await?;
        let answers: Vec<String> = candidates.iter().map(|c| c.answer.clone()).collect();
        let (winner, frequency) = majority_vote(&answers)?;
        let mut outcome = StrategyOutcome::new(winner, candidates);
        outcome.vote_frequency = Some(frequency);
        outcome.agent_failures = failures;
        Ok(outcome)
    }

    async fn react_then_cot_sc(&self) -> Result<StrategyOutcome, StrategyError> {
        let react = self.react_single().await?;
        if !react.final_answer.trim().is_empty() {
            return Ok(react);
        }
        let params = &self.runtime.params;
        let sc_candidates = self
            .cot_candidates(params.sc_samples, params.sc_temperature, "cot-sc")
            .await?;
        let answers: Vec<String> = sc_candidates.iter().map(|c| c.answer.clone()).collect();
        let (winner, frequency) = majority_vote(&answers)?;
        let mut candidates = react.all_candidates;
        candidates.extend(sc_candidates);
        let mut outcome = StrategyOutcome::new(winner, candidates);
        outcome.fallback_taken = Some(Fallback::CotScAfterReact);
        outcome.vote_frequency = Some(frequency);
        Ok(outcome)
    }

    async fn cot_sc_then_react(&self) -> Result<StrategyOutcome, StrategyError> {
        let sc = self.cot_sc().await?;
        let frequency = sc.vote_frequency.expect("cot_sc sets vote_frequency");
        if frequency >= 0.5 {
            return Ok(sc);
        }
        let react = self.react_single().await?;
        let mut candidates = sc.all_candidates;
        candidates.extend(react.all_candidates);
        let mut outcome = StrategyOutcome::new(react.final_answer, candidates);
        outcome.fallback_taken = Some(Fallback::ReactAfterCotSc);
        outcome.vote_frequency = Some(frequency);
        Ok(outcome)
    }

    /// ReAct then iterative self-refinement: per round, one feedback
    /// completion and one revision completion; the last revision is final.
    async fn react_self_refine(&self) -> Result<StrategyOutcome, StrategyError> {
        let react = self.react_single().await?;
        let initial = react.final_answer.clone();
        let trajectory_text = crate::model::render_trajectory(&react.all_candidates[0].trajectory);
        let label = self.task.dataset.question_label();
        let question = &self.task.question;
        let mut answer = initial.clone();
        for round in 1..=self.runtime.params.refine_rounds {
            let feedback_prompt = format!(
                "{label}: {question}\n\nProposed answer: {answer}\n\nResearch trajectory:\n{trajectory_text}\nReview the reasoning and the proposed answer against the evidence in the trajectory. In a short paragraph, point out any errors, unsupported assumptions, or gaps.",
            );
            let feedback = self
                .completion(feedback_prompt, &format!("refine-feedback-{round}"))
                .await?;
            let revision_prompt = format!(
                "{label}: {question}\n\nProposed answer: {answer}\n\nFeedback: {}\n\nTaking the feedback into account, give your final short answer in the format:\nAnswer: <short answer>",
                feedback.trim(),
            );
            let revision = self
                .completion(revision_prompt, &format!("refine-revision-{round}"))
                .await?;
            if let Some(revised) = extract_refined_answer(&revision) {
                answer = revised;
            }
        }
        let converged = crate::judge::answers_match(&answer, &initial);
        let mut outcome = StrategyOutcome::new(answer, react.all_candidates);
        outcome.refine_converged = Some(converged);
        Ok(outcome)
    }

    /// Retrieval-free debate baseline: two chain-of-thought candidates argue
    /// across rounds, then the trajectory judge decides over the transcript.
    async fn mad(&self) -> Result<StrategyOutcome, StrategyError> {
        let candidates = self.cot_candidates(2, 0.0, "cot").await?;
        self.judged_outcome(candidates, JudgeKind::WithDebate).await
    }

    async fn cot_then_judge(&self) -> Result<StrategyOutcome, StrategyError> {
        let candidates = self.cot_candidates(2, 0.0, "cot").await?;
        self.judged_outcome(candidates, JudgeKind::Trajectories)
            .await
    }

    async fn completion(&self, prompt: String, role: &str) -> Result<String, StrategyError> {
        let request = CompletionRequest::new(prompt, &self.runtime.model_id)
            .with_route(format!("{}/{role}", self.task.id));
        Ok(self.gateway.complete(request).await?.text)
    }
}

fn extract_refined_answer(completion: &str) -> Option<String> {
    let text = completion.trim();
    if text.is_empty() {
        return None;
    }
    let answer = match text.rfind("Answer:") {
        Some(pos) => text[pos + "Answer:".len()..]
            .lines()
            .next()
            .unwrap_or("")
            .trim(),
        None => text.lines().next().unwrap_or("").trim(),
    };
    if answer.is_empty() {
        None
    } else {
        Some(answer.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LocalCorpus;
    use crate::gateway::ScriptedBackend;
    use crate::model::{Dataset, GoldAnswer};

    fn task() -> TaskSpec {
        TaskSpec::new(
            "q1",
            Dataset::HotpotQa,
            "Are Jon Turteltaub and Samuel Kronick both television writers?",
            GoldAnswer::single("no"),
        )
    }

    fn corpus() -> Arc<LocalCorpus> {
        Arc::new(LocalCorpus::new(vec![
            (
                "Jon Turteltaub".to_string(),
                "Jonathan Charles Turteltaub is an American film director and producer. He has worked on several television productions.".to_string(),
            ),
            (
                "Samuel Kronick".to_string(),
                "Samuel Kronick is an American television writer. He is known for his writing work.".to_string(),
            ),
        ]))
    }

    fn runtime(script: &[(&str, &str)]) -> Runtime {
        let backend = ScriptedBackend::new();
        for (route, text) in script {
            backend.enqueue(*route, *text);
        }
        Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model")
    }

    fn agent_finish_script(answer: &str) -> String {
        format!(" Concluding.\nAction 1: Finish[{answer}]")
    }

    #[test]
    fn majority_vote_fixtures() {
        let answers: Vec<String> = std::iter::repeat_n("A".to_string(), 10)
            .chain(std::iter::repeat_n("B".to_string(), 7))
            .chain(std::iter::repeat_n("C".to_string(), 4))
            .collect();
        let (winner, freq) = majority_vote(&answers).unwrap();
        assert_eq!(winner, "A");
        assert!((freq - 10.0 / 21.0).abs() < 1e-12);
        assert!(freq < 0.5);

        let answers: Vec<String> = std::iter::repeat_n("B".to_string(), 11)
            .chain(std::iter::repeat_n("A".to_string(), 10))
            .collect();
        let (winner, freq) = majority_vote(&answers).unwrap();
        assert_eq!(winner, "B");
        assert!((freq - 11.0 / 21.0).abs() < 1e-12);
        assert!(freq >= 0.5);
    }

    #[test]
    fn majority_vote_pools_normalized_variants_and_breaks_ties_by_first_seen() {
        let answers = vec![
            "The Saimaa Gesture".to_string(),
            "Saimaa Gesture".to_string(),
            "Something Else".to_string(),
        ];
        let (winner, freq) = majority_vote(&answers).unwrap();
        assert_eq!(winner, "The Saimaa Gesture");
        assert!((freq - 2.0 / 3.0).abs() < 1e-12);

        let tied = vec!["x".to_string(), "y".to_string()];
        let (winner, _) = majority_vote(&tied).unwrap();
        assert_eq!(winner, "x");
    }

    #[test]
    fn majority_vote_rejects_empty_input() {
        assert!(matches!(majority_vote(&[]), Err(StrategyError::EmptyVote)));
    }

    #[tokio::test]
    async fn rc_judged_path_counts_and_verdict() {
        let rt = runtime(&[
            (
                "q1/agent-1",
                " Searching.\nAction 1: Search[Jon Turteltaub]",
            ),
            ("q1/agent-1", &agent_finish_script("yes")),
            (
                "q1/agent-2",
                " Searching.\nAction 1: Search[Samuel Kronick]",
            ),
            ("q1/agent-2", " Only Kronick writes.\nAction 2: Finish[no]"),
            (
                "q1/judge",
                "Agent 2 reasoned from the evidence.\nAction: Complete[no]",
            ),
        ]);
        let outcome = run_strategy(&rt, StrategyName::Rc, &task()).await.unwrap();
        assert_eq!(outcome.final_answer, "no");
        let verdict = outcome.verdict.unwrap();
        assert_eq!(verdict.selected_index(), Some(2));
        // steps(agent-1) + steps(agent-2) + 1 judge call
        assert_eq!(outcome.ledger.llm_calls, 2 + 2 + 1);
    }

    #[tokio::test]
    async fn rc_short_circuits_identical_answers() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("no")),
            ("q1/agent-2", &agent_finish_script("no")),
        ]);
        let outcome = run_strategy(&rt, StrategyName::Rc, &task()).await.unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.ledger.llm_calls, 2);
        assert!(matches!(
            outcome.verdict.unwrap().mode,
            crate::judge::VerdictMode::ShortCircuitIdentical
        ));
    }

    #[tokio::test]
    async fn rc_synthesizes_when_both_empty() {
        let backend = ScriptedBackend::new();
        for agent in ["agent-1", "agent-2"] {
            for _ in 0..7 {
                backend.enqueue(
                    format!("q1/{agent}"),
                    " Stuck.\nAction 1: Search[Jon Turteltaub]",
                );
            }
        }
        backend.enqueue(
            "q1/judge",
            "Both empty; evidence says only one writes.\nAction: Complete[no]",
        );
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::Rc, &task()).await.unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert!(matches!(
            outcome.verdict.unwrap().mode,
            crate::judge::VerdictMode::Synthesized
        ));
        assert_eq!(outcome.ledger.llm_calls, 7 + 7 + 1);
    }

    #[tokio::test]
    async fn rc_survives_one_agent_failure() {
        // agent-2 has no script: its first completion errors out.
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("no")),
            (
                "q1/judge",
                "Only one solution provided.\nAction: Complete[no]",
            ),
        ]);
        let outcome = run_strategy(&rt, StrategyName::Rc, &task()).await.unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.agent_failures.len(), 1);
        assert!(outcome.agent_failures[0].starts_with("agent-2:"));
        assert_eq!(outcome.all_candidates.len(), 1);
    }

    #[tokio::test]
    async fn cot_sc_consumes_exactly_sample_count() {
        let backend = ScriptedBackend::new();
        for i in 1..=21 {
            let answer = if i <= 11 { "B" } else { "A" };
            backend.enqueue(
                format!("q1/cot-sc-{i}"),
                format!("thinking\nAnswer: {answer}"),
            );
        }
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::CotSc, &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 21);
        assert_eq!(outcome.final_answer, "B");
        assert!((outcome.vote_frequency.unwrap() - 11.0 / 21.0).abs() < 1e-12);
    }

    #[tokio::test]
    async fn react_then_cot_sc_skips_fallback_when_react_answers() {
        let rt = runtime(&[("q1/agent-1", &agent_finish_script("no"))]);
        let outcome = run_strategy(&rt, StrategyName::ReactThenCotSc, &task())
            .await
            .unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.fallback_taken, None);
        assert_eq!(outcome.ledger.llm_calls, 1);
    }

    #[tokio::test]
    async fn react_then_cot_sc_falls_back_on_empty_answer() {
        let backend = ScriptedBackend::new();
        for _ in 0..7 {
            backend.enqueue("q1/agent-1", " Stuck.\nAction 1: Search[Jon Turteltaub]");
        }
        for i in 1..=21 {
            backend.enqueue(format!("q1/cot-sc-{i}"), "thought\nAnswer: no");
        }
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::ReactThenCotSc, &task())
            .await
            .unwrap();
        assert_eq!(outcome.fallback_taken, Some(Fallback::CotScAfterReact));
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.ledger.llm_calls, 7 + 21);
    }

    #[tokio::test]
    async fn cot_sc_then_react_falls_back_below_half() {
        let backend = ScriptedBackend::new();
        // 10 A, 7 B, 4 C over 21: majority 10/21 < 0.5.
        for i in 1..=21 {
            let answer = if i <= 10 {
                "A"
            } else if i <= 17 {
                "B"
            } else {
                "C"
            };
            backend.enqueue(format!("q1/cot-sc-{i}"), format!("t\nAnswer: {answer}"));
        }
        backend.enqueue("q1/agent-1", agent_finish_script("no"));
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::CotScThenReact, &task())
            .await
            .unwrap();
        assert_eq!(outcome.fallback_taken, Some(Fallback::ReactAfterCotSc));
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.ledger.llm_calls, 21 + 1);
    }

    #[tokio::test]
    async fn rc_ledger_counts_four_three_one() {
        let rt = runtime(&[
            ("q1/agent-1", " One.\nAction 1: Search[Jon Turteltaub]"),
            ("q1/agent-1", " Two.\nAction 2: Lookup[director]"),
            ("q1/agent-1", " Three.\nAction 3: Search[Samuel Kronick]"),
            ("q1/agent-1", " Four.\nAction 4: Finish[yes]"),
            ("q1/agent-2", " One.\nAction 1: Search[Samuel Kronick]"),
            ("q1/agent-2", " Two.\nAction 2: Lookup[writer]"),
            ("q1/agent-2", " Three.\nAction 3: Finish[no]"),
            ("q1/judge", "Action: Complete[no]"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::Rc, &task()).await.unwrap();
        assert_eq!(outcome.ledger.llm_calls, 4 + 3 + 1);
        assert_eq!(outcome.all_candidates[0].trajectory.len(), 4);
        assert_eq!(outcome.all_candidates[1].trajectory.len(), 3);
    }

    #[tokio::test]
    async fn react_then_cot_sc_records_empty_when_both_paths_fail() {
        let backend = ScriptedBackend::new();
        for _ in 0..7 {
            backend.enqueue("q1/agent-1", " Stuck.\nAction 1: Search[Jon Turteltaub]");
        }
        for i in 1..=21 {
            backend.enqueue(format!("q1/cot-sc-{i}"), "no answer label anywhere");
        }
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::ReactThenCotSc, &task())
            .await
            .unwrap();
        assert_eq!(outcome.final_answer, "");
        assert_eq!(outcome.fallback_taken, Some(Fallback::CotScAfterReact));
        assert_eq!(outcome.ledger.llm_calls, 7 + 21);
    }

    #[tokio::test]
    async fn cot_sc_then_react_keeps_majority_at_or_above_half() {
        let backend = ScriptedBackend::new();
        for i in 1..=21 {
            let answer = if i <= 11 { "B" } else { "A" };
            backend.enqueue(format!("q1/cot-sc-{i}"), format!("t\nAnswer: {answer}"));
        }
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::CotScThenReact, &task())
            .await
            .unwrap();
        assert_eq!(outcome.fallback_taken, None);
        assert_eq!(outcome.final_answer, "B");
        assert_eq!(outcome.ledger.llm_calls, 21);
    }

    #[tokio::test]
    async fn self_refine_adds_two_calls_per_round() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("no")),
            ("q1/refine-feedback-1", "The reasoning looks solid."),
            ("q1/refine-revision-1", "Answer: no"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::ReactThenSelfRefine, &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 1 + 2);
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.refine_converged, Some(true));
    }

    #[tokio::test]
    async fn self_refine_revision_can_change_answer() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("yes")),
            (
                "q1/refine-feedback-1",
                "The trajectory only supports one writer.",
            ),
            ("q1/refine-revision-1", "Answer: no"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::ReactThenSelfRefine, &task())
            .await
            .unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.refine_converged, Some(false));
    }

    #[tokio::test]
    async fn react_sc_sums_three_agents_and_votes() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("no")),
            ("q1/agent-2", " Looking.\nAction 1: Search[Samuel Kronick]"),
            ("q1/agent-2", &agent_finish_script("no")),
            ("q1/agent-3", &agent_finish_script("yes")),
        ]);
        let outcome = run_strategy(&rt, StrategyName::ReactSc, &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 1 + 2 + 1);
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.verdict, None);
    }

    #[tokio::test]
    async fn react_then_mad_adds_debate_and_judge_calls() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("yes")),
            ("q1/agent-2", &agent_finish_script("no")),
            ("q1/debate-1-round-1", "I argue yes."),
            ("q1/debate-2-round-1", "I argue no, citing the page."),
            ("q1/debate-1-round-2", "Still yes."),
            ("q1/debate-2-round-2", "Still no."),
            (
                "q1/judge",
                "Agent 2 cites the evidence.\nAction: Complete[no]",
            ),
        ]);
        let outcome = run_strategy(&rt, StrategyName::ReactThenMad, &task())
            .await
            .unwrap();
        // 2 agent steps + 2 rounds x 2 agents debate + 1 judge
        assert_eq!(outcome.ledger.llm_calls, 2 + 4 + 1);
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.debate.as_ref().unwrap().arguments.len(), 4);
    }

    #[tokio::test]
    async fn react_then_llm_judge_uses_answers_only() {
        let rt = runtime(&[
            ("q1/agent-1", &agent_finish_script("yes")),
            ("q1/agent-2", &agent_finish_script("no")),
            ("q1/judge", "Action: Complete[no]"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::ReactThenLlmJudge, &task())
            .await
            .unwrap();
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.ledger.llm_calls, 3);
    }

    #[tokio::test]
    async fn cot_then_judge_consumes_two_plus_judge() {
        let rt = runtime(&[
            ("q1/cot-1", "reasoning A\nAnswer: yes"),
            ("q1/cot-2", "reasoning B\nAnswer: no"),
            ("q1/judge", "B is grounded.\nAction: Complete[no]"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::CotThenJudge, &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 2 + 1);
        assert_eq!(outcome.final_answer, "no");
    }

    #[tokio::test]
    async fn mad_debates_without_retrieval() {
        let rt = runtime(&[
            ("q1/cot-1", "reasoning A\nAnswer: yes"),
            ("q1/cot-2", "reasoning B\nAnswer: no"),
            ("q1/debate-1-round-1", "arg"),
            ("q1/debate-2-round-1", "arg"),
            ("q1/debate-1-round-2", "arg"),
            ("q1/debate-2-round-2", "arg"),
            ("q1/judge", "Action: Complete[no]"),
        ]);
        let outcome = run_strategy(&rt, StrategyName::Mad, &task()).await.unwrap();
        assert_eq!(outcome.ledger.llm_calls, 2 + 4 + 1);
        assert_eq!(outcome.final_answer, "no");
    }

    #[tokio::test]
    async fn rc_k_short_circuits_on_unanimous_answers() {
        let backend = ScriptedBackend::new();
        for i in 1..=5 {
            backend.enqueue(format!("q1/agent-{i}"), agent_finish_script("no"));
        }
        let rt = Runtime::new(Gateway::new(Arc::new(backend)), corpus(), "test-model");
        let outcome = run_strategy(&rt, StrategyName::RcK(5), &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 5);
        assert_eq!(outcome.final_answer, "no");
        assert_eq!(outcome.all_candidates.len(), 5);
    }

    #[tokio::test]
    async fn rc_without_judge_is_single_react_agent() {
        let rt = runtime(&[("q1/agent-1", &agent_finish_script("no"))]);
        let outcome = run_strategy(&rt, StrategyName::RcWithoutJudge, &task())
            .await
            .unwrap();
        assert_eq!(outcome.ledger.llm_calls, 1);
        assert_eq!(outcome.final_answer, "no");
        assert!(outcome.verdict.is_none());
    }

    #[tokio::test]
    async fn scripted_runs_are_deterministic_across_executions() {
        let build = || {
            runtime(&[
                (
                    "q1/agent-1",
                    " Searching.\nAction 1: Search[Jon Turteltaub]",
                ),
                ("q1/agent-1", &agent_finish_script("yes")),
                ("q1/agent-2", &agent_finish_script("no")),
                ("q1/judge", "Action: Complete[no]"),
            ])
        };
        let a = run_strategy(&build(), StrategyName::Rc, &task())
            .await
            .unwrap();
        let b = run_strategy(&build(), StrategyName::Rc, &task())
            .await
            .unwrap();
        assert_eq!(a.final_answer, b.final_answer);
        assert_eq!(a.all_candidates, b.all_candidates);
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.ledger.llm_calls, b.ledger.llm_calls);
    }

    #[test]
    fn strategy_names_round_trip() {
        for name in [
            "standard",
            "cot",
            "cot-sc",
            "react",
            "mad",
            "react-cot-sc",
            "cot-sc-react",
            "react-refine",
            "rc",
            "rc-no-judge",
            "react-sc",
            "react-mad",
            "react-llm-judge",
            "cot-judge",
            "rc-4",
        ] {
            let parsed: StrategyName = name.parse().unwrap();
            assert_eq!(parsed.as_str(), name);
        }
        assert!(matches!(
            "rc-k".parse::<StrategyName>().unwrap(),
            StrategyName::RcK(0)
        ));
        assert!("nonsense".parse::<StrategyName>().is_err());
    }
}

//! Adjudication over candidate answers: the trajectory-reading judge with the
//! `Complete[...]` output protocol (selection or synthesis), the answers-only
//! judge, and the debate machinery that can run before judgment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CompletionRequest, Gateway, GatewayError, DEFAULT_JUDGE_MAX_TOKENS};
use crate::model::{render_trajectory, CandidateAnswer, Dataset, TaskSpec};
use crate::prompts;

pub const FEVER_LABELS: [&str; 3] = ["SUPPORTS", "REFUTES", "NOT ENOUGH INFO"];

#[derive(Debug, Clone)]
pub struct JudgeConfig {
    pub model_id: String,
    pub max_tokens: u32,
    /// Present candidates in reverse order (position-bias experiments);
    /// labels keep the agents' true numbering.
    pub swap_order: bool,
    /// Re-prompt once when the completion lacks the required format.
    pub retry_on_parse_failure: bool,
    pub debate_rounds: u32,
}

impl JudgeConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        JudgeConfig {
            model_id: model_id.into(),
            max_tokens: DEFAULT_JUDGE_MAX_TOKENS,
            swap_order: false,
            retry_on_parse_failure: true,
            debate_rounds: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JudgeInput<'a> {
    pub task: &'a TaskSpec,
    pub candidates: &'a [CandidateAnswer],
    pub include_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VerdictMode {
    /// The final answer matches candidate `index` (1-based).
    SelectedAgent { index: usize },
    /// The final answer matches no candidate.
    Synthesized,
    /// All candidates were non-empty and identical; no judge call was made.
    ShortCircuitIdentical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictFlag {
    /// No `Complete[...]` after retries; last-line fallback engaged.
    ParseFallback,
    /// FEVER verdict outside the closed label set.
    InvalidFeverLabel,
    /// An answers-only judge, instructed to pick a candidate, picked neither.
    UnmatchedSelection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub final_answer: String,
    pub rationale: String,
    #[serde(flatten)]
    pub mode: VerdictMode,
    pub parse_attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<VerdictFlag>,
}

impl Verdict {
    pub fn selected_index(&self) -> Option<usize> {
        match self.mode {
            VerdictMode::SelectedAgent { index } => Some(index),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateArgument {
    pub agent_index: usize,
    pub round: u32,
    pub text: String,
}

/// Per-agent arguments ordered by round, then agent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateTranscript {
    pub arguments: Vec<DebateArgument>,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("adjudication requires at least one candidate")]
    NoCandidates,
}

/// The comparison relation for answer identity: whitespace-trimmed,
/// surrounding-quote-stripped, case-insensitive.
pub fn answers_match(a: &str, b: &str) -> bool {
    canonical(a) == canonical(b)
}

fn canonical(s: &str) -> String {
    strip_quotes(s.trim()).to_lowercase()
}

fn strip_quotes(text: &str) -> &str {
    let text = text.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’')] {
        if text.len() >= 2 && text.starts_with(open) && text.ends_with(close) {
            return text[open.len_utf8()..text.len() - close.len_utf8()].trim();
        }
    }
    text
}

/// When every candidate answer is non-empty and identical, the verdict is
/// that answer with zero judge completions; otherwise the caller adjudicates.
pub fn short_circuit(candidates: &[CandidateAnswer]) -> Option<Verdict> {
    if candidates.len() < 2 {
        return None;
    }
    let first = &candidates[0].answer;
    if first.trim().is_empty() {
        return None;
    }
    if candidates[1..]
        .iter()
        .all(|c| answers_match(&c.answer, first))
    {
        return Some(Verdict {
            final_answer: first.clone(),
            rationale: String::new(),
            mode: VerdictMode::ShortCircuitIdentical,
            parse_attempts: 0,
            flags: Vec::new(),
        });
    }
    None
}

/// Full-trajectory adjudication: the judge reads the question, every research
/// trajectory, and the candidate answers, then emits `Complete[<answer>]`.
pub async fn adjudicate_rc(
    input: &JudgeInput<'_>,
    config: &JudgeConfig,
    gateway: &Gateway,
) -> Result<Verdict, JudgeError> {
    let prompt = render_judge_prompt(input, None, config.swap_order);
    adjudicate(input, config, gateway, prompt, false).await
}

/// Adjudication with a debate transcript appended to the judge's materials.
pub async fn adjudicate_with_debate(
    input: &JudgeInput<'_>,
    transcript: &DebateTranscript,
    config: &JudgeConfig,
    gateway: &Gateway,
) -> Result<Verdict, JudgeError> {
    let prompt = render_judge_prompt(input, Some(transcript), config.swap_order);
    adjudicate(input, config, gateway, prompt, false).await
}

/// Answers-only adjudication: the judge sees final answers, no trajectories.
/// A verdict matching neither candidate is kept but flagged, since this judge
/// is instructed to pick one.
pub async fn adjudicate_answers_only(
    input: &JudgeInput<'_>,
    config: &JudgeConfig,
    gateway: &Gateway,
) -> Result<Verdict, JudgeError> {
    let prompt = render_judge_prompt(input, None, config.swap_order);
    adjudicate(input, config, gateway, prompt, true).await
}

async fn adjudicate(
    input: &JudgeInput<'_>,
    config: &JudgeConfig,
    gateway: &Gateway,
    prompt: String,
    flag_unmatched: bool,
) -> Result<Verdict, JudgeError> {
    if input.candidates.is_empty() {
        return Err(JudgeError::NoCandidates);
    }
    let route = format!("{}/judge", input.task.id);
    let request = CompletionRequest::new(prompt.clone(), &config.model_id)
        .with_max_tokens(config.max_tokens)
        .with_route(&route);
    let completion = gateway.complete(request).await?;
    let mut parse_attempts = 1;
    let mut rationale = completion.text.clone();
    let mut extracted = extract_complete(&completion.text);

    if extracted.is_none() && config.retry_on_parse_failure {
        let retry_prompt = format!(
            "{prompt}\n\n{}\n\nYour previous response did not include the required format. \
             State your final answer again, exactly in the format: Action: Complete[<answer>].",
            completion.text
        );
        let retry = CompletionRequest::new(retry_prompt, &config.model_id)
            .with_max_tokens(config.max_tokens)
            .with_route(&route);
        let second = gateway.complete(retry).await?;
        parse_attempts = 2;
        extracted = extract_complete(&second.text);
        rationale = format!("{}\n{}", completion.text, second.text);
    }

    let mut flags = Vec::new();
    let mut final_answer = match extracted {
        Some(answer) => answer,
        None => {
            flags.push(VerdictFlag::ParseFallback);
            fallback_answer(&rationale, input)
        }
    };

    if input.task.dataset == Dataset::Fever {
        final_answer = final_answer.to_uppercase();
        if !FEVER_LABELS.contains(&final_answer.as_str()) {
            flags.push(VerdictFlag::InvalidFeverLabel);
        }
    }

    let mode = match input
        .candidates
        .iter()
        .position(|c| !c.answer.trim().is_empty() && answers_match(&c.answer, &final_answer))
    {
        Some(idx) => VerdictMode::SelectedAgent { index: idx + 1 },
        None => {
            if flag_unmatched {
                flags.push(VerdictFlag::UnmatchedSelection);
            }
            VerdictMode::Synthesized
        }
    };

    Ok(Verdict {
        final_answer,
        rationale,
        mode,
        parse_attempts,
        flags,
    })
}

/// Last-resort answer when the protocol never appeared: the last non-empty
/// line of the completion, else a dataset-appropriate default, else the first
/// non-empty candidate answer. Totality is required: never empty.
fn fallback_answer(rationale: &str, input: &JudgeInput<'_>) -> String {
    if let Some(line) = rationale
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
    {
        return strip_quotes(line).to_string();
    }
    if input.task.dataset == Dataset::Fever {
        return "NOT ENOUGH INFO".to_string();
    }
    input
        .candidates
        .iter()
        .map(|c| c.answer.trim())
        .find(|a| !a.is_empty())
        .unwrap_or("unknown")
        .to_string()
}

/// Extracts the payload of the last `Complete[...]` occurrence
/// (case-insensitive); the payload extends to the final `]` on that line.
pub fn extract_complete(text: &str) -> Option<String> {
    let pos = rfind_ascii_ci(text, "complete[")?;
    let open = pos + "complete".len(); // index of '['
    let line_end = text[open..]
        .find('\n')
        .map(|i| open + i)
        .unwrap_or(text.len());
    let line = &text[open..line_end];
    let close = line.rfind(']')?;
    let payload = strip_quotes(text[open + 1..open + close].trim());
    if payload.is_empty() {
        None
    } else {
        Some(payload.to_string())
    }
}

fn rfind_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Builds the full judge prompt: the pinned instruction template, the task,
/// one block per candidate (trajectory included when requested), and the
/// debate transcript when one exists. `swap_order` reverses presentation
/// order while keeping the agents' true numbering.
pub fn render_judge_prompt(
    input: &JudgeInput<'_>,
    debate: Option<&DebateTranscript>,
    swap_order: bool,
) -> String {
    let template = if input.include_trajectories {
        prompts::judge_rc_template(input.task.dataset)
    } else {
        prompts::judge_answers_only_template()
    };
    let mut out = String::from(template);
    out.push('\n');
    out.push_str(&format!(
        "{}: {}\n",
        input.task.dataset.question_label(),
        input.task.question
    ));

    let mut order: Vec<usize> = (0..input.candidates.len()).collect();
    if swap_order {
        order.reverse();
    }
    for idx in order {
        let agent_no = idx + 1;
        let candidate = &input.candidates[idx];
        out.push('\n');
        if input.include_trajectories {
            out.push_str(&format!("Agent {agent_no}'s solution:\n"));
            out.push_str(&render_trajectory(&candidate.trajectory));
            out.push_str(&format!(
                "Final Answer (Agent {agent_no}): {}\n",
                candidate.answer
            ));
        } else {
            out.push_str(&format!(
                "Agent {agent_no}'s answer: {}\n",
                candidate.answer
            ));
        }
    }

    if let Some(transcript) = debate {
        if !transcript.arguments.is_empty() {
            out.push_str("\nDebate arguments:\n");
            for arg in &transcript.arguments {
                out.push_str(&format!(
                    "Agent {} (Round {}): {}\n",
                    arg.agent_index, arg.round, arg.text
                ));
            }
        }
    }
    out
}

/// One argument per agent per round; from round 2 on, each debater also sees
/// the opponents' previous-round arguments. Calls within a round run
/// concurrently and are routed per (agent, round) for determinism.
pub async fn run_debate(
    task: &TaskSpec,
    candidates: &[CandidateAnswer],
    config: &JudgeConfig,
    gateway: &Gateway,
) -> Result<DebateTranscript, JudgeError> {
    let mut transcript = DebateTranscript::default();
    for round in 1..=config.debate_rounds {
        let mut join_set = tokio::task::JoinSet::new();
        for (idx, candidate) in candidates.iter().enumerate() {
            let agent_no = idx + 1;
            let prompt = render_debater_prompt(task, candidate, agent_no, round, &transcript);
            let request = CompletionRequest::new(prompt, &config.model_id)
                .with_max_tokens(config.max_tokens)
                .with_route(format!("{}/debate-{agent_no}-round-{round}", task.id));
            let gateway = gateway.clone();
            join_set.spawn(async move {
                let completion = gateway.complete(request).await?;
                Ok::<(usize, String), GatewayError>((agent_no, completion.text))
            });
        }
        let mut round_args = Vec::new();
        while let Some(result) = join_set.join_next().await {
            let (agent_no, text) = result.expect("debater task not cancelled")?;
            round_args.push(DebateArgument {
                agent_index: agent_no,
                round,
                text: text.trim().to_string(),
            });
        }
        round_args.sort_by_key(|a| a.agent_index);
        transcript.arguments.extend(round_args);
    }
    Ok(transcript)
}

/// One debater's prompt: the pinned instruction, the task, the debater's own
/// answer and trajectory, and (from round 2) the opponents' prior arguments.
pub fn render_debater_prompt(
    task: &TaskSpec,
    candidate: &CandidateAnswer,
    agent_no: usize,
    round: u32,
    transcript: &DebateTranscript,
) -> String {
    let mut out = String::from(prompts::debater_template());
    out.push('\n');
    out.push_str(&format!(
        "{}: {}\n",
        task.dataset.question_label(),
        task.question
    ));
    out.push_str(&format!("\nYour final answer: {}\n", candidate.answer));
    out.push_str("\nYour research trajectory:\n");
    out.push_str(&render_trajectory(&candidate.trajectory));
    if round > 1 {
        let prev: Vec<&DebateArgument> = transcript
            .arguments
            .iter()
            .filter(|a| a.round == round - 1 && a.agent_index != agent_no)
            .collect();
        if !prev.is_empty() {
            out.push_str("\nOpponent's argument (previous round):\n");
            for arg in prev {
                out.push_str(&format!("Agent {}: {}\n", arg.agent_index, arg.text));
            }
        }
    }
    out.push_str("\nYour argument:");
    out
}

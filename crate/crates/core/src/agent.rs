//! Single-agent reasoning procedures: the ReAct loop (prompt → thought/action
//! → environment observation → repeat), single-shot chain-of-thought, and
//! standard prompting.

use thiserror::Error;

use crate::env::{EnvError, EnvSession};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, DEFAULT_AGENT_MAX_TOKENS};
use crate::model::{
    parse_action, Action, AnswerStatus, CandidateAnswer, Dataset, ModelError, Step, StepAction,
    TaskSpec, Trajectory,
};
use crate::prompts::{self, PromptError, PromptSet};

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub prompt_set: PromptSet,
    pub temperature: f64,
    pub step_limit: u32,
    pub agent_label: String,
    pub model_id: String,
    pub max_tokens: u32,
    pub sample_index: u32,
}

impl AgentConfig {
    pub fn new(
        prompt_set: PromptSet,
        agent_label: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Self {
        AgentConfig {
            prompt_set,
            temperature: 0.0,
            step_limit: 0, // resolved against the task at run time when 0
            agent_label: agent_label.into(),
            model_id: model_id.into(),
            max_tokens: DEFAULT_AGENT_MAX_TOKENS,
            sample_index: 0,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_sample_index(mut self, i: u32) -> Self {
        self.sample_index = i;
        self
    }

    pub fn with_step_limit(mut self, limit: u32) -> Self {
        self.step_limit = limit;
        self
    }

    fn effective_step_limit(&self, task: &TaskSpec) -> u32 {
        if self.step_limit == 0 {
            task.step_limit
        } else {
            self.step_limit
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentResult {
    pub candidate: CandidateAnswer,
    pub calls_used: u32,
    pub malformed_count: u32,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Runs the reasoning-and-retrieval loop: one completion per step, each
/// parsed into a thought plus an action. Valid actions execute against the
/// environment; a Finish stops the run with its payload (whitespace- and
/// quote-trimmed); malformed emissions consume the step with an instructive
/// observation and the loop continues. Hitting the step limit yields an
/// empty answer with `StepLimitExhausted`.
pub async fn run_react(
    task: &TaskSpec,
    session: &mut EnvSession,
    config: &AgentConfig,
    gateway: &Gateway,
) -> Result<AgentResult, AgentError> {
    let step_limit = config.effective_step_limit(task);
    let route = format!("{}/{}", task.id, config.agent_label);
    let mut trajectory = Trajectory::new(&task.id, &config.agent_label);
    let mut calls_used = 0u32;
    let mut malformed_count = 0u32;

    for index in 1..=step_limit {
        let prompt = prompts::render_react_prompt(
            task.dataset,
            config.prompt_set,
            &task.question,
            &trajectory,
            index,
        )?;
        let req = CompletionRequest::new(prompt, &config.model_id)
            .with_temperature(config.temperature)
            .with_max_tokens(config.max_tokens)
            .with_stop(&["Observation"])
            .with_sample_index(config.sample_index)
            .with_route(&route);
        let completion = gateway.complete(req).await?;
        calls_used += 1;

        let parsed = parse_step_completion(&completion.text, task.dataset);
        match parsed.action {
            Ok(Action::Finish(raw_answer)) => {
                let answer = strip_quotes(raw_answer.trim()).to_string();
                trajectory.push(Step {
                    index,
                    thought: parsed.thought,
                    action: StepAction::Valid(Action::Finish(answer)),
                    observation: String::new(),
                })?;
                return Ok(AgentResult {
                    candidate: CandidateAnswer::finished(trajectory)?,
                    calls_used,
                    malformed_count,
                });
            }
            Ok(action) => {
                let observation = session.execute(&action).await?;
                trajectory.push(Step {
                    index,
                    thought: parsed.thought,
                    action: StepAction::Valid(action),
                    observation,
                })?;
            }
            Err(raw) => {
                malformed_count += 1;
                trajectory.push(Step {
                    index,
                    thought: parsed.thought,
                    action: StepAction::Malformed { raw },
                    observation: invalid_action_observation(task.dataset).to_string(),
                })?;
            }
        }
    }

    Ok(AgentResult {
        candidate: CandidateAnswer::unfinished(trajectory, AnswerStatus::StepLimitExhausted)?,
        calls_used,
        malformed_count,
    })
}

/// Single chain-of-thought completion. The answer is the text after the final
/// `Answer:` label; a completion with no such label collapses to an empty
/// answer. The trajectory keeps the reasoning as one synthetic step so judges
/// can still read it.
pub async fn run_cot(
    task: &TaskSpec,
    config: &AgentConfig,
    gateway: &Gateway,
) -> Result<AgentResult, AgentError> {
    let prompt = prompts::render_cot_prompt(task.dataset, &task.question);
    let stop = format!("\n{}:", task.dataset.question_label());
    let req = CompletionRequest::new(prompt, &config.model_id)
        .with_temperature(config.temperature)
        .with_max_tokens(config.max_tokens)
        .with_stop(&[stop.as_str()])
        .with_sample_index(config.sample_index)
        .with_route(format!("{}/{}", task.id, config.agent_label));
    let completion = gateway.complete(req).await?;

    let mut trajectory = Trajectory::new(&task.id, &config.agent_label);
    let candidate = match split_cot_completion(&completion.text) {
        Some((thought, answer)) => {
            trajectory.push(Step {
                index: 1,
                thought,
                action: StepAction::Valid(Action::Finish(answer)),
                observation: String::new(),
            })?;
            CandidateAnswer::finished(trajectory)?
        }
        None => {
            trajectory.push(Step {
                index: 1,
                thought: strip_label(completion.text.trim(), "Thought").to_string(),
                action: StepAction::Malformed { raw: String::new() },
                observation: String::new(),
            })?;
            CandidateAnswer::unfinished(trajectory, AnswerStatus::CollapsedMalformed)?
        }
    };
    let malformed_count = u32::from(candidate.status == AnswerStatus::CollapsedMalformed);
    Ok(AgentResult {
        candidate,
        calls_used: 1,
        malformed_count,
    })
}

/// Single direct completion; the whole trimmed output (minus an echoed
/// `Answer:` label and surrounding quotes) is the answer.
pub async fn run_standard(
    task: &TaskSpec,
    config: &AgentConfig,
    gateway: &Gateway,
) -> Result<AgentResult, AgentError> {
    let prompt = prompts::render_standard_prompt(task.dataset, config.prompt_set, &task.question)?;
    let stop = format!("\n{}:", task.dataset.question_label());
    let req = CompletionRequest::new(prompt, &config.model_id)
        .with_temperature(config.temperature)
        .with_max_tokens(config.max_tokens)
        .with_stop(&[stop.as_str()])
        .with_sample_index(config.sample_index)
        .with_route(format!("{}/{}", task.id, config.agent_label));
    let completion = gateway.complete(req).await?;

    let answer = strip_quotes(strip_label(completion.text.trim(), "Answer").trim()).to_string();
    let mut trajectory = Trajectory::new(&task.id, &config.agent_label);
    let candidate = if answer.is_empty() {
        trajectory.push(Step {
            index: 1,
            thought: String::new(),
            action: StepAction::Malformed { raw: String::new() },
            observation: String::new(),
        })?;
        CandidateAnswer::unfinished(trajectory, AnswerStatus::CollapsedMalformed)?
    } else {
        trajectory.push(Step {
            index: 1,
            thought: String::new(),
            action: StepAction::Valid(Action::Finish(answer)),
            observation: String::new(),
        })?;
        CandidateAnswer::finished(trajectory)?
    };
    Ok(AgentResult {
        candidate,
        calls_used: 1,
        malformed_count: 0,
    })
}

pub(crate) fn invalid_action_observation(dataset: Dataset) -> &'static str {
    match dataset {
        Dataset::MuSiQue => "Invalid action. Valid actions are: Search[title], Finish[answer].",
        _ => "Invalid action. Valid actions are: Search[entity], Lookup[string], Finish[answer].",
    }
}

struct ParsedStep {
    thought: String,
    /// Parsed action, or the raw action text when nothing parsed.
    action: Result<Action, String>,
}

/// Splits one step completion into thought text and the action line. The
/// thought is everything before the first `Action`/`Action N:` label; among
/// the lines after that label, the first one with a valid `Verb[payload]`
/// shape is the action and the rest is discarded.
fn parse_step_completion(text: &str, dataset: Dataset) -> ParsedStep {
    let Some((label_start, after_label)) = find_action_label(text) else {
        return ParsedStep {
            thought: strip_label(text.trim(), "Thought").trim().to_string(),
            action: Err(String::new()),
        };
    };
    let thought = strip_label(text[..label_start].trim(), "Thought")
        .trim()
        .to_string();
    let tail = &text[after_label..];
    let mut first_candidate: Option<&str> = None;
    for line in tail.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        first_candidate.get_or_insert(line);
        if let Ok(action) = parse_action(line, dataset) {
            return ParsedStep {
                thought,
                action: Ok(action),
            };
        }
    }
    ParsedStep {
        thought,
        action: Err(first_candidate.unwrap_or_default().to_string()),
    }
}

/// Byte offset of the first `Action` (optionally numbered) label and the
/// offset just past its colon.
fn find_action_label(text: &str) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find("Action") {
        let start = search_from + rel;
        // Label must start a line (or the completion).
        let at_line_start = start == 0 || bytes[start - 1] == b'\n';
        let mut cursor = start + "Action".len();
        while cursor < bytes.len() && (bytes[cursor] == b' ' || bytes[cursor].is_ascii_digit()) {
            cursor += 1;
        }
        if at_line_start && cursor < bytes.len() && bytes[cursor] == b':' {
            return Some((start, cursor + 1));
        }
        search_from = start + "Action".len();
    }
    None
}

/// Removes a leading `<label>` / `<label> N` / `<label>:` prefix.
fn strip_label<'a>(text: &'a str, label: &str) -> &'a str {
    let Some(rest) = text.strip_prefix(label) else {
        return text;
    };
    let rest_trimmed = rest.trim_start_matches(|c: char| c == ' ' || c.is_ascii_digit());
    match rest_trimmed.strip_prefix(':') {
        Some(after) => after.trim_start(),
        None => text,
    }
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

/// Thought text and answer from a chain-of-thought completion; the last
/// `Answer:` label wins and its line is the answer.
fn split_cot_completion(text: &str) -> Option<(String, String)> {
    let pos = text.rfind("Answer:")?;
    let thought = strip_label(text[..pos].trim(), "Thought")
        .trim()
        .to_string();
    let after = &text[pos + "Answer:".len()..];
    let mut lines = after.lines();
    let mut answer = lines.next().unwrap_or("").trim();
    if answer.is_empty() {
        answer = lines.map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    }
    let answer = strip_quotes(answer).to_string();
    if answer.is_empty() {
        return None;
    }
    Some((thought, answer))
}

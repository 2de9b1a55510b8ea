//! Domain model for tasks, actions, trajectories, and candidate answers,
//! plus strict parsing and rendering of the agent wire format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Benchmark family a task belongs to. Controls the action space, the
/// question label ("Question:" vs "Claim:"), and the default step limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    HotpotQa,
    Fever,
    MuSiQue,
}

impl Dataset {
    /// Default reasoning budget: 7 steps for multi-hop QA, 5 for fact verification.
    pub fn default_step_limit(self) -> u32 {
        match self {
            Dataset::HotpotQa | Dataset::MuSiQue => 7,
            Dataset::Fever => 5,
        }
    }

    /// Label prefixed to the task text in prompts.
    pub fn question_label(self) -> &'static str {
        match self {
            Dataset::Fever => "Claim",
            _ => "Question",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::HotpotQa => "hotpotqa",
            Dataset::Fever => "fever",
            Dataset::MuSiQue => "musique",
        }
    }
}

impl std::fmt::Display for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dataset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hotpotqa" | "hotpot" => Ok(Dataset::HotpotQa),
            "fever" => Ok(Dataset::Fever),
            "musique" => Ok(Dataset::MuSiQue),
            other => Err(ModelError::UnknownDataset(other.to_string())),
        }
    }
}

/// The set of strings accepted as correct for a task (gold answer plus aliases).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer(pub Vec<String>);

impl GoldAnswer {
    pub fn single(answer: impl Into<String>) -> Self {
        GoldAnswer(vec![answer.into()])
    }

    pub fn answers(&self) -> &[String] {
        &self.0
    }
}

/// One evaluation task: a question (or claim, for fact verification), its gold
/// answer, and the per-dataset execution budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub dataset: Dataset,
    pub question: String,
    pub gold: GoldAnswer,
    /// Per-question evidence paragraphs; present exactly for MuSiQue tasks.
    pub context_paragraphs: Option<Vec<(String, String)>>,
    pub step_limit: u32,
}

impl TaskSpec {
    pub fn new(
        id: impl Into<String>,
        dataset: Dataset,
        question: impl Into<String>,
        gold: GoldAnswer,
    ) -> Self {
        TaskSpec {
            id: id.into(),
            dataset,
            question: question.into(),
            gold,
            context_paragraphs: None,
            step_limit: dataset.default_step_limit(),
        }
    }

    /// Attach the paragraph context. Only valid for MuSiQue tasks.
    pub fn with_context(mut self, paragraphs: Vec<(String, String)>) -> Result<Self, ModelError> {
        if self.dataset != Dataset::MuSiQue {
            return Err(ModelError::ContextNotAllowed(self.dataset));
        }
        self.context_paragraphs = Some(paragraphs);
        Ok(self)
    }

    pub fn with_step_limit(mut self, limit: u32) -> Self {
        self.step_limit = limit;
        self
    }

    /// Checks the cross-field invariants (context presence, positive limit).
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.step_limit == 0 {
            return Err(ModelError::InvalidStepLimit);
        }
        match (self.dataset, &self.context_paragraphs) {
            (Dataset::MuSiQue, None) => Err(ModelError::MissingContext),
            (Dataset::MuSiQue, Some(_)) => Ok(()),
            (other, Some(_)) => Err(ModelError::ContextNotAllowed(other)),
            (_, None) => Ok(()),
        }
    }
}

/// An agent move. `Search`/`Lookup` drive the open-corpus environments
/// (HotpotQA, FEVER); `TitleLookup` drives the per-question paragraph
/// environment (MuSiQue); `Finish` ends the run with an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Action {
    Search(String),
    Lookup(String),
    TitleLookup(String),
    Finish(String),
}

impl Action {
    pub fn payload(&self) -> &str {
        match self {
            Action::Search(p) | Action::Lookup(p) | Action::TitleLookup(p) | Action::Finish(p) => p,
        }
    }

    pub fn is_finish(&self) -> bool {
        matches!(self, Action::Finish(_))
    }

    /// Wire rendering as `Verb[payload]`. MuSiQue title lookups render with
    /// the `Search` verb, matching the transcript convention the agents see.
    pub fn render(&self) -> String {
        match self {
            Action::Search(p) => format!("Search[{p}]"),
            Action::Lookup(p) => format!("Lookup[{p}]"),
            Action::TitleLookup(p) => format!("Search[{p}]"),
            Action::Finish(p) => format!("Finish[{p}]"),
        }
    }
}

/// Parse one action line (any leading `Action N:` label already stripped).
///
/// The verb matches case-insensitively; the payload runs to the final `]` on
/// the line so brackets and commas inside entities survive intact. For
/// MuSiQue, both `Search` and `Lookup` verbs map to a title lookup since that
/// environment has a single retrieval action.
pub fn parse_action(raw: &str, dataset: Dataset) -> Result<Action, MalformedAction> {
    let line = raw.trim();
    let open = line
        .find('[')
        .ok_or_else(|| MalformedAction::no_shape(raw))?;
    let close = line
        .rfind(']')
        .ok_or_else(|| MalformedAction::no_shape(raw))?;
    if close < open {
        return Err(MalformedAction::no_shape(raw));
    }
    let verb = line[..open].trim();
    let payload = line[open + 1..close].trim();
    if payload.is_empty() {
        return Err(MalformedAction {
            raw: raw.to_string(),
            reason: MalformedReason::EmptyPayload,
        });
    }
    let verb_lower = verb.to_ascii_lowercase();
    let action = match (verb_lower.as_str(), dataset) {
        ("search", Dataset::MuSiQue) | ("lookup", Dataset::MuSiQue) => {
            Action::TitleLookup(payload.to_string())
        }
        ("search", _) => Action::Search(payload.to_string()),
        ("lookup", _) => Action::Lookup(payload.to_string()),
        ("finish", _) => Action::Finish(payload.to_string()),
        _ => {
            return Err(MalformedAction {
                raw: raw.to_string(),
                reason: MalformedReason::UnknownVerb(verb.to_string()),
            })
        }
    };
    Ok(action)
}

/// Rejected action line with the raw text preserved for the trajectory log.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed action {raw:?}: {reason}")]
pub struct MalformedAction {
    pub raw: String,
    pub reason: MalformedReason,
}

impl MalformedAction {
    fn no_shape(raw: &str) -> Self {
        MalformedAction {
            raw: raw.to_string(),
            reason: MalformedReason::NoVerbBracketShape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MalformedReason {
    NoVerbBracketShape,
    UnknownVerb(String),
    EmptyPayload,
}

impl std::fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MalformedReason::NoVerbBracketShape => write!(f, "no Verb[payload] shape"),
            MalformedReason::UnknownVerb(v) => write!(f, "unknown verb {v:?}"),
            MalformedReason::EmptyPayload => write!(f, "empty payload"),
        }
    }
}

/// What an agent actually emitted at a step: a valid action, or raw text that
/// failed to parse (kept verbatim so the transcript stays faithful). The two
/// variants serialize to disjoint shapes (`{kind, payload}` vs `{raw}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepAction {
    Valid(Action),
    Malformed { raw: String },
}

impl StepAction {
    pub fn as_valid(&self) -> Option<&Action> {
        match self {
            StepAction::Valid(a) => Some(a),
            StepAction::Malformed { .. } => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            StepAction::Valid(a) => a.render(),
            StepAction::Malformed { raw } => raw.clone(),
        }
    }
}

/// One thought/action/observation triple. Finish steps carry no observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: u32,
    pub thought: String,
    pub action: StepAction,
    pub observation: String,
}

/// The ordered research record of one agent run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub agent_label: String,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(task_id: impl Into<String>, agent_label: impl Into<String>) -> Self {
        Trajectory {
            task_id: task_id.into(),
            agent_label: agent_label.into(),
            steps: Vec::new(),
        }
    }

    /// Appends a step, enforcing consecutive 1-based indices, the
    /// finish-must-be-last rule, and the empty-finish-observation rule.
    pub fn push(&mut self, step: Step) -> Result<(), ModelError> {
        if self.is_finished() {
            return Err(ModelError::StepAfterFinish);
        }
        if step.index as usize != self.steps.len() + 1 {
            return Err(ModelError::NonConsecutiveIndex {
                expected: self.steps.len() as u32 + 1,
                got: step.index,
            });
        }
        if let StepAction::Valid(Action::Finish(_)) = step.action {
            if !step.observation.is_empty() {
                return Err(ModelError::FinishWithObservation);
            }
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_finished(&self) -> bool {
        self.finish_answer().is_some()
    }

    /// Payload of the trailing Finish action, if the trajectory ended with one.
    pub fn finish_answer(&self) -> Option<&str> {
        match self.steps.last().map(|s| &s.action) {
            Some(StepAction::Valid(Action::Finish(answer))) => Some(answer),
            _ => None,
        }
    }
}

/// Deterministic transcript rendering: `Thought i:` / `Action i:` /
/// `Observation i:` blocks, one line each, with no observation line after a
/// Finish step. Rendering an action then re-parsing it yields the same action.
pub fn render_trajectory(trajectory: &Trajectory) -> String {
    let mut out = String::new();
    for step in &trajectory.steps {
        out.push_str(&format!("Thought {}: {}\n", step.index, step.thought));
        out.push_str(&format!(
            "Action {}: {}\n",
            step.index,
            step.action.render()
        ));
        let is_finish = matches!(step.action, StepAction::Valid(Action::Finish(_)));
        if !is_finish {
            out.push_str(&format!(
                "Observation {}: {}\n",
                step.index, step.observation
            ));
        }
    }
    out
}

/// How an agent run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    /// The agent emitted `Finish[answer]`.
    Finished,
    /// The step budget ran out before a Finish action.
    StepLimitExhausted,
    /// The output never took an answerable shape (e.g. a single-shot
    /// completion missing its answer label).
    CollapsedMalformed,
}

/// One agent's final answer together with its full research trajectory.
/// Unfinished runs always carry an empty answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub answer: String,
    pub status: AnswerStatus,
    pub trajectory: Trajectory,
}

impl CandidateAnswer {
    /// Builds a finished candidate; the answer is exactly the Finish payload.
    pub fn finished(trajectory: Trajectory) -> Result<Self, ModelError> {
        let answer = trajectory
            .finish_answer()
            .ok_or(ModelError::NotFinished)?
            .to_string();
        Ok(CandidateAnswer {
            answer,
            status: AnswerStatus::Finished,
            trajectory,
        })
    }

    /// Builds an unfinished candidate (empty answer by invariant).
    pub fn unfinished(trajectory: Trajectory, status: AnswerStatus) -> Result<Self, ModelError> {
        if status == AnswerStatus::Finished {
            return Err(ModelError::NotFinished);
        }
        if trajectory.is_finished() {
            return Err(ModelError::StepAfterFinish);
        }
        Ok(CandidateAnswer {
            answer: String::new(),
            status,
            trajectory,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("step limit must be positive")]
    InvalidStepLimit,
    #[error("context paragraphs are required for musique tasks")]
    MissingContext,
    #[error("context paragraphs are not allowed for {0} tasks")]
    ContextNotAllowed(Dataset),
    #[error("cannot append a step after a Finish action")]
    StepAfterFinish,
    #[error("step index {got} does not follow (expected {expected})")]
    NonConsecutiveIndex { expected: u32, got: u32 },
    #[error("a Finish step must have an empty observation")]
    FinishWithObservation,
    #[error("trajectory does not end with a Finish action")]
    NotFinished,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: u32, thought: &str, action: Action, observation: &str) -> Step {
        Step {
            index,
            thought: thought.to_string(),
            action: StepAction::Valid(action),
            observation: observation.to_string(),
        }
    }

    #[test]
    fn parse_search_action() {
        let action = parse_action("Search[Milhouse]", Dataset::HotpotQa).unwrap();
        assert_eq!(action, Action::Search("Milhouse".to_string()));
    }

    #[test]
    fn parse_finish_preserves_commas() {
        let action = parse_action("Finish[1,800 to 7,000 ft]", Dataset::HotpotQa).unwrap();
        assert_eq!(action, Action::Finish("1,800 to 7,000 ft".to_string()));
    }

    #[test]
    fn parse_payload_with_parentheses() {
        let action =
            parse_action("Search[High Plains (United States)]", Dataset::HotpotQa).unwrap();
        assert_eq!(
            action,
            Action::Search("High Plains (United States)".to_string())
        );
    }

    #[test]
    fn parse_payload_with_inner_brackets() {
        // Payload runs to the final closing bracket on the line.
        let action = parse_action("Search[List of [redacted] things]", Dataset::HotpotQa).unwrap();
        assert_eq!(
            action,
            Action::Search("List of [redacted] things".to_string())
        );
    }

    #[test]
    fn parse_rejects_plain_text() {
        let err = parse_action("I think the answer is yes", Dataset::Fever).unwrap_err();
        assert_eq!(err.reason, MalformedReason::NoVerbBracketShape);
    }

    #[test]
    fn parse_rejects_unknown_verb() {
        let err = parse_action("Browse[Milhouse]", Dataset::HotpotQa).unwrap_err();
        assert!(matches!(err.reason, MalformedReason::UnknownVerb(_)));
    }

    #[test]
    fn parse_rejects_empty_payload() {
        let err = parse_action("Search[  ]", Dataset::HotpotQa).unwrap_err();
        assert_eq!(err.reason, MalformedReason::EmptyPayload);
    }

    #[test]
    fn parse_is_case_insensitive_and_trims() {
        let action = parse_action("  search[ Milhouse ]  ", Dataset::HotpotQa).unwrap();
        assert_eq!(action, Action::Search("Milhouse".to_string()));
        let action = parse_action("FINISH[SUPPORTS]", Dataset::Fever).unwrap();
        assert_eq!(action, Action::Finish("SUPPORTS".to_string()));
    }

    #[test]
    fn musique_maps_search_and_lookup_to_title_lookup() {
        for raw in ["Search[Lion Air]", "Lookup[Lion Air]"] {
            let action = parse_action(raw, Dataset::MuSiQue).unwrap();
            assert_eq!(action, Action::TitleLookup("Lion Air".to_string()));
        }
    }

    #[test]
    fn render_empty_trajectory_is_empty() {
        let t = Trajectory::new("t1", "agent-1");
        assert_eq!(render_trajectory(&t), "");
    }

    #[test]
    fn render_one_step() {
        let mut t = Trajectory::new("t1", "agent-1");
        t.push(step(1, "t1", Action::Search("X".to_string()), "obs"))
            .unwrap();
        assert_eq!(
            render_trajectory(&t),
            "Thought 1: t1\nAction 1: Search[X]\nObservation 1: obs\n"
        );
    }

    #[test]
    fn render_finish_step_has_no_observation_line() {
        let mut t = Trajectory::new("t1", "agent-1");
        t.push(step(1, "found it", Action::Finish("no".to_string()), ""))
            .unwrap();
        assert_eq!(
            render_trajectory(&t),
            "Thought 1: found it\nAction 1: Finish[no]\n"
        );
    }

    #[test]
    fn trajectory_rejects_step_after_finish() {
        let mut t = Trajectory::new("t1", "agent-1");
        t.push(step(1, "done", Action::Finish("x".to_string()), ""))
            .unwrap();
        let err = t
            .push(step(2, "more", Action::Search("Y".to_string()), "obs"))
            .unwrap_err();
        assert_eq!(err, ModelError::StepAfterFinish);
    }

    #[test]
    fn trajectory_rejects_bad_index() {
        let mut t = Trajectory::new("t1", "agent-1");
        let err = t
            .push(step(3, "skip", Action::Search("Y".to_string()), "obs"))
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::NonConsecutiveIndex {
                expected: 1,
                got: 3
            }
        );
    }

    #[test]
    fn candidate_from_finished_trajectory() {
        let mut t = Trajectory::new("t1", "agent-1");
        t.push(step(
            1,
            "done",
            Action::Finish("Richard Nixon".to_string()),
            "",
        ))
        .unwrap();
        let c = CandidateAnswer::finished(t).unwrap();
        assert_eq!(c.answer, "Richard Nixon");
        assert_eq!(c.status, AnswerStatus::Finished);
    }

    #[test]
    fn unfinished_candidate_has_empty_answer() {
        let mut t = Trajectory::new("t1", "agent-1");
        t.push(step(1, "hm", Action::Search("X".to_string()), "obs"))
            .unwrap();
        let c = CandidateAnswer::unfinished(t, AnswerStatus::StepLimitExhausted).unwrap();
        assert_eq!(c.answer, "");
    }

    #[test]
    fn task_context_only_for_musique() {
        let t = TaskSpec::new("q1", Dataset::HotpotQa, "who?", GoldAnswer::single("x"));
        assert!(t.with_context(vec![("a".into(), "b".into())]).is_err());

        let t = TaskSpec::new("q2", Dataset::MuSiQue, "who?", GoldAnswer::single("x"))
            .with_context(vec![("a".into(), "b".into())])
            .unwrap();
        assert!(t.validate().is_ok());
        assert_eq!(t.step_limit, 7);

        let bare = TaskSpec::new("q3", Dataset::MuSiQue, "who?", GoldAnswer::single("x"));
        assert_eq!(bare.validate(), Err(ModelError::MissingContext));
    }

    #[test]
    fn default_step_limits() {
        assert_eq!(Dataset::HotpotQa.default_step_limit(), 7);
        assert_eq!(Dataset::MuSiQue.default_step_limit(), 7);
        assert_eq!(Dataset::Fever.default_step_limit(), 5);
    }
}

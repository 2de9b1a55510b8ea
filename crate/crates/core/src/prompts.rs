//! Prompt catalog. Every template is a plain-text file checked into
//! `prompts/`, compiled in verbatim, with a `{question}`/`{claim}`
//! placeholder for the task text. Rendered output is pinned byte-for-byte by
//! golden tests, so any edit to these files is a deliberate, visible change.

use thiserror::Error;

use crate::model::{render_trajectory, Dataset, Trajectory};

/// Which prompt family an agent runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSet {
    ReActDefault,
    FeverReasoningEnhanced,
    CoT,
    Standard,
    StandardNoConciseness,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt set {set:?} is not available for dataset {dataset}")]
    InvalidForDataset { set: PromptSet, dataset: Dataset },
}

const HOTPOTQA_REACT: &str = include_str!("../prompts/hotpotqa_react.txt");
const HOTPOTQA_COT: &str = include_str!("../prompts/hotpotqa_cot.txt");
const FEVER_REACT: &str = include_str!("../prompts/fever_react.txt");
const FEVER_REACT_ENHANCED: &str = include_str!("../prompts/fever_react_enhanced.txt");
const FEVER_COT: &str = include_str!("../prompts/fever_cot.txt");
const MUSIQUE_REACT: &str = include_str!("../prompts/musique_react.txt");
const MUSIQUE_COT: &str = include_str!("../prompts/musique_cot.txt");
const STANDARD: &str = include_str!("../prompts/standard.txt");
const STANDARD_NO_CONCISENESS: &str = include_str!("../prompts/standard_no_conciseness.txt");
const JUDGE_RC_HOTPOTQA: &str = include_str!("../prompts/judge_rc_hotpotqa.txt");
const JUDGE_RC_FEVER: &str = include_str!("../prompts/judge_rc_fever.txt");
const JUDGE_RC_MUSIQUE: &str = include_str!("../prompts/judge_rc_musique.txt");
const JUDGE_ANSWERS_ONLY: &str = include_str!("../prompts/judge_answers_only.txt");
const DEBATER: &str = include_str!("../prompts/debater.txt");

/// Few-shot template for the reasoning-and-retrieval loop.
pub fn react_template(dataset: Dataset, set: PromptSet) -> Result<&'static str, PromptError> {
    match (dataset, set) {
        (Dataset::HotpotQa, PromptSet::ReActDefault) => Ok(HOTPOTQA_REACT),
        (Dataset::Fever, PromptSet::ReActDefault) => Ok(FEVER_REACT),
        (Dataset::Fever, PromptSet::FeverReasoningEnhanced) => Ok(FEVER_REACT_ENHANCED),
        (Dataset::MuSiQue, PromptSet::ReActDefault) => Ok(MUSIQUE_REACT),
        _ => Err(PromptError::InvalidForDataset { set, dataset }),
    }
}

pub fn cot_template(dataset: Dataset) -> &'static str {
    match dataset {
        Dataset::HotpotQa => HOTPOTQA_COT,
        Dataset::Fever => FEVER_COT,
        Dataset::MuSiQue => MUSIQUE_COT,
    }
}

pub fn standard_template(set: PromptSet) -> Result<&'static str, PromptError> {
    match set {
        PromptSet::Standard => Ok(STANDARD),
        PromptSet::StandardNoConciseness => Ok(STANDARD_NO_CONCISENESS),
        other => Err(PromptError::InvalidForDataset {
            set: other,
            dataset: Dataset::HotpotQa,
        }),
    }
}

pub fn judge_rc_template(dataset: Dataset) -> &'static str {
    match dataset {
        Dataset::HotpotQa => JUDGE_RC_HOTPOTQA,
        Dataset::Fever => JUDGE_RC_FEVER,
        Dataset::MuSiQue => JUDGE_RC_MUSIQUE,
    }
}

pub fn judge_answers_only_template() -> &'static str {
    JUDGE_ANSWERS_ONLY
}

pub fn debater_template() -> &'static str {
    DEBATER
}

fn fill(template: &str, question: &str) -> String {
    template
        .replace("{question}", question)
        .replace("{claim}", question)
}

/// Prompt for step `next_index` of a ReAct run: few-shot transcript, the
/// task, the trajectory so far, and the open `Thought i:` cue.
pub fn render_react_prompt(
    dataset: Dataset,
    set: PromptSet,
    question: &str,
    trajectory: &Trajectory,
    next_index: u32,
) -> Result<String, PromptError> {
    let base = fill(react_template(dataset, set)?, question);
    Ok(format!(
        "{base}{}Thought {next_index}:",
        render_trajectory(trajectory)
    ))
}

/// Single-shot chain-of-thought prompt ending in the open `Thought:` cue.
pub fn render_cot_prompt(dataset: Dataset, question: &str) -> String {
    format!("{}Thought:", fill(cot_template(dataset), question))
}

/// Direct-answer prompt: bare instruction, then the task and an `Answer:` cue.
pub fn render_standard_prompt(
    dataset: Dataset,
    set: PromptSet,
    question: &str,
) -> Result<String, PromptError> {
    let instruction = standard_template(set)?;
    Ok(format!(
        "{instruction}\n{}: {question}\nAnswer:",
        dataset.question_label()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn react_prompt_begins_with_transcript_and_ends_with_cue() {
        let t = Trajectory::new("q1", "agent-1");
        let prompt =
            render_react_prompt(Dataset::HotpotQa, PromptSet::ReActDefault, "Who?", &t, 1).unwrap();
        assert!(prompt.starts_with("Question: What is the elevation range"));
        assert!(prompt.ends_with("Question: Who?\nThought 1:"));
    }

    #[test]
    fn fever_uses_claim_label() {
        let t = Trajectory::new("q1", "agent-1");
        let prompt = render_react_prompt(
            Dataset::Fever,
            PromptSet::ReActDefault,
            "The sky is green.",
            &t,
            1,
        )
        .unwrap();
        assert!(prompt.starts_with("Claim: Nikolaj Coster-Waldau"));
        assert!(prompt.ends_with("Claim: The sky is green.\nThought 1:"));
    }

    #[test]
    fn enhanced_set_is_fever_only() {
        let err = react_template(Dataset::HotpotQa, PromptSet::FeverReasoningEnhanced).unwrap_err();
        assert!(matches!(err, PromptError::InvalidForDataset { .. }));
        assert!(react_template(Dataset::Fever, PromptSet::FeverReasoningEnhanced).is_ok());
    }

    #[test]
    fn musique_react_set_exists() {
        assert!(react_template(Dataset::MuSiQue, PromptSet::ReActDefault).is_ok());
    }

    #[test]
    fn standard_prompt_shape() {
        let prompt =
            render_standard_prompt(Dataset::HotpotQa, PromptSet::Standard, "Who is X?").unwrap();
        assert_eq!(
            prompt,
            "Provide a short answer without explanation. The answer should be in its most concise form.\n\nQuestion: Who is X?\nAnswer:"
        );
        let no_concise = render_standard_prompt(
            Dataset::HotpotQa,
            PromptSet::StandardNoConciseness,
            "Who is X?",
        )
        .unwrap();
        assert!(no_concise.starts_with("Provide an answer to the question.\n"));
    }

    #[test]
    fn cot_prompt_ends_with_thought_cue() {
        let prompt = render_cot_prompt(Dataset::MuSiQue, "Who?");
        assert!(prompt.ends_with("Question: Who?\nThought:"));
    }
}

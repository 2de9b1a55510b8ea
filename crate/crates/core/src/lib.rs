//! Research-and-adjudication framework for multi-hop QA and fact
//! verification: concurrent ReAct-style agents that interleave reasoning with
//! retrieval, a judge that selects or synthesizes a final answer from their
//! full trajectories, the surrounding baseline strategies, and an EM/F1
//! evaluation kit.

pub mod agent;
pub mod env;
pub mod evalkit;
pub mod gateway;
pub mod judge;
pub mod model;
pub mod prompts;
pub mod record;
pub mod strategies;

pub use model::{
    parse_action, render_trajectory, Action, AnswerStatus, CandidateAnswer, Dataset, GoldAnswer,
    Step, StepAction, TaskSpec, Trajectory,
};

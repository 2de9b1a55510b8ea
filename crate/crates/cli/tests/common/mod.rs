//! Shared scripted fixture for pipeline and acceptance tests: a 20-question
//! dataset, a matching corpus, and a script driving the two-agent judged
//! strategy for every question.

use std::path::{Path, PathBuf};

use rcourt_core::gateway::ScriptFile;

pub const N_QUESTIONS: usize = 20;

/// Question cycle: i % 3 == 0 -> identical correct answers (short-circuit),
/// i % 3 == 1 -> one correct/one wrong, judge picks right,
/// i % 3 == 2 -> two different wrong answers, judge picks wrong.
pub fn write_fixture(dir: &Path) -> PathBuf {
    let mut dataset = Vec::new();
    let mut corpus = Vec::new();
    let mut script = ScriptFile::default();
    for i in 1..=N_QUESTIONS {
        let id = format!("q{i}");
        dataset.push(serde_json::json!({
            "_id": id,
            "question": format!("What is fact number {i}?"),
            "answer": format!("gold-{i}"),
        }));
        corpus.push(serde_json::json!({
            "title": format!("Page {i}"),
            "text": format!("Page {i} talks about fact number {i}. The fact is gold-{i}."),
        }));
        let search = format!(" I will check the page.\nAction 1: Search[Page {i}]");
        match i % 3 {
            0 => {
                script.push(format!("{id}/agent-1"), search.clone());
                script.push(
                    format!("{id}/agent-1"),
                    format!(" Found it.\nAction 2: Finish[gold-{i}]"),
                );
                script.push(
                    format!("{id}/agent-2"),
                    format!(" Certain.\nAction 1: Finish[gold-{i}]"),
                );
            }
            1 => {
                script.push(
                    format!("{id}/agent-1"),
                    format!(" Guessing.\nAction 1: Finish[wrong-{i}]"),
                );
                script.push(format!("{id}/agent-2"), search.clone());
                script.push(
                    format!("{id}/agent-2"),
                    format!(" Found it.\nAction 2: Finish[gold-{i}]"),
                );
                script.push(
                    format!("{id}/judge"),
                    format!("Agent 2 grounded its answer in the page.\nAction: Complete[gold-{i}]"),
                );
            }
            _ => {
                script.push(
                    format!("{id}/agent-1"),
                    format!(" Guessing.\nAction 1: Finish[wrongA-{i}]"),
                );
                script.push(
                    format!("{id}/agent-2"),
                    format!(" Also guessing.\nAction 1: Finish[wrongB-{i}]"),
                );
                script.push(
                    format!("{id}/judge"),
                    format!("Neither is grounded; the first sounds better.\nAction: Complete[wrongA-{i}]"),
                );
            }
        }
    }
    std::fs::write(
        dir.join("dataset.json"),
        serde_json::to_vec_pretty(&dataset).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.join("corpus.json"),
        serde_json::to_vec_pretty(&corpus).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.join("script.json"),
        serde_json::to_vec_pretty(&script).unwrap(),
    )
    .unwrap();

    let config = format!(
        r#"
[run]
dataset = "hotpotqa"
dataset_path = "{dataset}"
strategy = "rc"
n_questions = {N_QUESTIONS}
seed = 7
parallelism = 4
output_dir = "{out}"

[model]
model_id = "scripted-model"
backend = "scripted"
script_path = "{script}"

[corpus]
kind = "local"
path = "{corpus}"
"#,
        dataset = dir.join("dataset.json").display(),
        out = dir.join("out").display(),
        script = dir.join("script.json").display(),
        corpus = dir.join("corpus.json").display(),
    );
    let config_path = dir.join("run.toml");
    std::fs::write(&config_path, config).unwrap();
    config_path
}

//! Loaders for the standard public distribution formats: HotpotQA fullwiki
//! JSON, FEVER JSONL, and MuSiQue JSONL. Dataset files are user-supplied
//! paths; nothing is bundled.

use std::path::Path;

use serde::Deserialize;

use super::EvalError;
use crate::model::{Dataset, GoldAnswer, TaskSpec};

/// One loaded question, dataset-agnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    /// The 20 (title, paragraph) pairs; MuSiQue only.
    pub context: Option<Vec<(String, String)>>,
}

impl DatasetItem {
    pub fn to_task(&self, dataset: Dataset) -> TaskSpec {
        let task = TaskSpec::new(
            self.id.clone(),
            dataset,
            self.question.clone(),
            GoldAnswer(self.gold_answers.clone()),
        );
        match (&self.context, dataset) {
            (Some(context), Dataset::MuSiQue) => task
                .with_context(context.clone())
                .expect("musique context attaches to musique task"),
            _ => task,
        }
    }
}

pub fn load_dataset(dataset: Dataset, path: &Path) -> Result<Vec<DatasetItem>, EvalError> {
    match dataset {
        Dataset::HotpotQa => load_hotpotqa(path),
        Dataset::Fever => load_fever(path),
        Dataset::MuSiQue => load_musique(path),
    }
}

#[derive(Deserialize)]
struct HotpotRow {
    #[serde(rename = "_id")]
    id: String,
    question: String,
    answer: String,
}

/// HotpotQA distribution: one JSON array of question objects.
pub fn load_hotpotqa(path: &Path) -> Result<Vec<DatasetItem>, EvalError> {
    let bytes = read(path)?;
    let rows: Vec<HotpotRow> = serde_json::from_slice(&bytes).map_err(|e| EvalError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    rows.into_iter()
        .map(|row| {
            if row.answer.trim().is_empty() {
                return Err(EvalError::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    detail: format!("question {} has an empty answer", row.id),
                });
            }
            Ok(DatasetItem {
                id: row.id,
                question: row.question,
                gold_answers: vec![row.answer],
                context: None,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct FeverRow {
    id: serde_json::Value,
    claim: String,
    label: String,
}

/// FEVER distribution: JSONL with claim and a closed three-way label.
pub fn load_fever(path: &Path) -> Result<Vec<DatasetItem>, EvalError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: FeverRow = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        let label = row.label.to_uppercase();
        if !crate::judge::FEVER_LABELS.contains(&label.as_str()) {
            return Err(EvalError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                detail: format!(
                    "label {:?} is not SUPPORTS/REFUTES/NOT ENOUGH INFO",
                    row.label
                ),
            });
        }
        items.push(DatasetItem {
            id: value_to_id(&row.id),
            question: row.claim,
            gold_answers: vec![label],
            context: None,
        });
    }
    Ok(items)
}

#[derive(Deserialize)]
struct MusiqueRow {
    id: String,
    question: String,
    answer: String,
    #[serde(default)]
    answer_aliases: Vec<String>,
    paragraphs: Vec<MusiqueParagraph>,
}

#[derive(Deserialize)]
struct MusiqueParagraph {
    title: String,
    paragraph_text: String,
}

/// MuSiQue distribution: JSONL with per-question paragraph contexts (relevant
/// passages mixed with distractors).
pub fn load_musique(path: &Path) -> Result<Vec<DatasetItem>, EvalError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: MusiqueRow = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        let mut gold_answers = vec![row.answer];
        gold_answers.extend(row.answer_aliases);
        items.push(DatasetItem {
            id: row.id,
            question: row.question,
            gold_answers,
            context: Some(
                row.paragraphs
                    .into_iter()
                    .map(|p| (p.title, p.paragraph_text))
                    .collect(),
            ),
        });
    }
    Ok(items)
}

fn value_to_id(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, EvalError> {
    std::fs::read(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn loads_hotpotqa_array() {
        let file = write_temp(
            r#"[{"_id": "h1", "question": "Who?", "answer": "Nixon", "context": []},
                {"_id": "h2", "question": "Which?", "answer": "The Saimaa Gesture"}]"#,
            ".json",
        );
        let items = load_hotpotqa(file.path()).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].id, "h1");
        assert_eq!(items[1].gold_answers, vec!["The Saimaa Gesture"]);
        assert!(items[0].context.is_none());
    }

    #[test]
    fn loads_fever_jsonl_and_validates_labels() {
        let file = write_temp(
            "{\"id\": 1, \"claim\": \"C1\", \"label\": \"SUPPORTS\"}\n{\"id\": 2, \"claim\": \"C2\", \"label\": \"not enough info\"}\n",
            ".jsonl",
        );
        let items = load_fever(file.path()).unwrap();
        assert_eq!(items[0].gold_answers, vec!["SUPPORTS"]);
        assert_eq!(items[1].gold_answers, vec!["NOT ENOUGH INFO"]);

        let bad = write_temp(
            "{\"id\": 3, \"claim\": \"C3\", \"label\": \"TRUE\"}\n",
            ".jsonl",
        );
        let err = load_fever(bad.path()).unwrap_err();
        assert!(matches!(err, EvalError::Parse { line: 1, .. }));
    }

    #[test]
    fn loads_musique_jsonl_with_context_and_aliases() {
        let file = write_temp(
            r#"{"id": "m1", "question": "Who?", "answer": "Guterres", "answer_aliases": ["Francisco Guterres"], "paragraphs": [{"idx": 0, "title": "Lion Air", "paragraph_text": "p1", "is_supporting": true}, {"idx": 1, "title": "East Timor", "paragraph_text": "p2", "is_supporting": false}]}"#,
            ".jsonl",
        );
        let items = load_musique(file.path()).unwrap();
        assert_eq!(items[0].gold_answers.len(), 2);
        let context = items[0].context.as_ref().unwrap();
        assert_eq!(context.len(), 2);
        assert_eq!(context[0].0, "Lion Air");

        let task = items[0].to_task(Dataset::MuSiQue);
        assert!(task.validate().is_ok());
        assert_eq!(task.step_limit, 7);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let file = write_temp("{\"id\": 1}\n", ".jsonl");
        let err = load_fever(file.path()).unwrap_err();
        match err {
            EvalError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected: {other}"),
        }
    }
}

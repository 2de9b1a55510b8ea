//! Observation-producing environments: Wikipedia-style Search/Lookup for the
//! open-corpus datasets and per-question paragraph-title lookup for MuSiQue.
//! All mutable lookup state (current page, result cursors) lives in a
//! per-trajectory [`EnvSession`] owned by exactly one agent execution.

mod corpus;
mod wiki;

pub use corpus::{
    normalize_title, rank_similar_titles, segment_sentences, Corpus, CorpusPage, LocalCorpus,
};
pub use wiki::{WikiConfig, WikiCorpus};

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Action, Dataset, TaskSpec};

pub const MAX_EXCERPT_SENTENCES: usize = 5;
pub const MAX_SUGGESTIONS: usize = 5;

/// Result of a search against the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Excerpt(String),
    Suggestions(Vec<String>),
    NotFound,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("corpus unavailable: {0}")]
    CorpusUnavailable(String),
    #[error("musique context paragraphs are missing for this task")]
    MissingContext,
    #[error("action {0:?} is not valid for dataset {1}")]
    ActionNotAllowed(String, Dataset),
}

/// One agent's view of the environment: the page currently in focus and the
/// per-(page, needle) lookup cursors. Sessions are single-owner and never
/// shared between agents; the corpus behind them is shared and read-only.
pub struct EnvSession {
    dataset: Dataset,
    corpus: Arc<dyn Corpus>,
    current_page: Option<CorpusPage>,
    lookup_cursors: HashMap<(String, String), usize>,
    musique_context: Option<Vec<(String, String)>>,
}

impl EnvSession {
    pub fn new(dataset: Dataset, corpus: Arc<dyn Corpus>) -> Self {
        EnvSession {
            dataset,
            corpus,
            current_page: None,
            lookup_cursors: HashMap::new(),
            musique_context: None,
        }
    }

    /// Builds a session for a task, wiring in MuSiQue paragraph context when
    /// the task carries one.
    pub fn for_task(task: &TaskSpec, corpus: Arc<dyn Corpus>) -> Self {
        let mut session = Self::new(task.dataset, corpus);
        session.musique_context = task.context_paragraphs.clone();
        session
    }

    pub fn current_page_title(&self) -> Option<&str> {
        self.current_page.as_ref().map(|p| p.title.as_str())
    }

    /// Runs a non-Finish action and returns the observation text.
    pub async fn execute(&mut self, action: &Action) -> Result<String, EnvError> {
        match (action, self.dataset) {
            (Action::Search(entity), Dataset::HotpotQa | Dataset::Fever) => {
                self.search(entity).await
            }
            (Action::Lookup(needle), Dataset::HotpotQa | Dataset::Fever) => Ok(self.lookup(needle)),
            (Action::TitleLookup(title), Dataset::MuSiQue) => self.title_lookup(title),
            (Action::Finish(_), _) => Ok(String::new()),
            (other, dataset) => Err(EnvError::ActionNotAllowed(other.render(), dataset)),
        }
    }

    /// Search: on an exact (normalized) title match, focus the page and return
    /// its first five sentences joined with single spaces; on a miss, return a
    /// `Could not find` observation with up to five similar titles and leave
    /// the current page untouched.
    pub async fn search(&mut self, entity: &str) -> Result<String, EnvError> {
        match self.search_outcome(entity).await? {
            SearchOutcome::Excerpt(text) => Ok(text),
            SearchOutcome::Suggestions(titles) => Ok(miss_observation(entity, &titles)),
            SearchOutcome::NotFound => Ok(miss_observation(entity, &[])),
        }
    }

    async fn search_outcome(&mut self, entity: &str) -> Result<SearchOutcome, EnvError> {
        if let Some(page) = self.corpus.fetch(entity).await? {
            let excerpt = page
                .sentences
                .iter()
                .take(MAX_EXCERPT_SENTENCES)
                .map(String::as_str)
                .collect::<Vec<_>>()
                .join(" ");
            self.current_page = Some(page);
            return Ok(SearchOutcome::Excerpt(excerpt));
        }
        let suggestions = self.corpus.suggest(entity, MAX_SUGGESTIONS).await?;
        if suggestions.is_empty() {
            Ok(SearchOutcome::NotFound)
        } else {
            Ok(SearchOutcome::Suggestions(suggestions))
        }
    }

    /// Lookup: returns the next sentence of the focused page containing the
    /// needle (case-insensitive substring), numbered `(Result k / n)`. Misses
    /// and exhaustion are observations, never errors.
    pub fn lookup(&mut self, needle: &str) -> String {
        let Some(page) = &self.current_page else {
            return "You must Search for a page first.".to_string();
        };
        let needle_lower = needle.to_lowercase();
        let matches: Vec<&String> = page
            .sentences
            .iter()
            .filter(|s| s.to_lowercase().contains(&needle_lower))
            .collect();
        if matches.is_empty() {
            return "No more results.".to_string();
        }
        let key = (normalize_title(&page.title), needle_lower);
        let cursor = self.lookup_cursors.entry(key).or_insert(0);
        if *cursor >= matches.len() {
            return "No more results.".to_string();
        }
        let observation = format!(
            "(Result {} / {}) {}",
            *cursor + 1,
            matches.len(),
            matches[*cursor]
        );
        *cursor += 1;
        observation
    }

    /// MuSiQue paragraph retrieval by exact normalized title over the task's
    /// context. Duplicate context titles resolve to the first occurrence.
    pub fn title_lookup(&mut self, title: &str) -> Result<String, EnvError> {
        let context = self
            .musique_context
            .as_ref()
            .ok_or(EnvError::MissingContext)?;
        let key = normalize_title(title);
        let mut found: Option<&str> = None;
        let mut duplicates = 0usize;
        for (candidate, paragraph) in context {
            if normalize_title(candidate) == key {
                if found.is_none() {
                    found = Some(paragraph);
                } else {
                    duplicates += 1;
                }
            }
        }
        if duplicates > 0 {
            tracing::warn!(
                title,
                duplicates,
                "duplicate context titles; returning first match"
            );
        }
        if let Some(paragraph) = found {
            return Ok(paragraph.to_string());
        }
        let titles: Vec<String> = context.iter().map(|(t, _)| t.clone()).collect();
        let suggestions = rank_similar_titles(title, &titles, MAX_SUGGESTIONS);
        Ok(miss_observation(title, &suggestions))
    }
}

/// Shape of the miss observation the agents were few-shot on:
/// `Could not find [X]. Similar: ['a', 'b'].`
fn miss_observation(entity: &str, suggestions: &[String]) -> String {
    let list = suggestions
        .iter()
        .map(|t| format!("'{t}'"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("Could not find [{entity}]. Similar: [{list}].")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GoldAnswer;

    fn fixture_corpus() -> Arc<LocalCorpus> {
        Arc::new(LocalCorpus::new(vec![
            (
                "Stranger Things".to_string(),
                "Stranger Things is an American science fiction horror drama television series \
                 created by the Duffer Brothers. Set in the 1980s, primarily in the fictional \
                 town of Hawkins, Indiana, the series centers on a number of mysteries. Sentence \
                 three mentions Hawkins again. Sentence four mentions Hawkins once more. Sentence \
                 five is here. Sentence six never appears in search output."
                    .to_string(),
            ),
            ("Short Page".to_string(), "One. Two. Three.".to_string()),
            (
                "Milhouse".to_string(),
                "Milhouse Mussolini Van Houten is a recurring character. Milhouse was named \
                 after U.S. president Richard Nixon, whose middle name was Milhous."
                    .to_string(),
            ),
        ]))
    }

    fn session(dataset: Dataset) -> EnvSession {
        EnvSession::new(dataset, fixture_corpus())
    }

    #[tokio::test]
    async fn search_returns_at_most_five_sentences() {
        let mut s = session(Dataset::Fever);
        let obs = s.search("Stranger Things").await.unwrap();
        assert!(obs.starts_with("Stranger Things is an American science fiction"));
        assert!(!obs.contains("Sentence six"));
        assert!(obs.contains("Sentence five is here."));
    }

    #[tokio::test]
    async fn search_returns_all_sentences_when_fewer_than_five() {
        let mut s = session(Dataset::HotpotQa);
        let obs = s.search("Short Page").await.unwrap();
        assert_eq!(obs, "One. Two. Three.");
    }

    #[tokio::test]
    async fn search_miss_lists_suggestions_and_keeps_page() {
        let mut s = session(Dataset::Fever);
        s.search("Milhouse").await.unwrap();
        let obs = s.search("Stranger").await.unwrap();
        assert!(obs.starts_with("Could not find [Stranger]. Similar: ["));
        assert!(obs.contains("'Stranger Things'"));
        assert_eq!(s.current_page_title(), Some("Milhouse"));
    }

    #[tokio::test]
    async fn lookup_advances_cursor_then_exhausts() {
        let mut s = session(Dataset::HotpotQa);
        s.search("Stranger Things").await.unwrap();
        let first = s.lookup("Hawkins");
        let second = s.lookup("Hawkins");
        let third = s.lookup("Hawkins");
        assert!(first.starts_with("(Result 1 / 3) "));
        assert!(second.starts_with("(Result 2 / 3) "));
        assert!(third.starts_with("(Result 3 / 3) "));
        assert_eq!(s.lookup("Hawkins"), "No more results.");
    }

    #[tokio::test]
    async fn lookup_single_match_numbering() {
        let mut s = session(Dataset::HotpotQa);
        s.search("Milhouse").await.unwrap();
        let obs = s.lookup("named after");
        assert_eq!(
            obs,
            "(Result 1 / 1) Milhouse was named after U.S. president Richard Nixon, whose middle name was Milhous."
        );
    }

    #[tokio::test]
    async fn lookup_without_page_is_instructive() {
        let mut s = session(Dataset::Fever);
        assert_eq!(s.lookup("anything"), "You must Search for a page first.");
    }

    #[tokio::test]
    async fn lookup_missing_needle() {
        let mut s = session(Dataset::HotpotQa);
        s.search("Short Page").await.unwrap();
        assert_eq!(s.lookup("absent"), "No more results.");
    }

    #[tokio::test]
    async fn new_search_resets_page_but_keeps_other_cursors() {
        let mut s = session(Dataset::HotpotQa);
        s.search("Stranger Things").await.unwrap();
        s.lookup("Hawkins");
        s.search("Milhouse").await.unwrap();
        assert_eq!(s.current_page_title(), Some("Milhouse"));
        // Back to the first page: the cursor continues where it left off.
        s.search("Stranger Things").await.unwrap();
        assert!(s.lookup("Hawkins").starts_with("(Result 2 / 3) "));
    }

    #[tokio::test]
    async fn sessions_are_isolated_under_concurrency() {
        let corpus = fixture_corpus();
        let mut handles = Vec::new();
        for _ in 0..4 {
            let corpus = Arc::clone(&corpus);
            handles.push(tokio::spawn(async move {
                let mut s = EnvSession::new(Dataset::HotpotQa, corpus);
                s.search("Stranger Things").await.unwrap();
                let mut seen = Vec::new();
                for _ in 0..3 {
                    seen.push(s.lookup("Hawkins"));
                }
                seen
            }));
        }
        for handle in handles {
            let seen = handle.await.unwrap();
            assert!(seen[0].starts_with("(Result 1 / 3)"));
            assert!(seen[1].starts_with("(Result 2 / 3)"));
            assert!(seen[2].starts_with("(Result 3 / 3)"));
        }
    }

    fn musique_session(context: Vec<(String, String)>) -> EnvSession {
        let task = TaskSpec::new("m1", Dataset::MuSiQue, "q", GoldAnswer::single("x"))
            .with_context(context)
            .unwrap();
        EnvSession::for_task(&task, fixture_corpus())
    }

    #[test]
    fn title_lookup_returns_paragraph() {
        let mut s = musique_session(vec![
            (
                "Lion Air".to_string(),
                "Lion Air operates from Juanda International Airport.".to_string(),
            ),
            ("Other".to_string(), "Other paragraph.".to_string()),
        ]);
        let obs = s.title_lookup("Lion Air").unwrap();
        assert_eq!(obs, "Lion Air operates from Juanda International Airport.");
    }

    #[test]
    fn title_lookup_miss_suggests_context_titles_only() {
        let mut s = musique_session(vec![
            ("Lion Air".to_string(), "p1".to_string()),
            ("Lion Statue".to_string(), "p2".to_string()),
        ]);
        let obs = s.title_lookup("Lion").unwrap();
        assert!(obs.starts_with("Could not find [Lion]. Similar: ["));
        assert!(obs.contains("'Lion Air'"));
        assert!(obs.contains("'Lion Statue'"));
    }

    #[test]
    fn title_lookup_duplicate_titles_first_wins() {
        let mut s = musique_session(vec![
            ("Dup".to_string(), "first".to_string()),
            ("Dup".to_string(), "second".to_string()),
        ]);
        assert_eq!(s.title_lookup("Dup").unwrap(), "first");
    }

    #[test]
    fn title_lookup_without_context_errors() {
        let mut s = EnvSession::new(Dataset::MuSiQue, fixture_corpus());
        assert!(matches!(s.title_lookup("x"), Err(EnvError::MissingContext)));
    }

    #[tokio::test]
    async fn dataset_gates_action_space() {
        let mut fever = session(Dataset::Fever);
        let err = fever
            .execute(&Action::TitleLookup("x".to_string()))
            .await
            .unwrap_err();
        assert!(matches!(err, EnvError::ActionNotAllowed(_, Dataset::Fever)));

        let mut musique = musique_session(vec![("T".to_string(), "p".to_string())]);
        let obs = musique
            .execute(&Action::TitleLookup("T".to_string()))
            .await
            .unwrap();
        assert_eq!(obs, "p");
    }
}

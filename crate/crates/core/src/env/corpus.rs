use std::collections::HashMap;
use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::EnvError;

/// A titled page split into sentences at load time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPage {
    pub title: String,
    pub sentences: Vec<String>,
}

/// Title-addressed page source. Implementations must be safe for concurrent
/// reads; per-trajectory state lives in [`super::EnvSession`], never here.
#[async_trait]
pub trait Corpus: Send + Sync {
    /// Exact lookup under normalized-title comparison.
    async fn fetch(&self, entity: &str) -> Result<Option<CorpusPage>, EnvError>;

    /// Up to `limit` related titles for a failed lookup.
    async fn suggest(&self, entity: &str, limit: usize) -> Result<Vec<String>, EnvError>;
}

/// Lowercased, whitespace-collapsed title key.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// In-memory corpus loaded from a JSON array of `{"title": ..., "text": ...}`
/// records. This is the backend tests run against.
pub struct LocalCorpus {
    pages: HashMap<String, CorpusPage>,
    titles: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawPage {
    title: String,
    text: String,
}

impl LocalCorpus {
    pub fn new(pages: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut map = HashMap::new();
        let mut titles = Vec::new();
        for (title, text) in pages {
            let key = normalize_title(&title);
            if map.contains_key(&key) {
                tracing::warn!(title = %title, "duplicate corpus title; keeping first occurrence");
                continue;
            }
            titles.push(title.clone());
            map.insert(
                key,
                CorpusPage {
                    title,
                    sentences: segment_sentences(&text),
                },
            );
        }
        LocalCorpus { pages: map, titles }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, EnvError> {
        let bytes = std::fs::read(path).map_err(|e| {
            EnvError::CorpusUnavailable(format!("reading corpus file {}: {e}", path.display()))
        })?;
        let raw: Vec<RawPage> = serde_json::from_slice(&bytes).map_err(|e| {
            EnvError::CorpusUnavailable(format!("parsing corpus file {}: {e}", path.display()))
        })?;
        Ok(Self::new(raw.into_iter().map(|p| (p.title, p.text))))
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

#[async_trait]
impl Corpus for LocalCorpus {
    async fn fetch(&self, entity: &str) -> Result<Option<CorpusPage>, EnvError> {
        Ok(self.pages.get(&normalize_title(entity)).cloned())
    }

    async fn suggest(&self, entity: &str, limit: usize) -> Result<Vec<String>, EnvError> {
        Ok(rank_similar_titles(entity, &self.titles, limit))
    }
}

/// Ranks candidate titles by token overlap with the query, breaking ties with
/// normalized edit distance, then title order for stability. Titles with zero
/// overlap are dropped.
pub fn rank_similar_titles(query: &str, titles: &[String], limit: usize) -> Vec<String> {
    let query_norm = normalize_title(query);
    let query_tokens: Vec<&str> = query_norm.split(' ').filter(|t| !t.is_empty()).collect();
    let mut scored: Vec<(usize, f64, &String)> = titles
        .iter()
        .filter_map(|title| {
            let title_norm = normalize_title(title);
            let title_tokens: Vec<&str> = title_norm.split(' ').collect();
            let overlap = query_tokens
                .iter()
                .filter(|t| title_tokens.contains(*t))
                .count();
            if overlap == 0 {
                return None;
            }
            let dist = edit_distance(&query_norm, &title_norm) as f64
                / query_norm.len().max(title_norm.len()).max(1) as f64;
            Some((overlap, dist, title))
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.2.cmp(b.2))
    });
    scored
        .into_iter()
        .take(limit)
        .map(|(_, _, t)| t.clone())
        .collect()
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Words that end with a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "U.S.", "U.K.", "U.N.", "Dr.", "St.", "Mr.", "Mrs.", "Ms.", "Jr.", "Sr.", "Prof.", "Inc.",
    "Ltd.", "Co.", "Corp.", "vs.", "etc.", "No.", "Mt.", "Gen.", "Lt.", "Col.", "Rev.",
];

/// Splits text into sentences on `.`, `?`, `!` followed by whitespace and an
/// uppercase letter (or end of text), skipping known abbreviations.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for (pos, &(byte_idx, ch)) in chars.iter().enumerate() {
        if !matches!(ch, '.' | '?' | '!') {
            continue;
        }
        let end = byte_idx + ch.len_utf8();
        if ch == '.' && is_abbreviation(text, end) {
            continue;
        }
        // Look ahead: require at least one whitespace char, then an uppercase
        // letter; a period at end-of-text also closes the sentence.
        let mut ahead = pos + 1;
        let mut saw_ws = false;
        while ahead < chars.len() && chars[ahead].1.is_whitespace() {
            saw_ws = true;
            ahead += 1;
        }
        let boundary = if ahead >= chars.len() {
            true
        } else {
            saw_ws && chars[ahead].1.is_uppercase()
        };
        if boundary {
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_string());
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

fn is_abbreviation(text: &str, end: usize) -> bool {
    let head = &text[..end];
    let word_start = head
        .rfind(|c: char| c.is_whitespace())
        .map(|i| i + 1)
        .unwrap_or(0);
    let word = &head[word_start..];
    ABBREVIATIONS.contains(&word)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_plain_sentences() {
        let text = "First sentence. Second sentence. Third one!";
        assert_eq!(
            segment_sentences(text),
            vec!["First sentence.", "Second sentence.", "Third one!"]
        );
    }

    #[test]
    fn keeps_abbreviations_together() {
        let text = "Milhouse was named after U.S. president Richard Nixon, whose middle name was Milhous. The rest follows.";
        let sentences = segment_sentences(text);
        assert_eq!(sentences.len(), 2);
        assert!(sentences[0].contains("U.S. president Richard Nixon"));
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        let text = "It rose to 7,000 ft (2,130 m). the rest is lowercase so no split here.";
        // Only the end-of-text boundary closes this one: a single sentence.
        assert_eq!(segment_sentences(text).len(), 1);
    }

    #[test]
    fn question_and_exclamation_split() {
        let text = "Is it set in Indiana? Yes it is! Good.";
        assert_eq!(segment_sentences(text).len(), 3);
    }

    #[test]
    fn local_corpus_fetch_is_title_normalized() {
        let corpus = LocalCorpus::new(vec![(
            "Stranger Things".to_string(),
            "Stranger Things is a series. It is set in Hawkins.".to_string(),
        )]);
        let page = futures_block(corpus.fetch("  stranger   THINGS "))
            .unwrap()
            .unwrap();
        assert_eq!(page.title, "Stranger Things");
        assert_eq!(page.sentences.len(), 2);
    }

    #[test]
    fn duplicate_titles_keep_first() {
        let corpus = LocalCorpus::new(vec![
            ("Page".to_string(), "First version.".to_string()),
            ("page".to_string(), "Second version.".to_string()),
        ]);
        let page = futures_block(corpus.fetch("Page")).unwrap().unwrap();
        assert_eq!(page.sentences[0], "First version.");
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn suggestions_rank_by_overlap_and_cap() {
        let titles: Vec<String> = [
            "Beautiful",
            "Beautiful, Beautiful",
            "A Beautiful Mind (film)",
            "Beautiful (Christina Aguilera song)",
            "Life Is Beautiful",
            "Beautiful Day",
            "Unrelated Page",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let ranked = rank_similar_titles("Beautiful", &titles, 5);
        assert_eq!(ranked.len(), 5);
        assert_eq!(ranked[0], "Beautiful");
        assert!(!ranked.contains(&"Unrelated Page".to_string()));
    }

    #[test]
    fn suggestions_empty_when_no_overlap() {
        let titles = vec!["Alpha".to_string(), "Beta".to_string()];
        assert!(rank_similar_titles("Gamma", &titles, 5).is_empty());
    }

    fn futures_block<F: std::future::Future>(f: F) -> F::Output {
        tokio::runtime::Builder::new_current_thread()
            .build()
            .unwrap()
            .block_on(f)
    }
}

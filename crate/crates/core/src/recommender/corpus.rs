//! Suggestion corpus: JSONL loading, validation, and the (emotion, language)
//! index.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize;
use crate::labels::{Emotion, Language};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: emotion {value:?} is not one of anger, fear, sadness")]
    InvalidEmotion { line: usize, value: String },
    #[error("line {line}: language {value:?} is not en or fa")]
    InvalidLanguage { line: usize, value: String },
    #[error("line {line}: text has no tokens")]
    EmptyText { line: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub emotion: Emotion,
    pub language: Language,
    pub text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuggestion {
    id: String,
    emotion: String,
    language: String,
    text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuggestionCorpus {
    entries: Vec<Suggestion>,
    index: BTreeMap<(Emotion, Language), Vec<usize>>,
}

impl SuggestionCorpus {
    /// Validates ids, emotions, and texts. Errors report 1-based positions.
    pub fn new(entries: Vec<Suggestion>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut index: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, s) in entries.iter().enumerate() {
            let line = i + 1;
            if !s.emotion.is_negative() {
                return Err(CorpusError::InvalidEmotion {
                    line,
                    value: s.emotion.to_string(),
                });
            }
            if tokenize(&s.text).is_empty() {
                return Err(CorpusError::EmptyText { line });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId { line, id: s.id.clone() });
            }
            index.entry((s.emotion, s.language)).or_default().push(i);
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[Suggestion] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Suggestion> {
        self.entries.iter().find(|s| s.id == id)
    }

    pub fn bucket(&self, emotion: Emotion, language: Language) -> impl Iterator<Item = &Suggestion> {
        self.index
            .get(&(emotion, language))
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    pub fn in_language(&self, language: Language) -> impl Iterator<Item = &Suggestion> {
        self.entries.iter().filter(move |s| s.language == language)
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|s| serde_json::to_string(s).expect("suggestion serializes") + "\n")
            .collect()
    }
}

/// Parses JSONL text. Blank lines are skipped; line numbers in errors are
/// 1-based positions in the file.
pub fn parse_suggestions(text: &str) -> Result<SuggestionCorpus, CorpusError> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let r: RawSuggestion = serde_json::from_str(raw).map_err(|e| CorpusError::ParseError {
            line,
            message: e.to_string(),
        })?;
        let emotion = match r.emotion.parse::<Emotion>() {
            Ok(e) if e.is_negative() && r.emotion == e.name() => e,
            _ => return Err(CorpusError::InvalidEmotion { line, value: r.emotion }),
        };
        let language = r
            .language
            .parse::<Language>()
            .map_err(|_| CorpusError::InvalidLanguage {
                line,
                value: r.language.clone(),
            })?;
        entries.push(Suggestion {
            id: r.id,
            emotion,
            language,
            text: r.text,
        });
        lines.push(line);
    }
    // re-map entry positions to file lines
    SuggestionCorpus::new(entries).map_err(|e| match e {
        CorpusError::DuplicateId { line, id } => CorpusError::DuplicateId { line: lines[line - 1], id },
        CorpusError::EmptyText { line } => CorpusError::EmptyText { line: lines[line - 1] },
        other => other,
    })
}

pub fn load_suggestions(path: impl AsRef<Path>) -> Result<SuggestionCorpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_suggestions(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, emotion: &str, language: &str, text: &str) -> String {
        serde_json::json!({"id": id, "emotion": emotion, "language": language, "text": text}).to_string()
    }

    #[test]
    fn parses_and_indexes() {
        let text = [
            line("a1", "anger", "en", "Take a deep breath"),
            String::new(),
            line("f1", "fear", "fa", "ترس را به اقدامات مثبت تبدیل کنید"),
        ]
        .join("\n");
        let corpus = parse_suggestions(&text).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.bucket(Emotion::Fear, Language::Fa).count(), 1);
        assert_eq!(corpus.bucket(Emotion::Fear, Language::En).count(), 0);
        assert_eq!(parse_suggestions(&corpus.to_jsonl()).unwrap(), corpus);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_suggestions("").unwrap().is_empty());
        assert!(parse_suggestions("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn error_paths() {
        let ok = line("a1", "anger", "en", "Take a deep breath");
        let err = parse_suggestions(&format!("{ok}\n{{not json")).unwrap_err();
        assert!(matches!(err, CorpusError::ParseError { line: 2, .. }), "{err}");

        let err = parse_suggestions(&format!("{ok}\n\n{ok}")).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 3, ref id } if id == "a1"), "{err}");

        let err = parse_suggestions(&line("h", "happiness", "en", "Smile")).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidEmotion { line: 1, .. }), "{err}");

        let err = parse_suggestions(&line("x", "anger", "de", "Atmen")).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidLanguage { line: 1, .. }), "{err}");

        let extra = r#"{"id":"a","emotion":"anger","language":"en","text":"t","extra":1}"#;
        assert!(matches!(parse_suggestions(extra), Err(CorpusError::ParseError { line: 1, .. })));
        let missing = r#"{"id":"a","emotion":"anger","language":"en"}"#;
        assert!(matches!(parse_suggestions(missing), Err(CorpusError::ParseError { line: 1, .. })));

        let err = parse_suggestions(&line("p", "anger", "en", "?!")).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { line: 1 }), "{err}");
    }
}

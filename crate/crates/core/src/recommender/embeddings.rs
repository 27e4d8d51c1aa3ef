//! Word-vector tables in the plain-text `token v1 ... vd` format.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::nn::Tensor;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding file has no vectors")]
    EmptyFile,
    #[error("line {line}: expected {expected} values, found {found}")]
    InconsistentDimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Frozen `V x d` table. Row `V` is the implicit all-zero slot for tokens
/// outside the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
    vectors: Tensor,
}

impl EmbeddingTable {
    pub fn new(tokens: Vec<String>, vectors: Tensor) -> Result<Self, EmbeddingError> {
        let [v, _] = *vectors.shape() else {
            return Err(EmbeddingError::ParseError {
                line: 0,
                message: format!("vectors must be V x d, got {:?}", vectors.shape()),
            });
        };
        if tokens.len() != v {
            return Err(EmbeddingError::ParseError {
                line: 0,
                message: format!("{} tokens for {v} rows", tokens.len()),
            });
        }
        let mut lookup = HashMap::with_capacity(v);
        for (i, t) in tokens.iter().enumerate() {
            if lookup.insert(t.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateToken {
                    line: i + 1,
                    token: t.clone(),
                });
            }
        }
        Ok(Self { tokens, lookup, vectors })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    /// Row index of `token`, or [`Self::oov_index`].
    pub fn index(&self, token: &str) -> usize {
        self.lookup.get(token).copied().unwrap_or(self.tokens.len())
    }

    pub fn oov_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        match self.lookup.get(token) {
            Some(&i) => self.vectors.data()[i * self.dim()..(i + 1) * self.dim()].to_vec(),
            None => vec![0.0; self.dim()],
        }
    }

    /// Text form; `{}` formatting of f64 round-trips exactly.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            for v in &self.vectors.data()[i * d..(i + 1) * d] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the text format. Blank lines are skipped.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, EmbeddingError> {
    let mut tokens = Vec::new();
    let mut lookup = HashMap::new();
    let mut values = Vec::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut fields = raw.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let row = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EmbeddingError::ParseError {
                        line,
                        message: format!("invalid value {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let expected = *dim.get_or_insert(row.len());
        if row.len() != expected || expected == 0 {
            return Err(EmbeddingError::InconsistentDimension {
                line,
                expected,
                found: row.len(),
            });
        }
        if lookup.insert(token.to_string(), tokens.len()).is_some() {
            return Err(EmbeddingError::DuplicateToken {
                line,
                token: token.to_string(),
            });
        }
        tokens.push(token.to_string());
        values.extend(row);
    }
    let Some(d) = dim else {
        return Err(EmbeddingError::EmptyFile);
    };
    let vectors = Tensor::from_vec(&[tokens.len(), d], values).expect("validated rows");
    Ok(EmbeddingTable { tokens, lookup, vectors })
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table() {
        let table = parse_embeddings("calm 0.1 0.2 0.3\nfear -1 0 1e-2\n").unwrap();
        assert_eq!((table.vocab_size(), table.dim()), (2, 3));
        assert_eq!(table.vector("fear"), vec![-1.0, 0.0, 0.01]);
        assert_eq!(table.index("nope"), 2);
        assert_eq!(table.vector("nope"), vec![0.0; 3]);
        assert_eq!(parse_embeddings(&table.to_text()).unwrap(), table);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse_embeddings(""), Err(EmbeddingError::EmptyFile)));
        assert!(matches!(parse_embeddings("\n\n"), Err(EmbeddingError::EmptyFile)));
        assert!(matches!(
            parse_embeddings("a 1 2 3\nb 1 2 3 4"),
            Err(EmbeddingError::InconsistentDimension {
                line: 2,
                expected: 3,
                found: 4
            })
        ));
        assert!(matches!(
            parse_embeddings("a 1 2\nb 3 4\na 5 6"),
            Err(EmbeddingError::DuplicateToken { line: 3, .. })
        ));
        assert!(matches!(
            parse_embeddings("a 1 x"),
            Err(EmbeddingError::ParseError { line: 1, .. })
        ));
        assert!(matches!(
            parse_embeddings("lonely"),
            Err(EmbeddingError::InconsistentDimension { line: 1, .. })
        ));
    }
}

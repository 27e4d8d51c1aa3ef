//! Suggestion recommender: an LSTM over frozen word vectors classifies each
//! candidate sentence into anger, fear, or sadness, and the detected emotion's
//! probability ranks the candidates.

mod corpus;
mod embeddings;
mod train;

pub use corpus::{load_suggestions, parse_suggestions, CorpusError, Suggestion, SuggestionCorpus};
pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingError, EmbeddingTable};
pub use train::{evaluate_rec, split_corpus, train_rec, RecMetrics};

use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{Emotion, Language};
use crate::nn::checkpoint::{Checkpoint, CheckpointError, ModelKind};
use crate::nn::{embedding_lookup, rng, softmax, Dense, Lstm, LstmTrace, NnError, Param, Parameterized};

/// Token sequences are truncated to this length.
pub const MAX_TOKENS: usize = 32;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Error)]
pub enum RecError {
    #[error("token sequence is empty")]
    EmptyTokenSequence,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no suggestions in language {0}")]
    InsufficientCandidates(Language),
    #[error("{0} is not a negative emotion")]
    NotNegative(Emotion),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

static PUNCTUATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").expect("valid regex"));

/// Lowercases, drops Unicode punctuation, and splits on whitespace. ZWNJ is
/// neither punctuation nor whitespace, so Persian compounds stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    PUNCTUATION
        .replace_all(&lowered, "")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// LSTM sentence classifier over a frozen embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct RecModel {
    table: Arc<EmbeddingTable>,
    pub lstm: Lstm,
    pub head: Dense,
}

pub struct RecTrace {
    lstm: LstmTrace,
    pub logits: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RecMetadata {
    hidden: usize,
    vocab: Vec<String>,
}

impl RecModel {
    pub fn new(table: Arc<EmbeddingTable>, hidden: usize, seed: u64) -> Self {
        let lstm = Lstm::new("lstm", table.dim(), hidden, &mut rng::stream(seed, 0));
        let head = Dense::new("head", hidden, 3, &mut rng::stream(seed, 1));
        Self { table, lstm, head }
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// Table indices of the first [`MAX_TOKENS`] tokens.
    pub fn indices(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().take(MAX_TOKENS).map(|t| self.table.index(t)).collect()
    }

    pub fn forward_trace(&self, indices: &[usize]) -> Result<RecTrace, RecError> {
        if indices.is_empty() {
            return Err(RecError::EmptyTokenSequence);
        }
        let inputs = embedding_lookup(self.table.vectors(), indices)?;
        let lstm = self.lstm.forward(&inputs)?;
        let logits = self.head.forward(lstm.final_hidden())?;
        Ok(RecTrace { lstm, logits })
    }

    /// Accumulates LSTM and head gradients; the table stays frozen.
    pub fn backward(&mut self, trace: &RecTrace, grad_logits: &[f64]) -> Result<(), RecError> {
        let grad_final = self.head.backward(grad_logits, trace.lstm.final_hidden())?;
        let steps = trace.lstm.hidden_states().len();
        let mut grad_hidden = vec![vec![0.0; grad_final.len()]; steps];
        grad_hidden[steps - 1] = grad_final;
        self.lstm.backward(&trace.lstm, &grad_hidden)?;
        Ok(())
    }

    /// The embedding table travels with the weights so a checkpoint is
    /// self-contained.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::to_string(&RecMetadata {
            hidden: self.lstm.hidden_size(),
            vocab: self.table.tokens().to_vec(),
        })
        .expect("metadata serializes");
        let mut ck = Checkpoint::new(ModelKind::Rec, meta);
        ck.push("embedding.table", self.table.vectors().clone());
        for p in self.params() {
            ck.push(p.name.clone(), p.value.clone());
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, RecError> {
        ck.expect_kind(ModelKind::Rec)?;
        let meta: RecMetadata =
            serde_json::from_str(&ck.metadata).map_err(|e| CheckpointError::Metadata(e.to_string()))?;
        let table = EmbeddingTable::new(meta.vocab, ck.tensor("embedding.table")?.clone())
            .map_err(|e| CheckpointError::Metadata(e.to_string()))?;
        let mut model = RecModel::new(Arc::new(table), meta.hidden, 0);
        for p in model.params_mut() {
            let t = ck.tensor(&p.name)?;
            if t.shape() != p.value.shape() {
                return Err(CheckpointError::InvalidTensor {
                    name: p.name.clone(),
                    reason: format!("shape {:?}, expected {:?}", t.shape(), p.value.shape()),
                }
                .into());
            }
            *p = Param::new(p.name.clone(), t.clone());
        }
        Ok(model)
    }
}

impl Parameterized for RecModel {
    fn params(&self) -> Vec<&Param> {
        let mut out = self.lstm.params();
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.lstm.params_mut();
        out.extend(self.head.params_mut());
        out
    }
}

/// Probabilities of anger, fear, and sadness (in that order) for a token
/// sequence.
pub fn rec_forward(model: &RecModel, tokens: &[String]) -> Result<[f64; 3], RecError> {
    let trace = model.forward_trace(&model.indices(tokens))?;
    let p = softmax(&trace.logits);
    Ok([p[0], p[1], p[2]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub suggestions: Vec<Suggestion>,
    /// Fewer than `k` candidates existed in the language.
    pub truncated: bool,
}

/// Top-`k` suggestions in `language` ranked by the model's probability of
/// `emotion`; ties go to the smaller id.
pub fn recommend(
    corpus: &SuggestionCorpus,
    model: &RecModel,
    emotion: Emotion,
    language: Language,
    k: usize,
) -> Result<Recommendation, RecError> {
    if !emotion.is_negative() {
        return Err(RecError::NotNegative(emotion));
    }
    let mut scored = corpus
        .in_language(language)
        .map(|s| Ok((rec_forward(model, &tokenize(&s.text))?[emotion.index()], s)))
        .collect::<Result<Vec<_>, RecError>>()?;
    if scored.is_empty() {
        return Err(RecError::InsufficientCandidates(language));
    }
    scored.sort_by(|(pa, a), (pb, b)| pb.total_cmp(pa).then_with(|| a.id.cmp(&b.id)));
    let truncated = scored.len() < k;
    Ok(Recommendation {
        suggestions: scored.into_iter().take(k).map(|(_, s)| s.clone()).collect(),
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::gradient_check;
    use crate::nn::softmax_cross_entropy;

    fn table() -> Arc<EmbeddingTable> {
        let mut r = rng::stream(5, 0);
        let tokens: Vec<String> = ["take", "a", "deep", "breath", "walk"].iter().map(|s| s.to_string()).collect();
        let vectors = crate::nn::rng::glorot_uniform(&mut r, &[5, 8], 8, 8);
        Arc::new(EmbeddingTable::new(tokens, vectors).unwrap())
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer() {
        assert_eq!(toks("Take a deep breath"), ["take", "a", "deep", "breath"]);
        assert_eq!(toks("Take a deep breath!"), ["take", "a", "deep", "breath"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("you're fine, OK?"), ["youre", "fine", "ok"]);
        assert_eq!(toks("به موسیقی آرامش\u{200c}بخش گوش دهید."), ["به", "موسیقی", "آرامش\u{200c}بخش", "گوش", "دهید"]);
        assert_eq!(toks("چرا؟ «آرام»"), ["چرا", "آرام"]);
    }

    #[test]
    fn unknown_tokens_give_uniform() {
        let model = RecModel::new(table(), 16, 3);
        let p = rec_forward(&model, &toks("zzz qqq")).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = rec_forward(&model, &toks("take a walk")).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(rec_forward(&model, &[]), Err(RecError::EmptyTokenSequence)));
    }

    #[test]
    fn long_inputs_are_capped() {
        let model = RecModel::new(table(), 8, 3);
        let long: Vec<String> = (0..40).map(|i| if i % 2 == 0 { "deep" } else { "walk" }.to_string()).collect();
        assert_eq!(model.indices(&long).len(), MAX_TOKENS);
        assert_eq!(
            rec_forward(&model, &long).unwrap(),
            rec_forward(&model, &long[..MAX_TOKENS]).unwrap()
        );
    }

    #[test]
    fn full_model_gradient_check() {
        let mut model = RecModel::new(table(), 8, 7);
        let indices = model.indices(&toks("deep breath walk"));
        let frozen = model.table().clone();
        let report = gradient_check(
            &mut model,
            |m| {
                let trace = m.forward_trace(&indices).unwrap();
                let (loss, grad) = softmax_cross_entropy(&trace.logits, 2).unwrap();
                m.backward(&trace, &grad).unwrap();
                loss
            },
            1e-3,
        );
        // 4h(d + h + 1) + 3h + 3 with d = h = 8
        assert_eq!(report.checked, 4 * 8 * 17 + 27);
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert_eq!(model.table(), &frozen);
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = RecModel::new(table(), 8, 1);
        let bytes = model.to_checkpoint().to_bytes();
        let back = RecModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_checkpoint().to_bytes(), bytes);
    }

    fn corpus(entries: &[(&str, Emotion, Language, &str)]) -> SuggestionCorpus {
        SuggestionCorpus::new(
            entries
                .iter()
                .map(|(id, e, l, t)| Suggestion {
                    id: id.to_string(),
                    emotion: *e,
                    language: *l,
                    text: t.to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn recommend_rules() {
        let model = RecModel::new(table(), 8, 2);
        let c = corpus(&[
            ("b", Emotion::Fear, Language::Fa, "ترس"),
            ("a", Emotion::Fear, Language::Fa, "آرام"),
            ("z", Emotion::Anger, Language::En, "take a deep breath"),
        ]);
        // both Persian texts are out of vocabulary: equal scores, id order
        let r = recommend(&c, &model, Emotion::Fear, Language::Fa, 3).unwrap();
        assert!(r.truncated);
        let ids: Vec<_> = r.suggestions.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);

        let only_fa = corpus(&[("b", Emotion::Fear, Language::Fa, "ترس")]);
        assert!(matches!(
            recommend(&only_fa, &model, Emotion::Anger, Language::En, 3),
            Err(RecError::InsufficientCandidates(Language::En))
        ));
        assert!(matches!(
            recommend(&c, &model, Emotion::Happiness, Language::En, 3),
            Err(RecError::NotNegative(_))
        ));
        assert!(matches!(
            recommend(&SuggestionCorpus::default(), &model, Emotion::Anger, Language::En, 3),
            Err(RecError::InsufficientCandidates(_))
        ));
    }
}

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{tokenize, RecError, RecModel, SuggestionCorpus};
use crate::labels::{argmax, Emotion};
use crate::nn::{rng, softmax_cross_entropy, Parameterized};
use crate::ser::{EpochReport, TrainConfig, TrainReport};

/// Mini-batch Adam on softmax cross-entropy against each suggestion's
/// labeled emotion. Only the LSTM and the head are updated.
pub fn train_rec(model: &mut RecModel, corpus: &SuggestionCorpus, config: &TrainConfig) -> Result<TrainReport, RecError> {
    config.validate().map_err(RecError::InvalidConfig)?;
    if corpus.is_empty() {
        return Err(RecError::EmptyCorpus);
    }
    let examples: Vec<(Vec<usize>, usize)> = corpus
        .entries()
        .iter()
        .map(|s| (model.indices(&tokenize(&s.text)), s.emotion.index()))
        .collect();

    let mut adam = config.adam();
    let mut report = TrainReport::default();
    for (epoch, order) in config.epoch_orders(examples.len()).enumerate() {
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            model.zero_grad();
            for &i in batch {
                let (indices, label) = &examples[i];
                let trace = model.forward_trace(indices)?;
                let (loss, grad) = softmax_cross_entropy(&trace.logits, *label)?;
                loss_sum += loss;
                correct += usize::from(argmax(&trace.logits) == *label);
                model.backward(&trace, &grad)?;
            }
            model.scale_grads(1.0 / batch.len() as f64);
            adam.update(&mut model.params_mut())?;
        }
        report.epochs.push(EpochReport {
            epoch: epoch + 1,
            loss: loss_sum / examples.len() as f64,
            accuracy: correct as f64 / examples.len() as f64,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecMetrics {
    pub accuracy: f64,
    pub total: usize,
    /// `confusion[true][predicted]` over anger, fear, sadness.
    pub confusion: [[usize; 3]; 3],
}

/// Sentence-to-emotion classification accuracy over `corpus`.
pub fn evaluate_rec(model: &RecModel, corpus: &SuggestionCorpus) -> Result<RecMetrics, RecError> {
    if corpus.is_empty() {
        return Err(RecError::EmptyCorpus);
    }
    let mut confusion = [[0usize; 3]; 3];
    for s in corpus.entries() {
        let p = super::rec_forward(model, &tokenize(&s.text))?;
        confusion[s.emotion.index()][argmax(&p)] += 1;
    }
    let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
    Ok(RecMetrics {
        accuracy: correct as f64 / corpus.len() as f64,
        total: corpus.len(),
        confusion,
    })
}

/// Seeded split stratified by (emotion, language); each bucket sends
/// `round(n * validation_fraction)` entries to validation.
pub fn split_corpus(
    corpus: &SuggestionCorpus,
    validation_fraction: f64,
    seed: u64,
) -> Result<(SuggestionCorpus, SuggestionCorpus), RecError> {
    let mut r = rng::stream(seed, 65);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for emotion in Emotion::NEGATIVE {
        for language in crate::labels::Language::ALL {
            let mut bucket: Vec<_> = corpus.bucket(emotion, language).cloned().collect();
            bucket.shuffle(&mut r);
            let n_val = (bucket.len() as f64 * validation_fraction).round() as usize;
            let rest = bucket.split_off(n_val);
            val.extend(bucket);
            train.extend(rest);
        }
    }
    Ok((SuggestionCorpus::new(train)?, SuggestionCorpus::new(val)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Language;
    use crate::recommender::{EmbeddingTable, Suggestion};
    use crate::nn::Tensor;
    use std::sync::Arc;

    fn setup() -> (RecModel, SuggestionCorpus) {
        let tokens: Vec<String> = ["calm", "brave", "walk", "now"].iter().map(|s| s.to_string()).collect();
        let vectors = Tensor::from_vec(
            &[4, 3],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.1, 0.1, 0.1],
        )
        .unwrap();
        let table = Arc::new(EmbeddingTable::new(tokens, vectors).unwrap());
        let entries = [("a", Emotion::Anger, "calm now"), ("f", Emotion::Fear, "brave now"), ("s", Emotion::Sadness, "walk now")]
            .iter()
            .map(|(id, e, t)| Suggestion {
                id: id.to_string(),
                emotion: *e,
                language: Language::En,
                text: t.to_string(),
            })
            .collect();
        (RecModel::new(table, 8, 4), SuggestionCorpus::new(entries).unwrap())
    }

    #[test]
    fn learns_and_keeps_table_frozen() {
        let (mut model, corpus) = setup();
        let before = model.table().clone();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 3,
            learning_rate: 1e-2,
            seed: 1,
            shuffle: true,
        };
        let report = train_rec(&mut model, &corpus, &cfg).unwrap();
        assert_eq!(report.epochs.len(), 60);
        assert_eq!(model.table(), &before);
        assert_eq!(evaluate_rec(&model, &corpus).unwrap().accuracy, 1.0);
    }

    #[test]
    fn deterministic_and_error_paths() {
        let (model, corpus) = setup();
        let cfg = TrainConfig {
            epochs: 3,
            seed: 2,
            ..TrainConfig::default()
        };
        let (mut a, mut b) = (model.clone(), model.clone());
        assert_eq!(train_rec(&mut a, &corpus, &cfg).unwrap(), train_rec(&mut b, &corpus, &cfg).unwrap());
        assert_eq!(a, b);
        let mut m = model.clone();
        assert!(matches!(
            train_rec(&mut m, &SuggestionCorpus::default(), &cfg),
            Err(RecError::EmptyCorpus)
        ));
        assert!(matches!(evaluate_rec(&m, &SuggestionCorpus::default()), Err(RecError::EmptyCorpus)));
    }

    #[test]
    fn split_keeps_everything() {
        let (_, corpus) = setup();
        let (train, val) = split_corpus(&corpus, 0.0, 3).unwrap();
        assert_eq!((train.len(), val.len()), (3, 0));
        let (train, val) = split_corpus(&corpus, 1.0, 3).unwrap();
        assert_eq!((train.len(), val.len()), (0, 3));
    }
}

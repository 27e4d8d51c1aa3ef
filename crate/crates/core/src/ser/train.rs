use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{SerDataset, SerError, SerModel};
use crate::features::FeatureStats;
use crate::labels::{argmax, Emotion, NUM_EMOTIONS};
use crate::nn::{rng, softmax_cross_entropy, Adam, AdamConfig, Parameterized};

/// Random stream reserved for the per-epoch shuffle.
pub(crate) const SHUFFLE_STREAM: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err("learning rate must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> Adam {
        Adam::new(AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        })
    }

    /// Example visiting order for every epoch.
    pub(crate) fn epoch_orders(&self, n: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
        let mut shuffler = rng::stream(self.seed, SHUFFLE_STREAM);
        (0..self.epochs).map(move |_| {
            let mut order: Vec<usize> = (0..n).collect();
            if self.shuffle {
                order.shuffle(&mut shuffler);
            }
            order
        })
    }
}

/// Mean loss and accuracy over one epoch, measured on the forward passes
/// used for the updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochReport> {
        self.epochs.last()
    }
}

/// Mini-batch Adam on softmax cross-entropy.
///
/// Fits the model's normalization statistics on `dataset` first, then trains
/// on the normalized spectrograms. Batch gradients are averaged.
pub fn train_ser(model: &mut SerModel, dataset: &SerDataset, config: &TrainConfig) -> Result<TrainReport, SerError> {
    config.validate().map_err(SerError::InvalidConfig)?;
    if dataset.examples.is_empty() {
        return Err(SerError::EmptyDataset);
    }
    let raw: Vec<_> = dataset.examples.iter().map(|e| e.features.clone()).collect();
    model.set_stats(FeatureStats::compute(&raw)?)?;
    let inputs = dataset
        .examples
        .iter()
        .map(|e| model.prepare(&e.features))
        .collect::<Result<Vec<_>, _>>()?;

    let mut adam = config.adam();
    let mut report = TrainReport::default();
    for (epoch, order) in config.epoch_orders(inputs.len()).enumerate() {
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            model.zero_grad();
            for &i in batch {
                let trace = model.forward_trace(&inputs[i])?;
                let label = dataset.examples[i].label.index();
                let (loss, grad) = softmax_cross_entropy(&trace.logits, label)?;
                loss_sum += loss;
                correct += usize::from(argmax(&trace.logits) == label);
                model.backward(&trace, &grad)?;
            }
            model.scale_grads(1.0 / batch.len() as f64);
            adam.update(&mut model.params_mut())?;
        }
        report.epochs.push(EpochReport {
            epoch: epoch + 1,
            loss: loss_sum / inputs.len() as f64,
            accuracy: correct as f64 / inputs.len() as f64,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerMetrics {
    pub accuracy: f64,
    pub total: usize,
    /// Recall per class in [`Emotion::ALL`] order; `None` for classes with
    /// no examples.
    pub per_class_recall: Vec<Option<f64>>,
    /// `confusion[true][predicted]` counts.
    pub confusion: [[usize; NUM_EMOTIONS]; NUM_EMOTIONS],
}

pub fn evaluate_ser(model: &SerModel, dataset: &SerDataset) -> Result<SerMetrics, SerError> {
    if dataset.examples.is_empty() {
        return Err(SerError::EmptyDataset);
    }
    let mut confusion = [[0usize; NUM_EMOTIONS]; NUM_EMOTIONS];
    for example in &dataset.examples {
        let predicted = model.predict(&example.features)?.top();
        confusion[example.label.index()][predicted.index()] += 1;
    }
    let total = dataset.examples.len();
    let correct: usize = (0..NUM_EMOTIONS).map(|i| confusion[i][i]).sum();
    let per_class_recall = Emotion::ALL
        .iter()
        .map(|e| {
            let row = &confusion[e.index()];
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[e.index()] as f64 / n as f64)
        })
        .collect();
    Ok(SerMetrics {
        accuracy: correct as f64 / total as f64,
        total,
        per_class_recall,
        confusion,
    })
}

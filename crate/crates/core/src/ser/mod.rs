//! Speech-emotion classifier: three conv stages over a log-mel spectrogram,
//! global average pooling, and a six-way dense head.
//!
//! Each stage is a 3x3 same-padding convolution, ReLU, a crop to even spatial
//! size (odd dims lose their last row/column), and 2x2 max pooling. With the
//! default 300x64 input the grid shrinks 300->150->75->37 by 64->32->16->8.

mod dataset;
mod train;

pub use dataset::{load_shemo_dir, parse_shemo_label, split_dataset, SerDataset, SerExample, Split};
pub use train::{evaluate_ser, train_ser, EpochReport, SerMetrics, TrainConfig, TrainReport};

use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioError;
use crate::features::{normalize_features, FeatureConfig, FeatureError, FeatureStats, MelSpectrogram};
use crate::labels::{EmotionDistribution, NUM_EMOTIONS};
use crate::nn::checkpoint::{Checkpoint, CheckpointError, ModelKind};
use crate::nn::{
    maxpool2d, maxpool2d_backward, relu, relu_backward, rng, Conv2d, Conv2dCache, Dense, NnError, Param,
    Parameterized, Tensor,
};

#[derive(Debug, Error)]
pub enum SerError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("cannot derive an emotion label from {0:?}")]
    UnlabeledFile(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Channel widths of the three convolution stages.
pub const STAGE_CHANNELS: [usize; 3] = [16, 32, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct SerModel {
    pub convs: [Conv2d; 3],
    pub head: Dense,
    features: FeatureConfig,
    stats: FeatureStats,
}

struct StageTrace {
    conv: Conv2dCache,
    pre_activation: Tensor,
    cropped_shape: [usize; 3],
    argmax: Vec<usize>,
}

/// Intermediate values from [`SerModel::forward_trace`], consumed by
/// [`SerModel::backward`].
pub struct SerTrace {
    stages: Vec<StageTrace>,
    pooled_shape: [usize; 3],
    embedding: Vec<f64>,
    pub logits: Vec<f64>,
}

fn crop_even(t: &Tensor) -> Tensor {
    let [c, h, w] = [t.shape()[0], t.shape()[1], t.shape()[2]];
    let (eh, ew) = (h - h % 2, w - w % 2);
    if (eh, ew) == (h, w) {
        return t.clone();
    }
    let mut out = Vec::with_capacity(c * eh * ew);
    for ci in 0..c {
        for y in 0..eh {
            let start = (ci * h + y) * w;
            out.extend_from_slice(&t.data()[start..start + ew]);
        }
    }
    Tensor::from_vec(&[c, eh, ew], out).expect("cropped shape")
}

fn uncrop(grad: &Tensor, full: &[usize]) -> Tensor {
    let [c, eh, ew] = [grad.shape()[0], grad.shape()[1], grad.shape()[2]];
    let (h, w) = (full[1], full[2]);
    if (eh, ew) == (h, w) {
        return grad.clone();
    }
    let mut out = Tensor::zeros(full);
    for ci in 0..c {
        for y in 0..eh {
            let src = &grad.data()[(ci * eh + y) * ew..][..ew];
            out.data_mut()[(ci * h + y) * w..][..ew].copy_from_slice(src);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SerMetadata {
    features: FeatureConfig,
}

impl SerTrace {
    /// Hash of the discrete forward state: ReLU signs and pooling winners.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for stage in &self.stages {
            for v in stage.pre_activation.data() {
                (*v > 0.0).hash(&mut h);
            }
            stage.argmax.hash(&mut h);
        }
        h.finish()
    }
}

impl SerModel {
    /// Seeded model for the given feature configuration; normalization starts
    /// as the identity and is fitted by [`train_ser`].
    pub fn new(seed: u64, features: FeatureConfig) -> Self {
        let mut c_in = 1;
        let convs = std::array::from_fn(|i| {
            let c_out = STAGE_CHANNELS[i];
            let layer = Conv2d::new(&format!("conv{}", i + 1), c_in, c_out, &mut rng::stream(seed, i as u32));
            c_in = c_out;
            layer
        });
        let head = Dense::new("head", STAGE_CHANNELS[2], NUM_EMOTIONS, &mut rng::stream(seed, 3));
        let stats = FeatureStats::identity(features.n_mels);
        Self {
            convs,
            head,
            features,
            stats,
        }
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: FeatureStats) -> Result<(), SerError> {
        if stats.mean.len() != self.features.n_mels || stats.std.len() != self.features.n_mels {
            return Err(FeatureError::ShapeMismatch("stats do not match n_mels".into()).into());
        }
        self.stats = stats;
        Ok(())
    }

    /// Full forward pass on a `1 x frames x bands` tensor, keeping everything
    /// the backward pass needs.
    pub fn forward_trace(&self, input: &Tensor) -> Result<SerTrace, SerError> {
        if input.shape().len() != 3 || input.shape()[0] != 1 {
            return Err(NnError::ShapeMismatch(format!("SER input must be 1xHxW, got {:?}", input.shape())).into());
        }
        let mut x = input.clone();
        let mut stages = Vec::with_capacity(3);
        for conv in &self.convs {
            let (pre, cache) = conv.forward(&x)?;
            if pre.shape()[1] < 2 || pre.shape()[2] < 2 {
                return Err(NnError::ShapeMismatch(format!(
                    "input {:?} too small for three pooling stages",
                    input.shape()
                ))
                .into());
            }
            let act = Tensor::from_vec(pre.shape(), relu(pre.data()))?;
            let cropped = crop_even(&act);
            let cropped_shape = [cropped.shape()[0], cropped.shape()[1], cropped.shape()[2]];
            let (pooled, argmax) = maxpool2d(&cropped)?;
            stages.push(StageTrace {
                conv: cache,
                pre_activation: pre,
                cropped_shape,
                argmax,
            });
            x = pooled;
        }
        let pooled_shape = [x.shape()[0], x.shape()[1], x.shape()[2]];
        let area = (pooled_shape[1] * pooled_shape[2]) as f64;
        let embedding: Vec<f64> = x
            .data()
            .chunks_exact(pooled_shape[1] * pooled_shape[2])
            .map(|plane| plane.iter().sum::<f64>() / area)
            .collect();
        let logits = self.head.forward(&embedding)?;
        Ok(SerTrace {
            stages,
            pooled_shape,
            embedding,
            logits,
        })
    }

    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>, SerError> {
        Ok(self.forward_trace(input)?.logits)
    }

    /// Accumulates parameter gradients for `d loss / d logits`.
    pub fn backward(&mut self, trace: &SerTrace, grad_logits: &[f64]) -> Result<(), SerError> {
        let grad_embedding = self.head.backward(grad_logits, &trace.embedding)?;
        let [c, h, w] = trace.pooled_shape;
        let area = (h * w) as f64;
        let mut grad = Tensor::from_vec(
            &[c, h, w],
            grad_embedding
                .iter()
                .flat_map(|g| std::iter::repeat_n(g / area, h * w))
                .collect(),
        )?;
        for (conv, stage) in self.convs.iter_mut().zip(&trace.stages).rev() {
            let g_cropped = maxpool2d_backward(&grad, &stage.argmax, &stage.cropped_shape)?;
            let g_act = uncrop(&g_cropped, stage.pre_activation.shape());
            let g_pre = Tensor::from_vec(
                stage.pre_activation.shape(),
                relu_backward(g_act.data(), stage.pre_activation.data()),
            )?;
            grad = conv.backward(&g_pre, &stage.conv)?;
        }
        Ok(())
    }

    fn check_spec(&self, spec: &MelSpectrogram) -> Result<(), SerError> {
        if spec.frames() != self.features.target_frames || spec.n_mels() != self.features.n_mels {
            return Err(NnError::ShapeMismatch(format!(
                "spectrogram {}x{} does not match model input {}x{}",
                spec.frames(),
                spec.n_mels(),
                self.features.target_frames,
                self.features.n_mels
            ))
            .into());
        }
        Ok(())
    }

    /// Normalizes a raw log-mel spectrogram with the model's stats and
    /// returns the input tensor.
    pub fn prepare(&self, raw: &MelSpectrogram) -> Result<Tensor, SerError> {
        self.check_spec(raw)?;
        let norm = normalize_features(raw, &self.stats)?;
        Ok(spec_tensor(&norm))
    }

    /// Emotion distribution for a raw (unnormalized) spectrogram.
    pub fn predict(&self, raw: &MelSpectrogram) -> Result<EmotionDistribution, SerError> {
        let logits = self.logits(&self.prepare(raw)?)?;
        Ok(EmotionDistribution::from_logits(&logits).expect("six finite logits"))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::to_string(&SerMetadata {
            features: self.features.clone(),
        })
        .expect("feature config serializes");
        let mut ck = Checkpoint::new(ModelKind::Ser, meta);
        for p in self.params() {
            ck.push(p.name.clone(), p.value.clone());
        }
        let n = self.stats.mean.len();
        ck.push("norm.mean", Tensor::from_vec(&[n], self.stats.mean.clone()).expect("stats"));
        ck.push("norm.std", Tensor::from_vec(&[n], self.stats.std.clone()).expect("stats"));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, SerError> {
        ck.expect_kind(ModelKind::Ser)?;
        let meta: SerMetadata =
            serde_json::from_str(&ck.metadata).map_err(|e| CheckpointError::Metadata(e.to_string()))?;
        meta.features.validate()?;
        let mut model = SerModel::new(0, meta.features);
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
        let stats = FeatureStats {
            mean: ck.tensor("norm.mean")?.data().to_vec(),
            std: ck.tensor("norm.std")?.data().to_vec(),
        };
        model.set_stats(stats)?;
        Ok(model)
    }
}

impl Parameterized for SerModel {
    fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.convs.iter().flat_map(|c| c.params()).collect();
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        out.extend(self.head.params_mut());
        out
    }
}

/// Seeded model with the default feature configuration (300x64 input).
pub fn build_ser_model(seed: u64) -> SerModel {
    SerModel::new(seed, FeatureConfig::default())
}

/// Wraps a spectrogram as the `1 x frames x bands` network input.
pub fn spec_tensor(spec: &MelSpectrogram) -> Tensor {
    Tensor::from_vec(&[1, spec.frames(), spec.n_mels()], spec.values().to_vec()).expect("finite spectrogram")
}

/// Softmax over the six logits for an already-normalized spectrogram.
pub fn ser_forward(model: &SerModel, spec: &MelSpectrogram) -> Result<EmotionDistribution, SerError> {
    model.check_spec(spec)?;
    let logits = model.logits(&spec_tensor(spec))?;
    Ok(EmotionDistribution::from_logits(&logits).expect("six finite logits"))
}

//! Labeled spectrogram datasets and the ShEMO-style directory loader.

use std::path::Path;

use rand::seq::SliceRandom;
use walkdir::WalkDir;

use super::SerError;
use crate::audio::{read_wav, resample_linear};
use crate::features::{read_feature_cache, write_feature_cache, FeatureExtractor, MelSpectrogram};
use crate::labels::Emotion;
use crate::nn::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerExample {
    /// Raw (unnormalized) log-mel features.
    pub features: MelSpectrogram,
    pub label: Emotion,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerDataset {
    pub examples: Vec<SerExample>,
    pub split: Split,
}

impl SerDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for e in &self.examples {
            counts[e.label.index()] += 1;
        }
        counts
    }
}

/// Emotion from a ShEMO file stem such as `F01A01` (gender, two-digit
/// speaker, emotion letter, two-digit index).
pub fn parse_shemo_label(stem: &str) -> Option<Emotion> {
    let chars: Vec<char> = stem.chars().collect();
    if chars.len() < 6 {
        return None;
    }
    let gender_ok = matches!(chars[0].to_ascii_uppercase(), 'F' | 'M');
    let digits_ok = [1, 2, 4, 5].iter().all(|&i| chars[i].is_ascii_digit());
    if !gender_ok || !digits_ok {
        return None;
    }
    Emotion::from_shemo_code(chars[3])
}

/// Loads every `.wav` under `dir` (recursively, in path order), labels it
/// from its ShEMO file name, resamples to the extractor's rate and computes
/// log-mel features.
///
/// With `cache_dir`, features are read from / written to `<stem>.empf` files
/// there. Cached values are stored as f32.
pub fn load_shemo_dir(
    dir: &Path,
    extractor: &FeatureExtractor,
    cache_dir: Option<&Path>,
) -> Result<SerDataset, SerError> {
    let mut paths: Vec<_> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();

    let io = |path: &Path, source| SerError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut examples = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = parse_shemo_label(&stem).ok_or_else(|| SerError::UnlabeledFile(path.display().to_string()))?;
        let cached = cache_dir.map(|d| d.join(format!("{stem}.empf")));
        let features = match cached.as_deref().filter(|p| p.exists()) {
            Some(p) => read_feature_cache(&std::fs::read(p).map_err(|e| io(p, e))?)?,
            None => {
                let clip = read_wav(&std::fs::read(&path).map_err(|e| io(&path, e))?)?;
                let clip = resample_linear(&clip, extractor.config().sample_rate)?;
                let features = extractor.log_mel_spectrogram(&clip)?;
                if let Some(p) = &cached {
                    std::fs::write(p, write_feature_cache(&features)).map_err(|e| io(p, e))?;
                }
                features
            }
        };
        examples.push(SerExample {
            features,
            label,
            source: Some(path.display().to_string()),
        });
    }
    if examples.is_empty() {
        return Err(SerError::EmptyDataset);
    }
    Ok(SerDataset {
        examples,
        split: Split::Train,
    })
}

/// Stratified split: within each class, a seeded shuffle sends
/// `round(n * validation_fraction)` examples to validation.
pub fn split_dataset(dataset: &SerDataset, validation_fraction: f64, seed: u64) -> (SerDataset, SerDataset) {
    let mut rng = rng::stream(seed, 65);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for emotion in Emotion::ALL {
        let mut members: Vec<&SerExample> = dataset.examples.iter().filter(|e| e.label == emotion).collect();
        members.shuffle(&mut rng);
        let n_val = (members.len() as f64 * validation_fraction).round() as usize;
        for (i, e) in members.into_iter().enumerate() {
            if i < n_val {
                val.push(e.clone());
            } else {
                train.push(e.clone());
            }
        }
    }
    (
        SerDataset {
            examples: train,
            split: Split::Train,
        },
        SerDataset {
            examples: val,
            split: Split::Validation,
        },
    )
}

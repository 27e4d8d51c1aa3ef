//! Deterministic synthetic data: emotion-profile speech stand-ins for the
//! SER model, and the toy/seed text resources for the recommender.

mod text;

pub use text::{seed_embeddings, toy_corpus, toy_embeddings, SEED_DIM, SEED_PROTOTYPES, TOY_DIM};

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::audio::{write_wav, AudioClip};
use crate::labels::Emotion;
use crate::nn::rng;
use crate::recommender::SuggestionCorpus;

pub const SYNTH_SAMPLE_RATE: u32 = 16_000;
pub const SYNTH_SECONDS: f64 = 3.0;

/// Acoustic signature of one class.
#[derive(Debug, Clone, Copy)]
struct Profile {
    f0: f64,
    harmonics: usize,
    amplitude: f64,
    /// Amplitude ratio between consecutive harmonics.
    rolloff: f64,
    am_rate: f64,
    am_depth: f64,
    /// Ratio of final to initial pitch.
    glide: f64,
    /// Gated bursts (on 120 ms out of every 450 ms) instead of a sustained tone.
    bursts: bool,
    noise: f64,
}

fn profile(emotion: Emotion) -> Profile {
    let base = Profile {
        f0: 140.0,
        harmonics: 3,
        amplitude: 0.15,
        rolloff: 0.6,
        am_rate: 0.0,
        am_depth: 0.0,
        glide: 1.0,
        bursts: false,
        noise: 0.004,
    };
    match emotion {
        Emotion::Anger => Profile {
            f0: 180.0,
            harmonics: 10,
            amplitude: 0.55,
            rolloff: 0.9,
            am_rate: 5.0,
            am_depth: 0.3,
            noise: 0.03,
            ..base
        },
        Emotion::Fear => Profile {
            f0: 520.0,
            harmonics: 4,
            amplitude: 0.25,
            rolloff: 0.7,
            am_rate: 11.0,
            am_depth: 0.8,
            ..base
        },
        Emotion::Sadness => Profile {
            f0: 110.0,
            harmonics: 4,
            amplitude: 0.08,
            rolloff: 0.35,
            noise: 0.001,
            ..base
        },
        Emotion::Happiness => Profile {
            f0: 300.0,
            harmonics: 6,
            amplitude: 0.35,
            rolloff: 0.75,
            glide: 1.5,
            ..base
        },
        Emotion::Surprise => Profile {
            f0: 420.0,
            harmonics: 5,
            amplitude: 0.4,
            rolloff: 0.7,
            bursts: true,
            noise: 0.01,
            ..base
        },
        Emotion::Neutrality => base,
    }
}

/// A 3 s, 16 kHz clip carrying the class signature of `emotion`, with
/// per-clip jitter in pitch, level, modulation, and phase drawn from
/// `(seed, index)`.
pub fn synth_emotion_clip(emotion: Emotion, seed: u64, index: u32) -> AudioClip {
    let p = profile(emotion);
    let mut r = rng::stream(seed ^ ((emotion.index() as u64) << 32), index);
    let f0 = p.f0 * r.random_range(0.95..1.05);
    let amplitude = p.amplitude * r.random_range(0.9..1.1);
    let am_rate = p.am_rate * r.random_range(0.9..1.1);
    let am_phase = r.random_range(0.0..TAU);
    let burst_offset = r.random_range(0.0..0.45);
    let phases: Vec<f64> = (0..p.harmonics).map(|_| r.random_range(0.0..TAU)).collect();
    let gains: Vec<f64> = (0..p.harmonics).map(|h| p.rolloff.powi(h as i32)).collect();
    let norm: f64 = gains.iter().sum();

    let sr = SYNTH_SAMPLE_RATE as f64;
    let n = (SYNTH_SECONDS * sr) as usize;
    let mut phase = 0.0;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = f0 * (1.0 + (p.glide - 1.0) * t / SYNTH_SECONDS);
            phase += TAU * f / sr;
            let tone: f64 = gains
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(h, (g, ph))| g * ((h + 1) as f64 * phase + ph).sin())
                .sum::<f64>()
                / norm;
            let mut env = 1.0 - p.am_depth * (0.5 + 0.5 * (TAU * am_rate * t + am_phase).sin());
            if p.bursts && (t + burst_offset) % 0.45 > 0.12 {
                env = 0.0;
            }
            let noise = p.noise * r.random_range(-1.0..1.0);
            amplitude * env * tone + noise
        })
        .collect();
    AudioClip::from_clamped(samples, SYNTH_SAMPLE_RATE).expect("nonempty clip")
}

/// ShEMO-style file stem: gender, speaker, emotion letter, utterance.
pub fn shemo_stem(emotion: Emotion, index: u32) -> String {
    let gender = if index.is_multiple_of(2) { 'F' } else { 'M' };
    format!("{gender}{:02}{}{:02}", index % 10 + 1, emotion.shemo_code(), index + 1)
}

/// Writes `per_class` clips per emotion into `dir` using ShEMO file names
/// and returns the written paths in sorted order.
pub fn write_synthetic_ser_dataset(dir: &Path, per_class: u32, seed: u64) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for emotion in Emotion::ALL {
        for i in 0..per_class {
            let path = dir.join(format!("{}.wav", shemo_stem(emotion, i)));
            std::fs::write(&path, write_wav(&synth_emotion_clip(emotion, seed, i)))?;
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Generated files shipped under `data/`, as `(file name, contents)`. The
/// seed table is derived from the seed corpus.
pub fn generated_resources(seed_corpus: &SuggestionCorpus) -> Vec<(&'static str, String)> {
    vec![
        ("toy_corpus.jsonl", toy_corpus().to_jsonl()),
        ("toy_embeddings.txt", toy_embeddings().to_text()),
        ("seed_embeddings.txt", seed_embeddings(seed_corpus).to_text()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ser::parse_shemo_label;

    #[test]
    fn clips_are_deterministic_and_bounded() {
        let a = synth_emotion_clip(Emotion::Anger, 1, 0);
        assert_eq!(a, synth_emotion_clip(Emotion::Anger, 1, 0));
        assert_ne!(a, synth_emotion_clip(Emotion::Anger, 1, 1));
        assert_eq!(a.len(), 48_000);
        for e in Emotion::ALL {
            let clip = synth_emotion_clip(e, 3, 2);
            assert!(clip.samples().iter().all(|s| s.abs() <= 1.0));
        }
    }

    #[test]
    fn stems_parse_back() {
        for e in Emotion::ALL {
            for i in 0..12 {
                assert_eq!(parse_shemo_label(&shemo_stem(e, i)), Some(e));
            }
        }
    }
}

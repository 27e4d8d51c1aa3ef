//! Emotion-aware speech pipeline primitives: audio I/O, log-mel features, a
//! small neural-network engine, the speech-emotion classifier, the suggestion
//! recommender, and TTS delivery.

pub mod audio;
pub mod features;
pub mod nn;
pub mod labels;
pub mod ser;
pub mod recommender;
pub mod synth;
pub mod tts;

//! Emotion classes, languages, and probability distributions over emotions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::softmax;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("unknown emotion {0:?}")]
    UnknownEmotion(String),
    #[error("unknown language {0:?} (expected \"en\" or \"fa\")")]
    UnknownLanguage(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// The six canonical classes, with fixed indices. The first three are the
/// negative subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger = 0,
    Fear = 1,
    Sadness = 2,
    Happiness = 3,
    Surprise = 4,
    Neutrality = 5,
}

pub const NUM_EMOTIONS: usize = 6;

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Sadness,
        Emotion::Happiness,
        Emotion::Surprise,
        Emotion::Neutrality,
    ];

    pub const NEGATIVE: [Emotion; 3] = [Emotion::Anger, Emotion::Fear, Emotion::Sadness];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn is_negative(self) -> bool {
        self.index() < 3
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Sadness => "sadness",
            Emotion::Happiness => "happiness",
            Emotion::Surprise => "surprise",
            Emotion::Neutrality => "neutrality",
        }
    }

    /// Letter used in ShEMO file names (`F01A01.wav` is anger).
    pub fn shemo_code(self) -> char {
        match self {
            Emotion::Anger => 'A',
            Emotion::Fear => 'F',
            Emotion::Sadness => 'S',
            Emotion::Happiness => 'H',
            Emotion::Surprise => 'W',
            Emotion::Neutrality => 'N',
        }
    }

    pub fn from_shemo_code(code: char) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.shemo_code() == code.to_ascii_uppercase())
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "anger" => Ok(Emotion::Anger),
            "fear" => Ok(Emotion::Fear),
            "sadness" => Ok(Emotion::Sadness),
            "happiness" => Ok(Emotion::Happiness),
            "surprise" => Ok(Emotion::Surprise),
            "neutrality" | "neutral" => Ok(Emotion::Neutrality),
            _ => Err(LabelError::UnknownEmotion(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fa,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Fa];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fa => "fa",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "fa" => Ok(Language::Fa),
            _ => Err(LabelError::UnknownLanguage(s.to_string())),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Probabilities over the six emotions, indexed by [`Emotion::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionDistribution {
    probabilities: [f64; NUM_EMOTIONS],
}

impl EmotionDistribution {
    /// Validates entries in `[0, 1]` summing to 1 within 1e-9.
    pub fn new(probabilities: [f64; NUM_EMOTIONS]) -> Result<Self, LabelError> {
        if probabilities
            .iter()
            .any(|p| !p.is_finite() || !(0.0..=1.0).contains(p))
        {
            return Err(LabelError::InvalidDistribution(format!(
                "entries must lie in [0, 1]: {probabilities:?}"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LabelError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probabilities })
    }

    pub fn from_logits(logits: &[f64]) -> Result<Self, LabelError> {
        let probs: [f64; NUM_EMOTIONS] = softmax(logits)
            .try_into()
            .map_err(|_| LabelError::InvalidDistribution(format!("{} logits", logits.len())))?;
        Self::new(probs)
    }

    pub fn uniform() -> Self {
        Self {
            probabilities: [1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS],
        }
    }

    pub fn probabilities(&self) -> &[f64; NUM_EMOTIONS] {
        &self.probabilities
    }

    pub fn probability(&self, emotion: Emotion) -> f64 {
        self.probabilities[emotion.index()]
    }

    pub fn top(&self) -> Emotion {
        Emotion::ALL[argmax(&self.probabilities)]
    }
}

/// Returns the top emotion when it is negative (anger, fear, sadness) and its
/// probability reaches `threshold`; otherwise no recommendation is due.
pub fn filter_negative(dist: &EmotionDistribution, threshold: f64) -> Option<Emotion> {
    let top = dist.top();
    (top.is_negative() && dist.probability(top) >= threshold).then_some(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn indices_and_negative_subset() {
        for (i, e) in Emotion::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(Emotion::from_index(i), Some(*e));
            assert_eq!(e.name().parse::<Emotion>().unwrap(), *e);
            assert_eq!(Emotion::from_shemo_code(e.shemo_code()), Some(*e));
        }
        let negative: Vec<_> = Emotion::ALL.into_iter().filter(|e| e.is_negative()).collect();
        assert_eq!(negative, Emotion::NEGATIVE);
        assert!("joy".parse::<Emotion>().is_err());
        assert!("de".parse::<Language>().is_err());
    }

    #[test]
    fn filter_examples() {
        let anger = EmotionDistribution::new([0.7, 0.06, 0.06, 0.06, 0.06, 0.06]).unwrap();
        assert_eq!(filter_negative(&anger, 0.0), Some(Emotion::Anger));
        let happy = EmotionDistribution::new([0.1, 0.1, 0.1, 0.5, 0.1, 0.1]).unwrap();
        assert_eq!(filter_negative(&happy, 0.0), None);
        let weak_fear = EmotionDistribution::new([0.1, 0.4, 0.1, 0.1, 0.2, 0.1]).unwrap();
        assert_eq!(filter_negative(&weak_fear, 0.5), None);
        assert_eq!(filter_negative(&weak_fear, 0.4), Some(Emotion::Fear));
    }

    #[test]
    fn ties_prefer_lowest_index() {
        assert_eq!(EmotionDistribution::uniform().top(), Emotion::Anger);
        let tie = EmotionDistribution::new([0.0, 0.0, 0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(tie.top(), Emotion::Happiness);
    }

    #[test]
    fn rejects_invalid_distributions() {
        assert!(EmotionDistribution::new([0.5; 6]).is_err());
        assert!(EmotionDistribution::new([1.5, -0.5, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_invariant_under_logit_shift(
            logits in prop::collection::vec(-8.0f64..8.0, 6),
            shift in -50.0f64..50.0,
            threshold in 0.0f64..0.6,
        ) {
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            let a = EmotionDistribution::from_logits(&logits).unwrap();
            let b = EmotionDistribution::from_logits(&shifted).unwrap();
            prop_assert_eq!(a.top(), b.top());
            // probabilities agree to rounding; compare away from the threshold edge
            let p = a.probability(a.top());
            if (p - threshold).abs() > 1e-9 {
                prop_assert_eq!(filter_negative(&a, threshold), filter_negative(&b, threshold));
            }
        }
    }
}

//! Synthetic word vectors and the toy suggestion corpus.
//!
//! Real pretrained vectors cannot ship with the repository, so the seed
//! table is built from the seed corpus itself, one coordinate per negative
//! emotion. Each occurrence of a token in a prototype sentence contributes
//! that sentence's emotion one-hot; an occurrence anywhere else contributes
//! 0.2 to every emotion (content without a preference). Contributions are
//! averaged per token and function words map to zero. Only the prototype
//! sentences therefore carry emotion evidence, which is what makes them the
//! recommender's top picks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::labels::{Emotion, Language};
use crate::nn::{rng, Tensor};
use crate::recommender::{tokenize, EmbeddingTable, Suggestion, SuggestionCorpus};

pub const SEED_DIM: usize = 3;
pub const TOY_DIM: usize = 8;

const SEED_RNG: u64 = 0x5eed;
const TOY_RNG: u64 = 0x70f;

/// Prototype sentences of each (emotion, language) bucket in the seed corpus.
pub const SEED_PROTOTYPES: [&str; 18] = [
    "en-anger-04",
    "en-anger-07",
    "en-anger-09",
    "en-sadness-02",
    "en-sadness-05",
    "en-sadness-10",
    "en-fear-03",
    "en-fear-06",
    "en-fear-08",
    "fa-anger-04",
    "fa-anger-07",
    "fa-anger-09",
    "fa-sadness-02",
    "fa-sadness-05",
    "fa-sadness-10",
    "fa-fear-03",
    "fa-fear-06",
    "fa-fear-08",
];

const STOPWORDS: &[&str] = &[
    // en
    "a", "about", "an", "and", "are", "around", "be", "can", "do", "for", "from", "have", "if", "in", "into", "is",
    "it", "of", "on", "out", "that", "the", "this", "to", "up", "what", "will", "with", "would", "you", "youre",
    "your", "yourself",
    // fa
    "از", "اگر", "این", "با", "بر", "برای", "به", "بزنید", "بگیرید", "تا", "چه", "در", "دهید", "را", "کمی", "که",
    "کنید", "و", "یک",
];

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Rows for sorted `affinity` entries: the affinity plus noise of at most
/// `noise` in every coordinate.
fn build_table(affinity: BTreeMap<String, [f64; 3]>, dim: usize, noise: f64, seed: u64) -> EmbeddingTable {
    let mut r = rng::stream(seed, 0);
    let mut values = Vec::with_capacity(affinity.len() * dim);
    for a in affinity.values() {
        for j in 0..dim {
            let base = a.get(j).copied().unwrap_or(0.0);
            let jitter = if noise > 0.0 { r.random_range(-noise..noise) } else { 0.0 };
            values.push(round6(base + jitter));
        }
    }
    let tokens: Vec<String> = affinity.into_keys().collect();
    let vectors = Tensor::from_vec(&[tokens.len(), dim], values).expect("finite values");
    EmbeddingTable::new(tokens, vectors).expect("unique tokens")
}

/// Synthetic `SEED_DIM`-dimensional table covering every token of `corpus`.
pub fn seed_embeddings(corpus: &SuggestionCorpus) -> EmbeddingTable {
    let mut sums: BTreeMap<String, ([f64; 3], usize)> = BTreeMap::new();
    for s in corpus.entries() {
        let own = s.emotion.index();
        let contribution: [f64; 3] = if SEED_PROTOTYPES.contains(&s.id.as_str()) {
            std::array::from_fn(|e| if e == own { 1.0 } else { 0.0 })
        } else {
            [0.2; 3]
        };
        for token in tokenize(&s.text) {
            let entry = sums.entry(token.clone()).or_default();
            if !STOPWORDS.contains(&token.as_str()) {
                for (acc, c) in entry.0.iter_mut().zip(contribution) {
                    *acc += c;
                }
                entry.1 += 1;
            }
        }
    }
    let affinity = sums
        .into_iter()
        .map(|(t, (sum, n))| {
            let n = n.max(1) as f64;
            (t, sum.map(|v| v / n))
        })
        .collect();
    build_table(affinity, SEED_DIM, 0.0, SEED_RNG)
}

const TOY_PREFIXES: [&str; 5] = ["try to", "you could", "take time to", "it helps to", "maybe"];

const TOY_KEYWORDS: [(Emotion, [&str; 10]); 3] = [
    (
        Emotion::Anger,
        ["breathe", "pause", "count", "unclench", "exhale", "cool", "relax", "soften", "retreat", "simmer"],
    ),
    (
        Emotion::Fear,
        ["ground", "anchor", "shelter", "steady", "brave", "reassure", "plan", "light", "safe", "hold"],
    ),
    (
        Emotion::Sadness,
        ["stroll", "sunlight", "journal", "hug", "cherish", "gratitude", "remember", "visit", "rest", "cry"],
    ),
];

/// Tokens in the toy table that never occur in the toy corpus.
const TOY_FILLERS: [&str; 11] = ["the", "a", "and", "of", "very", "quite", "again", "here", "there", "soon", "then"];

/// Thirty English suggestions, ten per emotion, each a shared prefix plus one
/// emotion-specific keyword.
pub fn toy_corpus() -> SuggestionCorpus {
    let entries = TOY_KEYWORDS
        .iter()
        .flat_map(|(emotion, words)| {
            words.iter().enumerate().map(move |(i, w)| Suggestion {
                id: format!("toy-{}-{:02}", emotion.name(), i + 1),
                emotion: *emotion,
                language: Language::En,
                text: format!("{} {w}", TOY_PREFIXES[i % TOY_PREFIXES.len()]),
            })
        })
        .collect();
    SuggestionCorpus::new(entries).expect("valid toy corpus")
}

/// About fifty tokens at `TOY_DIM`: keywords carry their emotion, prefix
/// words and fillers are noise.
pub fn toy_embeddings() -> EmbeddingTable {
    let mut affinity = BTreeMap::new();
    for (emotion, words) in TOY_KEYWORDS {
        for w in words {
            let mut a = [0.0; 3];
            a[emotion.index()] = 1.0;
            affinity.insert(w.to_string(), a);
        }
    }
    for w in TOY_PREFIXES.iter().flat_map(|p| p.split(' ')).chain(TOY_FILLERS) {
        affinity.insert(w.to_string(), [0.0; 3]);
    }
    build_table(affinity, TOY_DIM, 0.1, TOY_RNG)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_resources() {
        let corpus = toy_corpus();
        assert_eq!(corpus.len(), 30);
        for e in Emotion::NEGATIVE {
            assert_eq!(corpus.bucket(e, Language::En).count(), 10);
        }
        let table = toy_embeddings();
        assert_eq!(table.dim(), TOY_DIM);
        assert!((45..=55).contains(&table.vocab_size()), "{}", table.vocab_size());
        for s in corpus.entries() {
            for t in tokenize(&s.text) {
                assert!(table.index(&t) < table.vocab_size(), "{t} missing");
            }
        }
        assert_eq!(toy_embeddings(), table);
    }

    #[test]
    fn seed_affinity_layout() {
        let corpus = SuggestionCorpus::new(vec![
            Suggestion {
                id: "en-anger-04".into(),
                emotion: Emotion::Anger,
                language: Language::En,
                text: "Take a deep breath".into(),
            },
            Suggestion {
                id: "x".into(),
                emotion: Emotion::Sadness,
                language: Language::En,
                text: "Take a nap".into(),
            },
        ])
        .unwrap();
        let table = seed_embeddings(&corpus);
        assert_eq!(table.vocab_size(), 5);
        assert_eq!(table.vector("breath"), [1.0, 0.0, 0.0]);
        // (1, 0, 0) and (0.2, 0.2, 0.2) averaged
        assert_eq!(table.vector("take"), [0.6, 0.1, 0.1]);
        assert_eq!(table.vector("nap"), [0.2, 0.2, 0.2]);
        assert_eq!(table.vector("a"), [0.0; 3]);
    }
}

use std::path::PathBuf;
use std::sync::Arc;

use empath_core::labels::{Emotion, Language};
use empath_core::recommender::{
    load_embeddings, load_suggestions, parse_suggestions, recommend, split_corpus, train_rec, evaluate_rec,
    RecModel, SuggestionCorpus, DEFAULT_HIDDEN,
};
use empath_core::ser::TrainConfig;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn trained_seed_model() -> (SuggestionCorpus, RecModel) {
    let corpus = load_suggestions(data("seed_corpus.jsonl")).unwrap();
    let table = Arc::new(load_embeddings(data("seed_embeddings.txt")).unwrap());
    let mut model = RecModel::new(table, DEFAULT_HIDDEN, 3);
    let config = TrainConfig {
        epochs: 10,
        seed: 3,
        ..TrainConfig::default()
    };
    train_rec(&mut model, &corpus, &config).unwrap();
    (corpus, model)
}

#[test]
fn recommendations_stay_in_language() {
    let (corpus, model) = trained_seed_model();
    for language in Language::ALL {
        for emotion in Emotion::NEGATIVE {
            let r = recommend(&corpus, &model, emotion, language, 3).unwrap();
            assert_eq!(r.suggestions.len(), 3);
            assert!(!r.truncated);
            assert!(r.suggestions.iter().all(|s| s.language == language));
            assert_eq!(r, recommend(&corpus, &model, emotion, language, 3).unwrap());
        }
    }
}

#[test]
fn held_out_accuracy_is_reported() {
    let corpus = load_suggestions(data("seed_corpus.jsonl")).unwrap();
    let (train, val) = split_corpus(&corpus, 0.2, 1).unwrap();
    assert_eq!((train.len(), val.len()), (48, 12));
    let table = Arc::new(load_embeddings(data("seed_embeddings.txt")).unwrap());
    let mut model = RecModel::new(table, 16, 1);
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    train_rec(&mut model, &train, &config).unwrap();
    let metrics = evaluate_rec(&model, &val).unwrap();
    assert_eq!(metrics.total, 12);
    assert_eq!(metrics.confusion.iter().flatten().sum::<usize>(), 12);
}

fn shuffled(lines: &[&str], key: u64) -> String {
    let mut v: Vec<&str> = lines.to_vec();
    let n = v.len();
    for i in (1..n).rev() {
        let j = (key.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) as usize % (i + 1);
        v.swap(i, j);
    }
    v.join("\n")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn line_order_does_not_matter(key in any::<u64>()) {
        let (corpus, model) = trained_seed_model();
        let text = std::fs::read_to_string(data("seed_corpus.jsonl")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let permuted = parse_suggestions(&shuffled(&lines, key)).unwrap();
        for language in Language::ALL {
            for emotion in Emotion::NEGATIVE {
                prop_assert_eq!(
                    recommend(&corpus, &model, emotion, language, 3).unwrap(),
                    recommend(&permuted, &model, emotion, language, 3).unwrap()
                );
            }
        }
    }
}

//! Seeded synthetic datasets shaped like real video QA benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, VqaTuple};

const VOCAB: &[&str] = &[
    "the", "person", "cup", "table", "knife", "opens", "closes", "door", "walks", "kitchen", "picks",
    "up", "puts", "down", "bowl", "water", "pours", "cuts", "onion", "washes", "hands", "drawer",
    "fridge", "takes", "plate", "spoon", "stirs", "pan", "turns", "tap", "dries", "towel", "moves",
    "chair", "sits", "reads", "book", "phone", "looks", "window", "red", "blue", "green", "small",
    "large", "first", "then", "after", "before", "while", "slowly", "quickly", "again", "twice",
    "left", "right", "bag", "box", "lid", "bottle",
];

const QUESTION_STARTS: &[&str] = &["what", "why", "how", "which", "where"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureShape {
    pub frames: usize,
    pub question_words: usize,
    /// Inclusive range of words per choice.
    pub choice_words: (usize, usize),
    pub n_choices: usize,
    /// Question types assigned round-robin; empty leaves them unset.
    pub question_types: Vec<String>,
}

impl FixtureShape {
    /// About 30 features: 8 frames, 7 question words, five 3-word choices.
    pub fn small() -> Self {
        Self {
            frames: 8,
            question_words: 7,
            choice_words: (3, 3),
            n_choices: 5,
            question_types: vec!["action".into(), "object".into(), "order".into()],
        }
    }

    /// Long-video shape: 180 frames, 24 question words, ~108 answer words.
    pub fn long_video() -> Self {
        Self {
            frames: 180,
            question_words: 24,
            choice_words: (21, 22),
            n_choices: 5,
            question_types: Vec::new(),
        }
    }
}

/// Deterministic dataset of `n` tuples; ground truths cycle through the
/// choice indices so every position is used.
pub fn synthetic_dataset(name: &str, n: usize, seed: u64, shape: &FixtureShape) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| VOCAB.choose(rng).expect("vocab").to_string();
    let tuples = (0..n)
        .map(|t| {
            let frames = (0..shape.frames).map(|f| format!("v{t:03}/frame_{f:04}.jpg")).collect();
            let mut question = vec![QUESTION_STARTS[t % QUESTION_STARTS.len()].to_string()];
            while question.len() < shape.question_words {
                question.push(word(&mut rng));
            }
            question.truncate(shape.question_words.max(1));
            let choices = (0..shape.n_choices)
                .map(|_| {
                    let len = rng.random_range(shape.choice_words.0..=shape.choice_words.1);
                    (0..len.max(1)).map(|_| word(&mut rng)).collect()
                })
                .collect();
            VqaTuple {
                tuple_id: format!("{name}-{t:03}"),
                frames,
                question_elements: question,
                choices,
                ground_truth: (t * 3 + 1) % shape.n_choices,
                question_type: (!shape.question_types.is_empty())
                    .then(|| shape.question_types[t % shape.question_types.len()].clone()),
            }
        })
        .collect();
    Dataset::new(name, tuples)
}

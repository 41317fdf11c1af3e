use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::model::{Dataset, VqaTuple, MAX_CHOICES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReplacementMode {
    /// Negatives rotated in from one other tuple.
    Easy,
    /// `x` extra negatives drawn from across the dataset.
    NewX(usize),
}

impl fmt::Display for ReplacementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplacementMode::Easy => f.write_str("easy"),
            ReplacementMode::NewX(x) => write!(f, "new-{x}"),
        }
    }
}

impl FromStr for ReplacementMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("easy") {
            return Ok(ReplacementMode::Easy);
        }
        let lower = s.to_ascii_lowercase();
        let x = lower
            .strip_prefix("new-")
            .or_else(|| lower.strip_prefix("new_"))
            .and_then(|x| x.parse::<usize>().ok())
            .ok_or_else(|| format!("unknown replacement mode {s:?} (expected easy or new-<x>)"))?;
        if x == 0 {
            return Err("new-x needs x >= 1".into());
        }
        Ok(ReplacementMode::NewX(x))
    }
}

impl TryFrom<String> for ReplacementMode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ReplacementMode> for String {
    fn from(m: ReplacementMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementConfig {
    pub mode: ReplacementMode,
    #[serde(default)]
    pub seed: u64,
    /// Only draw new negatives from tuples with the same question type.
    #[serde(default)]
    pub type_compatibility: bool,
}

/// Per-tuple RNG, independent of processing order.
fn rng_for(seed: u64, tuple_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tuple_index as u64);
    rng
}

/// Shuffles `choices` and returns the new position of `gt`.
fn shuffle_choices(rng: &mut ChaCha8Rng, choices: Vec<Vec<String>>, gt: usize) -> (Vec<Vec<String>>, usize) {
    let mut order: Vec<usize> = (0..choices.len()).collect();
    order.shuffle(rng);
    let new_gt = order.iter().position(|&k| k == gt).expect("gt in order");
    let mut slots: Vec<Option<Vec<String>>> = choices.into_iter().map(Some).collect();
    let shuffled = order.iter().map(|&k| slots[k].take().expect("each index once")).collect();
    (shuffled, new_gt)
}

fn with_choices(t: &VqaTuple, choices: Vec<Vec<String>>, ground_truth: usize) -> VqaTuple {
    VqaTuple {
        choices,
        ground_truth,
        ..t.clone()
    }
}

/// Each tuple keeps its ground-truth answer and takes the negatives of one
/// uniformly chosen other tuple; choice positions are then shuffled.
pub fn replace_answers_easy(dataset: &Dataset, seed: u64) -> Result<Dataset, ExperimentError> {
    let n = dataset.len();
    if n < 2 {
        return Err(ExperimentError::TooFewTuples);
    }
    let tuples = dataset
        .tuples
        .iter()
        .enumerate()
        .map(|(r, t)| {
            let mut rng = rng_for(seed, r);
            let mut donor = rng.random_range(0..n - 1);
            if donor >= r {
                donor += 1;
            }
            let d = &dataset.tuples[donor];
            let mut choices: Vec<Vec<String>> = d
                .choices
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != d.ground_truth)
                .map(|(_, c)| c.clone())
                .collect();
            choices.push(t.choices[t.ground_truth].clone());
            let gt = choices.len() - 1;
            let (choices, gt) = shuffle_choices(&mut rng, choices, gt);
            with_choices(t, choices, gt)
        })
        .collect();
    Ok(Dataset::new(format!("{}-easy", dataset.name), tuples))
}

/// Adds `x` distinct negatives to every tuple, drawn without replacement
/// from the choices of other tuples, then shuffles choice positions.
/// Candidates whose text already appears among the tuple's choices are
/// never drawn.
pub fn inject_new_negatives(dataset: &Dataset, config: &ReplacementConfig) -> Result<Dataset, ExperimentError> {
    let ReplacementMode::NewX(x) = config.mode else {
        return Err(ExperimentError::InvalidConfig("inject_new_negatives needs a new-x mode".into()));
    };
    if dataset.len() < 2 {
        return Err(ExperimentError::TooFewTuples);
    }
    let mut tuples = Vec::with_capacity(dataset.len());
    for (r, t) in dataset.tuples.iter().enumerate() {
        let total = t.n_choices() + x;
        if total > MAX_CHOICES {
            return Err(ExperimentError::LabelOverflow {
                tuple_id: t.tuple_id.clone(),
                choices: total,
            });
        }
        let mut seen: HashSet<String> = t.choices.iter().map(|c| c.join(" ")).collect();
        let mut pool: Vec<&Vec<String>> = Vec::new();
        for (d, donor) in dataset.tuples.iter().enumerate() {
            if d == r || (config.type_compatibility && donor.question_type != t.question_type) {
                continue;
            }
            for c in &donor.choices {
                if seen.insert(c.join(" ")) {
                    pool.push(c);
                }
            }
        }
        if pool.len() < x {
            return Err(ExperimentError::InsufficientPool {
                tuple_id: t.tuple_id.clone(),
                available: pool.len(),
                needed: x,
            });
        }
        let mut rng = rng_for(config.seed, r);
        let mut choices = t.choices.clone();
        for k in index::sample(&mut rng, pool.len(), x) {
            choices.push(pool[k].clone());
        }
        let (choices, gt) = shuffle_choices(&mut rng, choices, t.ground_truth);
        tuples.push(with_choices(t, choices, gt));
    }
    Ok(Dataset::new(format!("{}-new{x}", dataset.name), tuples))
}

pub fn replace_answers(dataset: &Dataset, config: &ReplacementConfig) -> Result<Dataset, ExperimentError> {
    match config.mode {
        ReplacementMode::Easy => replace_answers_easy(dataset, config.seed),
        ReplacementMode::NewX(_) => inject_new_negatives(dataset, config),
    }
}

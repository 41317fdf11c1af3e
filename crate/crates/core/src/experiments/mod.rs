//! Perturbation protocols built on top of the engine: masking accuracy
//! studies, answer replacement, frame-ranking agreement and the
//! estimator iteration ablation.

mod ablation;
mod masking;
mod ranking;
mod replacement;

pub use ablation::{iteration_ablation, AblationPoint, AblationReference};
pub use masking::{run_masking_experiment, MaskingReport, MaskingRow};
pub use ranking::{rank_frames_by_attribution, spearman_correlation};
pub use replacement::{inject_new_negatives, replace_answers, replace_answers_easy, ReplacementConfig, ReplacementMode};

use crate::adapter::AdapterError;
use crate::mask::MaskError;
use crate::shapley::ShapleyError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("sign masks need attributions for tuples: {}", .0.join(", "))]
    MissingAttributions(Vec<String>),
    #[error("answer replacement needs at least two tuples")]
    TooFewTuples,
    #[error("tuple {tuple_id}: only {available} compatible negatives, {needed} needed")]
    InsufficientPool {
        tuple_id: String,
        available: usize,
        needed: usize,
    },
    #[error("tuple {tuple_id}: {choices} choices exceed the 26-letter label space")]
    LabelOverflow { tuple_id: String, choices: usize },
    #[error("invalid ranking: {0}")]
    Ranking(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("tuple {tuple_id}: {source}")]
    Adapter {
        tuple_id: String,
        source: AdapterError,
    },
    #[error("tuple {tuple_id}: {source}")]
    Evaluation {
        tuple_id: String,
        source: ShapleyError,
    },
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

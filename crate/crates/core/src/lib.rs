//! Black-box Shapley attribution for multiple-choice video question
//! answering.
//!
//! Inputs are grouped into video frames, question words and answer words.
//! Each group is one player; a coalition keeps its members and masks the
//! rest (zeroed frames, whitespace text). The model's per-choice logits are
//! the coalition's reward, so one model call serves every answer class.
//!
//! ```
//! use mmshap_core::adapter::{Adapter, SyntheticAdapter, SyntheticKind};
//! use mmshap_core::fixtures::{synthetic_dataset, FixtureShape};
//! use mmshap_core::metrics::{score_tuple, ClassBasis};
//! use mmshap_core::shapley::{monte_carlo_shapley, EstimatorConfig};
//!
//! let ds = synthetic_dataset("demo", 1, 0, &FixtureShape::small());
//! let tuple = &ds.tuples[0];
//! let adapter = SyntheticAdapter::family(SyntheticKind::TextBiased, 0);
//! let reward = adapter.bind(tuple).unwrap();
//! let cfg = EstimatorConfig::default().with_iterations(600);
//! let attr = monte_carlo_shapley(&*reward, &tuple.layout(), &cfg).unwrap();
//! let scores = score_tuple(&attr, tuple.ground_truth, ClassBasis::GroundTruth).unwrap();
//! assert_eq!(scores.mc.unwrap()[0], 0.0);
//! ```

pub mod adapter;
pub mod experiments;
pub mod fixtures;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod report;
pub mod shapley;

pub use mask::{MaskKind, MaskSpec};
pub use metrics::{ClassBasis, ModalityScores};
pub use model::{
    AttributionResult, Dataset, Estimator, MaskVector, Modality, ModalityLayout, RewardVector, VqaTuple,
};
pub use shapley::{EstimatorConfig, RewardFunction};

/// Recorded in every run manifest.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

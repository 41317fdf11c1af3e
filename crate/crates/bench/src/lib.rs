//! Workloads shared by the estimator benchmarks.

use mmshap_core::adapter::{SyntheticAdapter, SyntheticKind, SyntheticModelSpec};
use mmshap_core::fixtures::{synthetic_dataset, FixtureShape};
use mmshap_core::{ModalityLayout, VqaTuple};

/// A tuple with `frames + 4 + 2 * 3` features and its pairwise synthetic model.
pub fn workload(frames: usize) -> (VqaTuple, ModalityLayout, SyntheticModelSpec) {
    let shape = FixtureShape {
        frames,
        question_words: 4,
        choice_words: (2, 2),
        n_choices: 3,
        question_types: Vec::new(),
    };
    let tuple = synthetic_dataset("bench", 1, 11, &shape).tuples.remove(0);
    let model = SyntheticAdapter::family(SyntheticKind::Interaction, 11)
        .model_for(&tuple)
        .expect("synthetic model");
    let layout = tuple.layout();
    (tuple, layout, model)
}

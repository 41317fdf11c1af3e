use rayon::prelude::*;

use super::{with_pool, Evaluator, RewardFunction, ShapleyError};
use crate::mask::{coalitions, DEFAULT_EXACT_CAP};
use crate::model::{AttributionResult, Estimator, MaskVector, ModalityLayout, RewardVector};

/// Exact Shapley values by full coalition enumeration, with the default cap.
pub fn exact_shapley<R: RewardFunction + ?Sized>(
    reward: &R,
    layout: &ModalityLayout,
) -> Result<AttributionResult, ShapleyError> {
    exact_shapley_with_cap(reward, layout, DEFAULT_EXACT_CAP)
}

/// `phi_i = sum over S without i of |S|!(M-|S|-1)!/M! * (r(S+i) - r(S))`,
/// evaluated for every class from one table of `2^M` reward vectors.
pub fn exact_shapley_with_cap<R: RewardFunction + ?Sized>(
    reward: &R,
    layout: &ModalityLayout,
    cap: usize,
) -> Result<AttributionResult, ShapleyError> {
    let m = layout.len();
    let masks = coalitions(m, cap).map_err(|_| ShapleyError::OverCap { m, cap })?;
    let evaluator = Evaluator::new(reward, false, super::DEFAULT_RETRIES);
    let masks: Vec<MaskVector> = masks.collect();

    let table: Vec<RewardVector> = with_pool(reward.max_concurrency(), || {
        masks
            .par_iter()
            .map(|mask| evaluator.evaluate(mask))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let n_classes = table[0].len();

    let weights = coalition_weights(m);
    let mut values = vec![vec![0.0; n_classes]; m];
    for (i, row) in values.iter_mut().enumerate() {
        let bit = 1usize << i;
        for (pattern, without) in table.iter().enumerate() {
            if pattern & bit != 0 {
                continue;
            }
            let with = &table[pattern | bit];
            let w = weights[(pattern as u64).count_ones() as usize];
            for (c, acc) in row.iter_mut().enumerate() {
                *acc += w * (with.logits[c] - without.logits[c]);
            }
        }
    }

    Ok(AttributionResult {
        tuple_id: String::new(),
        estimator: Estimator::Exact,
        iterations: table.len(),
        seed: 0,
        evaluations: evaluator.calls(),
        layout: layout.clone(),
        values,
        reproducible: reward.is_deterministic(),
    })
}

/// `w[s] = s!(M-s-1)!/M! = 1 / (M * C(M-1, s))`.
fn coalition_weights(m: usize) -> Vec<f64> {
    if m == 0 {
        return Vec::new();
    }
    let mut binom = 1.0f64;
    (0..m)
        .map(|s| {
            if s > 0 {
                binom = binom * (m - s) as f64 / s as f64;
            }
            1.0 / (m as f64 * binom)
        })
        .collect()
}

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{with_pool, EstimatorConfig, Evaluator, RewardFunction, ShapleyError};
use crate::model::{AttributionResult, Estimator, MaskVector, ModalityLayout, RewardVector};

/// Walks evaluated in parallel before their sums are folded in order.
const WALK_BATCH: usize = 64;

/// The `index`-th sampled permutation of `m` features for `seed`.
///
/// Each index draws from its own ChaCha stream, so permutations can be
/// generated in any order or on any thread.
pub fn permutation_for(seed: u64, index: u64, m: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Permutation-sampling estimate of the Shapley values of every class.
///
/// `config.iterations` is a budget of coalition evaluations. A walk over
/// `M` features spends `M` of it, so `max(1, iterations / M)` walks run.
/// With antithetic sampling, walk `2k + 1` is the reverse of walk `2k`
/// and an odd walk count above one is rounded down so every pair is
/// complete.
/// The empty and full coalitions are evaluated once and reused by every
/// walk whether or not the memo table is enabled.
pub fn monte_carlo_shapley<R: RewardFunction + ?Sized>(
    reward: &R,
    layout: &ModalityLayout,
    config: &EstimatorConfig,
) -> Result<AttributionResult, ShapleyError> {
    if config.iterations == 0 {
        return Err(ShapleyError::InvalidConfig("iterations must be at least 1".into()));
    }
    let m = layout.len();
    let evaluator = Evaluator::new(reward, config.cache_enabled, config.retries);
    let empty = evaluator.evaluate(&MaskVector::zeros(m))?;
    let full = if m == 0 {
        empty.clone()
    } else {
        evaluator.evaluate(&MaskVector::ones(m))?
    };
    let n_classes = empty.len();

    let mut walks = config.iterations.checked_div(m).map_or(0, |w| w.max(1));
    if config.antithetic && walks > 1 {
        walks -= walks % 2;
    }
    let mut sums = vec![0.0; m * n_classes];
    let mut done = 0usize;

    let walker = Walker {
        evaluator: &evaluator,
        empty: &empty,
        full: &full,
        m,
        n_classes,
        seed: config.seed,
        antithetic: config.antithetic,
    };

    let outcome = with_pool(reward.max_concurrency(), || {
        while done < walks {
            let end = (done + WALK_BATCH).min(walks);
            let batch: Vec<Result<Vec<f64>, ShapleyError>> =
                (done..end).into_par_iter().map(|w| walker.walk(w)).collect();
            for contribution in batch {
                let contribution = contribution?;
                for (acc, v) in sums.iter_mut().zip(&contribution) {
                    *acc += v;
                }
                done += 1;
            }
        }
        Ok(())
    });

    let build = |walks_done: usize, sums: &[f64]| AttributionResult {
        tuple_id: String::new(),
        estimator: Estimator::MonteCarlo,
        iterations: config.iterations,
        seed: config.seed,
        evaluations: evaluator.calls(),
        layout: layout.clone(),
        values: (0..m)
            .map(|i| {
                (0..n_classes)
                    .map(|c| {
                        if walks_done == 0 {
                            0.0
                        } else {
                            sums[i * n_classes + c] / walks_done as f64
                        }
                    })
                    .collect()
            })
            .collect(),
        reproducible: reward.is_deterministic(),
    };

    match outcome {
        Ok(()) => Ok(build(walks, &sums)),
        Err(ShapleyError::RewardFailed {
            attempts, message, ..
        }) => {
            let mut partial = build(done, &sums);
            partial.iterations = done * m;
            Err(ShapleyError::RewardFailed {
                attempts,
                message,
                partial: Some(Box::new(partial)),
            })
        }
        Err(e) => Err(e),
    }
}

struct Walker<'e, 'r, R: ?Sized> {
    evaluator: &'e Evaluator<'r, R>,
    empty: &'e RewardVector,
    full: &'e RewardVector,
    m: usize,
    n_classes: usize,
    seed: u64,
    antithetic: bool,
}

impl<R: RewardFunction + ?Sized> Walker<'_, '_, R> {
    /// Marginal contributions along one prefix walk, laid out `[i * n_c + c]`.
    fn walk(&self, index: usize) -> Result<Vec<f64>, ShapleyError> {
        let (stream, reversed) = if self.antithetic {
            (index / 2, index % 2 == 1)
        } else {
            (index, false)
        };
        let mut order = permutation_for(self.seed, stream as u64, self.m);
        if reversed {
            order.reverse();
        }

        let mut out = vec![0.0; self.m * self.n_classes];
        let mut mask = MaskVector::zeros(self.m);
        let mut prev = self.empty.clone();
        for (step, &feature) in order.iter().enumerate() {
            mask.set(feature, true);
            let cur = if step + 1 == self.m {
                self.full.clone()
            } else {
                self.evaluator.evaluate(&mask)?
            };
            let row = &mut out[feature * self.n_classes..(feature + 1) * self.n_classes];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = cur.logits[c] - prev.logits[c];
            }
            prev = cur;
        }
        Ok(out)
    }
}

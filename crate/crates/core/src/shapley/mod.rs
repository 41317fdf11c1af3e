//! Shapley value computation over masked model evaluations.
//!
//! Every model call returns one logit per answer choice, so a single
//! coalition evaluation updates the attributions of all classes at once.
//! Two estimators are provided:
//!
//! * [`exact_shapley`] enumerates every coalition and applies the
//!   coalition-weight form of the Shapley value. It is the verification
//!   oracle and is limited to small feature counts.
//! * [`monte_carlo_shapley`] samples feature permutations and averages the
//!   marginal contributions met along each prefix walk. The permutation
//!   stream is a pure function of `(seed, permutation index)` and partial
//!   sums are reduced in permutation order, so results are bit-identical for
//!   any degree of parallel evaluation.

mod cache;
mod exact;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::mask::DEFAULT_EXACT_CAP;
use crate::model::{AttributionResult, MaskVector, RewardVector};

pub use cache::Evaluator;
pub use exact::{exact_shapley, exact_shapley_with_cap};
pub use sampling::{monte_carlo_shapley, permutation_for};

/// Default evaluation budget per tuple.
pub const DEFAULT_ITERATIONS: usize = 5000;
/// Retries after a failed reward call before the run aborts.
pub const DEFAULT_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    /// Worth retrying: timeouts, transport hiccups, flaky backends.
    #[error("{0}")]
    Transient(String),
    /// Retrying cannot help: unknown tuple, mask length mismatch.
    #[error("{0}")]
    Fatal(String),
}

impl RewardError {
    pub fn message(&self) -> &str {
        match self {
            RewardError::Transient(m) | RewardError::Fatal(m) => m,
        }
    }
}

/// The coalition value function `r(S)`, one value per class.
pub trait RewardFunction: Sync {
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError>;

    /// Equal masks always produce equal logits.
    fn is_deterministic(&self) -> bool {
        true
    }

    /// Upper bound on concurrent `evaluate` calls.
    fn max_concurrency(&self) -> usize {
        1
    }
}

impl<R: RewardFunction + ?Sized> RewardFunction for &R {
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError> {
        (**self).evaluate(mask)
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn max_concurrency(&self) -> usize {
        (**self).max_concurrency()
    }
}

/// Adapts an infallible closure into a deterministic reward.
pub struct FnReward<F> {
    f: F,
    concurrency: usize,
}

impl<F> FnReward<F>
where
    F: Fn(&MaskVector) -> Vec<f64> + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            concurrency: available_parallelism(),
        }
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }
}

impl<F> RewardFunction for FnReward<F>
where
    F: Fn(&MaskVector) -> Vec<f64> + Sync,
{
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError> {
        Ok(RewardVector::new((self.f)(mask)))
    }

    fn max_concurrency(&self) -> usize {
        self.concurrency
    }
}

/// Forces a fixed set of features to stay masked for the whole run.
/// Features cleared in `keep` become null players.
pub struct Background<R> {
    inner: R,
    keep: MaskVector,
}

impl<R: RewardFunction> Background<R> {
    pub fn new(inner: R, keep: MaskVector) -> Self {
        Self { inner, keep }
    }
}

impl<R: RewardFunction> RewardFunction for Background<R> {
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError> {
        self.inner.evaluate(&mask.and(&self.keep))
    }
    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
    fn max_concurrency(&self) -> usize {
        self.inner.max_concurrency()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Budget of coalition evaluations; a walk over `M` features uses `M`.
    pub iterations: usize,
    pub seed: u64,
    /// Also walk the reverse of every sampled permutation.
    pub antithetic: bool,
    pub cache_enabled: bool,
    pub retries: usize,
    pub exact_cap: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            antithetic: true,
            cache_enabled: true,
            retries: DEFAULT_RETRIES,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl EstimatorConfig {
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_cache(mut self, on: bool) -> Self {
        self.cache_enabled = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapleyError {
    #[error("{m} features exceed the exact enumeration cap of {cap}")]
    OverCap { m: usize, cap: usize },
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("reward returned a non-finite logit for mask {mask:?}")]
    NonFinite { mask: String },
    #[error("reward returned {found} logits, expected {expected}")]
    ClassCountMismatch { expected: usize, found: usize },
    #[error("reward failed after {attempts} attempt(s): {message}")]
    RewardFailed {
        attempts: usize,
        message: String,
        /// Estimate over the permutations completed before the failure.
        partial: Option<Box<AttributionResult>>,
    },
    #[error("attribution shapes differ: {0}")]
    ShapeMismatch(String),
}

impl ShapleyError {
    pub fn partial(&self) -> Option<&AttributionResult> {
        match self {
            ShapleyError::RewardFailed { partial, .. } => partial.as_deref(),
            _ => None,
        }
    }
}

/// Mean squared difference over every (feature, class) entry.
pub fn estimator_mse(
    candidate: &AttributionResult,
    reference: &AttributionResult,
) -> Result<f64, ShapleyError> {
    let (m, n) = (candidate.n_features(), candidate.n_classes());
    if m != reference.n_features() || n != reference.n_classes() {
        return Err(ShapleyError::ShapeMismatch(format!(
            "{m}x{n} vs {}x{}",
            reference.n_features(),
            reference.n_classes()
        )));
    }
    if m * n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (a, b) in candidate.values.iter().zip(&reference.values) {
        if a.len() != b.len() {
            return Err(ShapleyError::ShapeMismatch("ragged value rows".into()));
        }
        sum += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok(sum / (m * n) as f64)
}

pub(crate) fn available_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `f` on a pool no wider than the reward's concurrency hint.
pub(crate) fn with_pool<T: Send>(concurrency: usize, f: impl FnOnce() -> T + Send) -> T {
    let threads = concurrency.clamp(1, available_parallelism());
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to start evaluation thread pool")
        .install(f)
}

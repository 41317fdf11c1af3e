use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use once_cell::sync::OnceCell;

use super::{RewardError, RewardFunction, ShapleyError};
use crate::model::{MaskVector, RewardVector};

/// Wraps a reward with retries, finiteness and arity checks, a call
/// counter and an optional memo table.
///
/// The memo table evaluates each distinct mask at most once even under
/// concurrent lookups: racing callers block on the same cell.
pub struct Evaluator<'a, R: ?Sized> {
    reward: &'a R,
    cache: Option<DashMap<MaskVector, Arc<OnceCell<RewardVector>>>>,
    calls: AtomicUsize,
    retries: usize,
    n_classes: OnceCell<usize>,
}

impl<'a, R: RewardFunction + ?Sized> Evaluator<'a, R> {
    /// Caching is silently disabled for nondeterministic rewards.
    pub fn new(reward: &'a R, cache_enabled: bool, retries: usize) -> Self {
        let cache = (cache_enabled && reward.is_deterministic()).then(DashMap::new);
        Self {
            reward,
            cache,
            calls: AtomicUsize::new(0),
            retries,
            n_classes: OnceCell::new(),
        }
    }

    pub fn is_caching(&self) -> bool {
        self.cache.is_some()
    }

    /// Number of calls made to the underlying reward, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes.get().copied()
    }

    pub fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, ShapleyError> {
        match &self.cache {
            None => self.call(mask),
            Some(map) => {
                let cell = map.entry(mask.clone()).or_default().clone();
                cell.get_or_try_init(|| self.call(mask)).cloned()
            }
        }
    }

    fn call(&self, mask: &MaskVector) -> Result<RewardVector, ShapleyError> {
        let attempts = self.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.reward.evaluate(mask) {
                Ok(r) => return self.check(mask, r),
                Err(RewardError::Transient(msg)) => last = msg,
                Err(RewardError::Fatal(msg)) => {
                    return Err(ShapleyError::RewardFailed {
                        attempts: 1,
                        message: msg,
                        partial: None,
                    })
                }
            }
        }
        Err(ShapleyError::RewardFailed {
            attempts,
            message: last,
            partial: None,
        })
    }

    fn check(&self, mask: &MaskVector, r: RewardVector) -> Result<RewardVector, ShapleyError> {
        if !r.is_finite() {
            return Err(ShapleyError::NonFinite {
                mask: crate::adapter::encode_mask_hex(mask),
            });
        }
        let expected = *self.n_classes.get_or_init(|| r.len());
        if r.len() != expected {
            return Err(ShapleyError::ClassCountMismatch {
                expected,
                found: r.len(),
            });
        }
        Ok(r)
    }
}

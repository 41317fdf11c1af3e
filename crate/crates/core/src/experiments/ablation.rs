use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::model::{AttributionResult, ModalityLayout};
use crate::shapley::{
    estimator_mse, exact_shapley_with_cap, monte_carlo_shapley, EstimatorConfig, RewardFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationReference {
    /// Full enumeration; needs `M` within the exact cap.
    Exact,
    /// A Monte Carlo run at this budget with the base seed.
    Iterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub iterations: usize,
    pub mean_mse: f64,
}

/// Mean (over `seeds`) estimator MSE against a reference, per grid point,
/// in grid order.
pub fn iteration_ablation<R: RewardFunction + ?Sized>(
    reward: &R,
    layout: &ModalityLayout,
    grid: &[usize],
    reference: AblationReference,
    seeds: &[u64],
    base: &EstimatorConfig,
) -> Result<Vec<AblationPoint>, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::InvalidConfig("ablation needs at least one seed".into()));
    }
    let reference: AttributionResult = match reference {
        AblationReference::Exact => exact_shapley_with_cap(reward, layout, base.exact_cap)?,
        AblationReference::Iterations(n) => {
            if grid.iter().any(|&g| g > n) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "reference budget {n} is below the largest grid point"
                )));
            }
            monte_carlo_shapley(reward, layout, &base.clone().with_iterations(n))?
        }
    };
    grid.iter()
        .map(|&iterations| {
            let mut total = 0.0;
            for &seed in seeds {
                let cfg = base.clone().with_iterations(iterations).with_seed(seed);
                let est = monte_carlo_shapley(reward, layout, &cfg)?;
                total += estimator_mse(&est, &reference)?;
            }
            Ok(AblationPoint {
                iterations,
                mean_mse: total / seeds.len() as f64,
            })
        })
        .collect()
}

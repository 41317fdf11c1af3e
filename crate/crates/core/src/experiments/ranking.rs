use super::ExperimentError;
use crate::model::AttributionResult;

fn positions(rank: &[usize]) -> Result<Vec<usize>, ExperimentError> {
    let n = rank.len();
    let mut pos = vec![usize::MAX; n];
    for (p, &item) in rank.iter().enumerate() {
        if item >= n || pos[item] != usize::MAX {
            return Err(ExperimentError::Ranking(format!(
                "{rank:?} is not a permutation of 0..{n}"
            )));
        }
        pos[item] = p;
    }
    Ok(pos)
}

/// Spearman's rho between two strict rankings of the same items, each given
/// as items listed from first to last place.
pub fn spearman_correlation(rank_a: &[usize], rank_b: &[usize]) -> Result<f64, ExperimentError> {
    if rank_a.len() != rank_b.len() {
        return Err(ExperimentError::Ranking(format!(
            "rankings have {} and {} items",
            rank_a.len(),
            rank_b.len()
        )));
    }
    let n = rank_a.len();
    if n < 2 {
        return Err(ExperimentError::Ranking("need at least two items".into()));
    }
    let pa = positions(rank_a)?;
    let pb = positions(rank_b)?;
    let d2: u128 = pa
        .iter()
        .zip(&pb)
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u128;
            d * d
        })
        .sum();
    let n = n as u128;
    Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64)
}

/// Frame indices by decreasing `|phi|` for `class`; equal magnitudes keep
/// ascending frame order.
pub fn rank_frames_by_attribution(attr: &AttributionResult, class: usize) -> Result<Vec<usize>, ExperimentError> {
    let n_v = attr.layout.n_v;
    if n_v == 0 {
        return Err(ExperimentError::Ranking(format!("{} has no frames", attr.tuple_id)));
    }
    if class >= attr.n_classes() {
        return Err(ExperimentError::Ranking(format!(
            "class {class} out of range for {} classes",
            attr.n_classes()
        )));
    }
    let mut frames: Vec<usize> = (0..n_v).collect();
    frames.sort_by(|&a, &b| {
        let (ma, mb) = (attr.values[a][class].abs(), attr.values[b][class].abs());
        mb.total_cmp(&ma).then(a.cmp(&b))
    });
    Ok(frames)
}

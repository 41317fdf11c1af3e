use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::adapter::Adapter;
use crate::mask::{materialize_mask, MaskSpec};
use crate::metrics::{fmt_f64, Triple};
use crate::model::{AttributionResult, Dataset, MaskVector, Modality, VqaTuple};
use crate::shapley::{with_pool, Evaluator, DEFAULT_RETRIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingRow {
    pub spec: MaskSpec,
    pub accuracy: f64,
    pub delta_vs_none: f64,
    /// Sign masks only: mean fraction of each modality's features masked.
    pub masked_fraction: Option<Triple>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingReport {
    pub baseline: f64,
    /// Unmasked argmax per tuple, in dataset order.
    pub baseline_predictions: Vec<usize>,
    pub n_tuples: usize,
    pub rows: Vec<MaskingRow>,
}

impl MaskingReport {
    pub fn row(&self, spec: &MaskSpec) -> Option<&MaskingRow> {
        self.rows.iter().find(|r| &r.spec == spec)
    }

    /// `mask,accuracy,delta,masked_v,masked_q,masked_a`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,accuracy,delta,masked_v,masked_q,masked_a\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.spec, fmt_f64(r.accuracy), fmt_f64(r.delta_vs_none));
            match r.masked_fraction {
                Some(f) => {
                    for v in f {
                        let _ = write!(out, ",{}", fmt_f64(v));
                    }
                }
                None => out.push_str(",,,"),
            }
            out.push('\n');
        }
        out
    }
}

fn predict(adapter: &dyn Adapter, tuple: &VqaTuple, mask: &MaskVector) -> Result<usize, ExperimentError> {
    let wrap = |source| ExperimentError::Adapter {
        tuple_id: tuple.tuple_id.clone(),
        source,
    };
    let reward = adapter.bind(tuple).map_err(wrap)?;
    let logits = Evaluator::new(&*reward, false, DEFAULT_RETRIES)
        .evaluate(mask)
        .map_err(|source| ExperimentError::Evaluation {
            tuple_id: tuple.tuple_id.clone(),
            source,
        })?;
    Ok(logits.argmax().expect("tuples have at least two choices"))
}

/// Accuracy of argmax predictions under each mask spec. The `none` spec is
/// always evaluated and is the baseline for every delta.
pub fn run_masking_experiment(
    dataset: &Dataset,
    adapter: &dyn Adapter,
    specs: &[MaskSpec],
    attributions: Option<&HashMap<String, AttributionResult>>,
) -> Result<MaskingReport, ExperimentError> {
    if specs.iter().any(MaskSpec::is_sign) {
        let missing: Vec<String> = dataset
            .tuples
            .iter()
            .filter(|t| attributions.is_none_or(|a| !a.contains_key(&t.tuple_id)))
            .map(|t| t.tuple_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(ExperimentError::MissingAttributions(missing));
        }
    }

    let concurrency = adapter
        .handshake()
        .map_err(|source| ExperimentError::Adapter {
            tuple_id: String::new(),
            source,
        })?
        .max_concurrency;

    let n = dataset.len();
    let run = |spec: &MaskSpec| -> Result<(Vec<usize>, Option<Triple>), ExperimentError> {
        let outcomes: Vec<(usize, [Option<f64>; 3])> = with_pool(concurrency, || {
            dataset
                .tuples
                .par_iter()
                .map(|t| {
                    let layout = t.layout();
                    let attr = attributions.and_then(|a| a.get(&t.tuple_id));
                    let mask = materialize_mask(spec, &layout, t.ground_truth, attr)?;
                    let fractions = Modality::ALL.map(|m| {
                        let seg = layout.segment(m);
                        (!seg.is_empty()).then(|| {
                            let masked = seg.clone().filter(|&i| !mask.get(i)).count();
                            masked as f64 / seg.len() as f64
                        })
                    });
                    Ok((predict(adapter, t, &mask)?, fractions))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()
        })?;
        let predictions = outcomes.iter().map(|(p, _)| *p).collect();
        let fraction = spec.is_sign().then(|| {
            let mut out = [0.0; 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let vals: Vec<f64> = outcomes.iter().filter_map(|(_, f)| f[k]).collect();
                if !vals.is_empty() {
                    *slot = vals.iter().sum::<f64>() / vals.len() as f64;
                }
            }
            out
        });
        Ok((predictions, fraction))
    };

    let accuracy = |preds: &[usize]| -> f64 {
        if n == 0 {
            return 0.0;
        }
        let hits = preds
            .iter()
            .zip(&dataset.tuples)
            .filter(|(p, t)| **p == t.ground_truth)
            .count();
        hits as f64 / n as f64
    };

    let (base_preds, _) = run(&MaskSpec::NONE)?;
    let baseline = accuracy(&base_preds);
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let (predictions, masked_fraction) = if *spec == MaskSpec::NONE {
            (base_preds.clone(), None)
        } else {
            run(spec)?
        };
        let acc = accuracy(&predictions);
        rows.push(MaskingRow {
            spec: *spec,
            accuracy: acc,
            delta_vs_none: acc - baseline,
            masked_fraction,
            predictions,
        });
    }
    Ok(MaskingReport {
        baseline,
        baseline_predictions: base_preds,
        n_tuples: n,
        rows,
    })
}

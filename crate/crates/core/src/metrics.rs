//! Per-tuple normalization and the modality preference metrics.
//!
//! Modality Contribution (MC) is each modality's share of the total
//! normalized attribution magnitude. Per-Feature Contribution (PFC) is each
//! modality's share of the summed per-feature mean magnitudes, which removes
//! the advantage long segments get from sheer feature count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{AttributionResult, Modality, ModalityLayout};

/// (video, question, answer).
pub type Triple = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassBasis {
    GroundTruth,
    /// Raw values averaged over every non-ground-truth class, then normalized.
    FalseMean,
}

impl ClassBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassBasis::GroundTruth => "ground_truth",
            ClassBasis::FalseMean => "false_mean",
        }
    }
}

impl std::str::FromStr for ClassBasis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gt" | "ground_truth" => Ok(ClassBasis::GroundTruth),
            "false" | "false_mean" => Ok(ClassBasis::FalseMean),
            _ => Err(format!("unknown class basis {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("ground truth {gt} out of range for {n_classes} classes")]
    GroundTruth { gt: usize, n_classes: usize },
    #[error("false-logit basis needs at least one non-ground-truth class")]
    NoFalseClass,
    #[error("values cover {found} features, layout has {expected}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("cannot aggregate scores computed on different class bases")]
    MixedBasis,
}

/// Attributions with every class column scaled into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAttribution {
    /// `values[i][c]`.
    pub values: Vec<Vec<f64>>,
}

impl NormalizedAttribution {
    pub fn class_column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[c]).collect()
    }
}

/// Divides a column by its largest magnitude; all-zero columns pass through.
pub fn normalize_column(column: &[f64]) -> Vec<f64> {
    let peak = column.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return column.to_vec();
    }
    column.iter().map(|v| v / peak).collect()
}

pub fn normalize(attr: &AttributionResult) -> NormalizedAttribution {
    normalize_values(&attr.values)
}

pub fn normalize_values(values: &[Vec<f64>]) -> NormalizedAttribution {
    let n_c = values.first().map_or(0, Vec::len);
    let columns: Vec<Vec<f64>> = (0..n_c)
        .map(|c| normalize_column(&values.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect();
    NormalizedAttribution {
        values: (0..values.len())
            .map(|i| columns.iter().map(|col| col[i]).collect())
            .collect(),
    }
}

/// The normalized per-feature vector the metrics are computed on.
pub fn basis_vector(
    attr: &AttributionResult,
    ground_truth: usize,
    basis: ClassBasis,
) -> Result<Vec<f64>, MetricsError> {
    let n_classes = attr.n_classes();
    if ground_truth >= n_classes {
        return Err(MetricsError::GroundTruth {
            gt: ground_truth,
            n_classes,
        });
    }
    let raw = match basis {
        ClassBasis::GroundTruth => attr.class_column(ground_truth),
        ClassBasis::FalseMean => {
            if n_classes < 2 {
                return Err(MetricsError::NoFalseClass);
            }
            let n_false = (n_classes - 1) as f64;
            attr.values
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != ground_truth)
                        .map(|(_, v)| v)
                        .sum::<f64>()
                        / n_false
                })
                .collect()
        }
    };
    Ok(normalize_column(&raw))
}

fn segment_sums(values: &[f64], layout: &ModalityLayout) -> Result<Triple, MetricsError> {
    if values.len() != layout.len() {
        return Err(MetricsError::LayoutMismatch {
            expected: layout.len(),
            found: values.len(),
        });
    }
    Ok(Modality::ALL.map(|m| values[layout.segment(m)].iter().map(|v| v.abs()).sum()))
}

/// `MC_m = sum_{i in m} |v_i| / sum_i |v_i|`; `None` when every value is 0.
pub fn modality_contribution(values: &[f64], layout: &ModalityLayout) -> Result<Option<Triple>, MetricsError> {
    let sums = segment_sums(values, layout)?;
    let total: f64 = sums.iter().sum();
    Ok((total > 0.0).then(|| sums.map(|s| s / total)))
}

/// `PFC_m = M_m / (M_V + M_Q + M_A)` with `M_m` the mean magnitude over
/// segment `m` (0 for an empty segment); `None` when all means are 0.
pub fn per_feature_contribution(values: &[f64], layout: &ModalityLayout) -> Result<Option<Triple>, MetricsError> {
    let sums = segment_sums(values, layout)?;
    let mut means = [0.0; 3];
    for (k, m) in Modality::ALL.into_iter().enumerate() {
        let n = layout.segment_len(m);
        if n > 0 {
            means[k] = sums[k] / n as f64;
        }
    }
    let total: f64 = means.iter().sum();
    Ok((total > 0.0).then(|| means.map(|s| s / total)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityScores {
    pub tuple_id: String,
    pub basis: ClassBasis,
    pub mc: Option<Triple>,
    pub pfc: Option<Triple>,
}

impl ModalityScores {
    pub fn is_defined(&self) -> bool {
        self.mc.is_some() && self.pfc.is_some()
    }
}

pub fn score_tuple(
    attr: &AttributionResult,
    ground_truth: usize,
    basis: ClassBasis,
) -> Result<ModalityScores, MetricsError> {
    let v = basis_vector(attr, ground_truth, basis)?;
    Ok(ModalityScores {
        tuple_id: attr.tuple_id.clone(),
        basis,
        mc: modality_contribution(&v, &attr.layout)?,
        pfc: per_feature_contribution(&v, &attr.layout)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub basis: Option<ClassBasis>,
    pub mc: Option<Triple>,
    pub pfc: Option<Triple>,
    pub included: usize,
    /// Tuples whose attributions were all zero.
    pub excluded: usize,
}

/// Dataset means over tuples with defined scores.
pub fn aggregate(per_tuple: &[ModalityScores]) -> Result<AggregateScores, MetricsError> {
    let basis = per_tuple.first().map(|s| s.basis);
    if per_tuple.iter().any(|s| Some(s.basis) != basis) {
        return Err(MetricsError::MixedBasis);
    }
    let defined: Vec<&ModalityScores> = per_tuple.iter().filter(|s| s.is_defined()).collect();
    let mean = |pick: fn(&ModalityScores) -> Triple| -> Option<Triple> {
        if defined.is_empty() {
            return None;
        }
        let mut acc = [0.0; 3];
        for s in &defined {
            for (a, v) in acc.iter_mut().zip(pick(s)) {
                *a += v;
            }
        }
        Some(acc.map(|a| a / defined.len() as f64))
    };
    Ok(AggregateScores {
        basis,
        mc: mean(|s| s.mc.expect("defined")),
        pfc: mean(|s| s.pfc.expect("defined")),
        included: defined.len(),
        excluded: per_tuple.len() - defined.len(),
    })
}

/// Formats a float for CSV output: shortest round-trip form, `-0` as `0`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn push_triple(out: &mut String, t: Option<Triple>) {
    match t {
        Some(t) => {
            for v in t {
                let _ = write!(out, ",{}", fmt_f64(v));
            }
        }
        None => out.push_str(",,,"),
    }
}

/// Label used for the dataset-level row of the metrics CSV.
pub const AGGREGATE_ROW: &str = "aggregate";

/// `tuple_id,basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a`, one row per tuple and
/// a final aggregate row. Undefined triples are left empty.
pub fn metrics_csv(rows: &[ModalityScores], agg: &AggregateScores) -> String {
    let mut out = String::from("tuple_id,basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a\n");
    for r in rows {
        out.push_str(&csv_field(&r.tuple_id));
        out.push(',');
        out.push_str(r.basis.as_str());
        push_triple(&mut out, r.mc);
        push_triple(&mut out, r.pfc);
        out.push('\n');
    }
    out.push_str(AGGREGATE_ROW);
    out.push(',');
    out.push_str(agg.basis.map_or("", ClassBasis::as_str));
    push_triple(&mut out, agg.mc);
    push_triple(&mut out, agg.pfc);
    out.push('\n');
    out
}

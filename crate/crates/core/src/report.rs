//! Data exports behind the figures: attribution heatmap matrices, word
//! frequency/attribution tables and per-modality value dumps.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{csv_field, fmt_f64, normalize_column};
use crate::model::{AttributionResult, Modality, VqaTuple};

/// Default column limit for heatmap rows.
pub const HEATMAP_COLUMNS: usize = 200;

/// One row per tuple: the normalized ground-truth column in layout order,
/// cut to `truncate_to` features. Rows are as long as their tuple allows.
pub fn heatmap_matrix(rows: &[(&AttributionResult, usize)], truncate_to: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|(attr, gt)| {
            let mut v = normalize_column(&attr.class_column(*gt));
            v.truncate(truncate_to);
            v
        })
        .collect()
}

pub fn matrix_csv(matrix: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Diverging red-white-blue colour for a value in `[-1, 1]`.
pub fn diverging_rgb(v: f64) -> [u8; 3] {
    let t = v.clamp(-1.0, 1.0);
    let fade = |x: f64| (255.0 * (1.0 - x)).round() as u8;
    if t >= 0.0 {
        [fade(t), fade(t), 255]
    } else {
        [255, fade(-t), fade(-t)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStat {
    pub word: String,
    pub frequency: usize,
    pub mean_value: f64,
}

/// Frequency and mean ground-truth attribution of every case-folded
/// textual element across questions and answers. Whitespace-only elements
/// (masked text) are skipped. Sorted by frequency, then word.
///
/// With `normalized`, each tuple's values are first scaled by its largest
/// magnitude so tuples contribute on a common scale.
pub fn word_report(pairs: &[(&VqaTuple, &AttributionResult)], normalized: bool) -> Vec<WordStat> {
    let mut acc: HashMap<String, (usize, f64)> = HashMap::new();
    for (tuple, attr) in pairs {
        let raw = attr.class_column(tuple.ground_truth);
        let values = if normalized { normalize_column(&raw) } else { raw };
        let layout = &attr.layout;
        let text = tuple
            .question_elements
            .iter()
            .chain(tuple.choices.iter().flatten());
        let start = layout.segment(Modality::Question).start;
        for (offset, element) in text.enumerate() {
            if element.trim().is_empty() {
                continue;
            }
            let Some(&v) = values.get(start + offset) else { break };
            let slot = acc.entry(element.to_lowercase()).or_insert((0, 0.0));
            slot.0 += 1;
            slot.1 += v;
        }
    }
    let mut stats: Vec<WordStat> = acc
        .into_iter()
        .map(|(word, (frequency, sum))| WordStat {
            word,
            frequency,
            mean_value: sum / frequency as f64,
        })
        .collect();
    stats.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.word.cmp(&b.word)));
    stats
}

pub fn word_report_csv(stats: &[WordStat]) -> String {
    let mut out = String::from("word,frequency,mean_value\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{}", csv_field(&s.word), s.frequency, fmt_f64(s.mean_value));
    }
    out
}

/// Long-format dump of normalized ground-truth values for distribution
/// plots: `tuple_id,modality,feature,value`.
pub fn modality_value_dump(rows: &[(&AttributionResult, usize)]) -> String {
    let mut out = String::from("tuple_id,modality,feature,value\n");
    for (attr, gt) in rows {
        let v = normalize_column(&attr.class_column(*gt));
        for m in Modality::ALL {
            for i in attr.layout.segment(m) {
                let _ = writeln!(out, "{},{},{},{}", csv_field(&attr.tuple_id), m, i, fmt_f64(v[i]));
            }
        }
    }
    out
}

//! Mask construction: coalition enumeration, whole-modality masks,
//! sign-based masks and the text-side masking transform.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{choice_label, AttributionResult, MaskVector, Modality, ModalityLayout};

/// Replacement for a masked textual element.
pub const TEXT_MASK: &str = " ";

/// Default upper bound on `M` for exhaustive coalition enumeration.
pub const DEFAULT_EXACT_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaskError {
    #[error("sign mask requires attributions")]
    MissingAttributions,
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("attributions cover {found} features but the layout has {expected}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("distractor protection needs the per-choice layout table")]
    MissingChoiceTable,
    #[error("{elements} elements but {bits} mask bits")]
    LengthMismatch { elements: usize, bits: usize },
    #[error("{m} features exceed the exact enumeration cap of {cap}")]
    OverCap { m: usize, cap: usize },
    #[error("invalid mask spec {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// Which class column a sign mask reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassSelector {
    GroundTruth,
    Index(usize),
}

impl ClassSelector {
    pub fn resolve(self, ground_truth: usize) -> usize {
        match self {
            ClassSelector::GroundTruth => ground_truth,
            ClassSelector::Index(c) => c,
        }
    }
}

impl fmt::Display for ClassSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSelector::GroundTruth => f.write_str("gt"),
            ClassSelector::Index(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for ClassSelector {
    type Err = MaskError;

    /// `gt`, a zero-based index, or a choice letter.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("gt") {
            return Ok(ClassSelector::GroundTruth);
        }
        if let Ok(c) = s.parse::<usize>() {
            return Ok(ClassSelector::Index(c));
        }
        let mut chars = s.chars();
        if let (Some(ch), None) = (chars.next(), chars.next()) {
            let up = ch.to_ascii_uppercase();
            if let Some(k) = (0..26).find(|&k| choice_label(k) == Some(up)) {
                return Ok(ClassSelector::Index(k));
            }
        }
        Err(MaskError::Parse(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    None,
    All,
    Modality(Modality),
    Sign { sign: Sign, class: ClassSelector },
}

/// A mask recipe, materialized per tuple by [`materialize_mask`].
///
/// Serialized as its CLI string, e.g. `"video"` or `"neg:gt+protect"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskSpec {
    pub kind: MaskKind,
    /// Sign masks only: never mask answer elements of non-ground-truth choices.
    pub protect_non_ground_truth: bool,
}

impl MaskSpec {
    pub const fn new(kind: MaskKind) -> Self {
        Self {
            kind,
            protect_non_ground_truth: false,
        }
    }

    pub const NONE: MaskSpec = MaskSpec::new(MaskKind::None);
    pub const ALL: MaskSpec = MaskSpec::new(MaskKind::All);

    pub const fn modality(m: Modality) -> Self {
        Self::new(MaskKind::Modality(m))
    }

    pub const fn sign(sign: Sign, class: ClassSelector) -> Self {
        Self::new(MaskKind::Sign { sign, class })
    }

    pub fn protected(mut self, on: bool) -> Self {
        self.protect_non_ground_truth = on;
        self
    }

    pub fn is_sign(&self) -> bool {
        matches!(self.kind, MaskKind::Sign { .. })
    }

    /// The five whole-input specs: none, all, video, question, answer.
    pub fn table_rows() -> Vec<MaskSpec> {
        let mut v = vec![MaskSpec::NONE, MaskSpec::ALL];
        v.extend(Modality::ALL.map(MaskSpec::modality));
        v
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MaskKind::None => f.write_str("none")?,
            MaskKind::All => f.write_str("all")?,
            MaskKind::Modality(m) => f.write_str(m.as_str())?,
            MaskKind::Sign { sign, class } => {
                let s = if sign == Sign::Negative { "neg" } else { "pos" };
                write!(f, "{s}:{class}")?
            }
        }
        if self.protect_non_ground_truth {
            f.write_str("+protect")?;
        }
        Ok(())
    }
}

impl FromStr for MaskSpec {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (body, protect) = match s.strip_suffix("+protect") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = match body {
            "none" => MaskKind::None,
            "all" => MaskKind::All,
            "video" => MaskKind::Modality(Modality::Video),
            "question" => MaskKind::Modality(Modality::Question),
            "answer" => MaskKind::Modality(Modality::Answer),
            _ => {
                let (sign, class) = body
                    .split_once(':')
                    .ok_or_else(|| MaskError::Parse(s.to_string()))?;
                let sign = match sign {
                    "neg" => Sign::Negative,
                    "pos" => Sign::Positive,
                    _ => return Err(MaskError::Parse(s.to_string())),
                };
                let class = class.parse().map_err(|_| MaskError::Parse(s.to_string()))?;
                MaskKind::Sign { sign, class }
            }
        };
        if protect && !matches!(kind, MaskKind::Sign { .. }) {
            return Err(MaskError::Parse(s.to_string()));
        }
        Ok(MaskSpec {
            kind,
            protect_non_ground_truth: protect,
        })
    }
}

impl TryFrom<String> for MaskSpec {
    type Error = MaskError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MaskSpec> for String {
    fn from(m: MaskSpec) -> String {
        m.to_string()
    }
}

/// Builds the simplified feature vector for `spec`; a clear bit masks the
/// feature.
pub fn materialize_mask(
    spec: &MaskSpec,
    layout: &ModalityLayout,
    ground_truth: usize,
    attributions: Option<&AttributionResult>,
) -> Result<MaskVector, MaskError> {
    let m = layout.len();
    match spec.kind {
        MaskKind::None => Ok(MaskVector::ones(m)),
        MaskKind::All => Ok(MaskVector::zeros(m)),
        MaskKind::Modality(modality) => {
            let mut mask = MaskVector::ones(m);
            for i in layout.segment(modality) {
                mask.set(i, false);
            }
            Ok(mask)
        }
        MaskKind::Sign { sign, class } => {
            let attr = attributions.ok_or(MaskError::MissingAttributions)?;
            if attr.n_features() != m {
                return Err(MaskError::LayoutMismatch {
                    expected: m,
                    found: attr.n_features(),
                });
            }
            let c = class.resolve(ground_truth);
            let n_classes = attr.n_classes();
            if c >= n_classes {
                return Err(MaskError::ClassOutOfRange { class: c, n_classes });
            }
            if spec.protect_non_ground_truth && !layout.has_choice_table() {
                return Err(MaskError::MissingChoiceTable);
            }
            let mut mask = MaskVector::ones(m);
            for (i, row) in attr.values.iter().enumerate() {
                let v = row[c];
                let hit = match sign {
                    Sign::Negative => v < 0.0,
                    Sign::Positive => v > 0.0,
                };
                if !hit {
                    continue;
                }
                if spec.protect_non_ground_truth
                    && layout.choice_of(i).is_some_and(|k| k != ground_truth)
                {
                    continue;
                }
                mask.set(i, false);
            }
            Ok(mask)
        }
    }
}

/// Replaces masked elements with a single space, keeping positions.
pub fn apply_text_mask<S: AsRef<str>>(elements: &[S], bits: &[bool]) -> Result<Vec<String>, MaskError> {
    if elements.len() != bits.len() {
        return Err(MaskError::LengthMismatch {
            elements: elements.len(),
            bits: bits.len(),
        });
    }
    Ok(elements
        .iter()
        .zip(bits)
        .map(|(e, &keep)| {
            if keep {
                e.as_ref().to_string()
            } else {
                TEXT_MASK.to_string()
            }
        })
        .collect())
}

/// Restartable enumeration of all `2^M` coalitions in increasing integer
/// order of the bit pattern (bit `i` = feature `i`).
#[derive(Debug, Clone)]
pub struct Coalitions {
    m: usize,
    next: u64,
    end: u64,
}

impl Coalitions {
    pub fn n_features(&self) -> usize {
        self.m
    }
}

impl Iterator for Coalitions {
    type Item = MaskVector;

    fn next(&mut self) -> Option<MaskVector> {
        if self.next >= self.end {
            return None;
        }
        let mask = MaskVector::from_u64(self.next, self.m);
        self.next += 1;
        Some(mask)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Coalitions {}

pub fn coalition_masks(layout: &ModalityLayout, cap: usize) -> Result<Coalitions, MaskError> {
    coalitions(layout.len(), cap)
}

pub fn coalitions(m: usize, cap: usize) -> Result<Coalitions, MaskError> {
    if m > cap || m >= 64 {
        return Err(MaskError::OverCap { m, cap });
    }
    Ok(Coalitions {
        m,
        next: 0,
        end: 1u64 << m,
    })
}

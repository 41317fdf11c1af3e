//! Shared data model: question-answer tuples, the flat feature layout,
//! masks, reward vectors and attribution results.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Maximum number of answer choices; labels run `A..=Z`.
pub const MAX_CHOICES: usize = 26;
/// Minimum number of answer choices.
pub const MIN_CHOICES: usize = 2;

/// The three input modalities, in flat-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Question,
    Answer,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Video, Modality::Question, Modality::Answer];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Question => "question",
            Modality::Answer => "answer",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One multiple-choice instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaTuple {
    pub tuple_id: String,
    /// Opaque frame handles; the engine never decodes them.
    pub frames: Vec<String>,
    #[serde(rename = "question")]
    pub question_elements: Vec<String>,
    pub choices: Vec<Vec<String>>,
    pub ground_truth: usize,
    #[serde(default)]
    pub question_type: Option<String>,
}

/// Label of choice `index`: `A`, `B`, ... Returns `None` past `Z`.
pub fn choice_label(index: usize) -> Option<char> {
    (index < MAX_CHOICES).then(|| (b'A' + index as u8) as char)
}

impl VqaTuple {
    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    /// Derived labels for every choice.
    pub fn labels(&self) -> Vec<char> {
        (0..self.choices.len()).filter_map(choice_label).collect()
    }

    /// Text of one choice with elements joined by single spaces.
    pub fn choice_text(&self, index: usize) -> String {
        self.choices[index].join(" ")
    }

    pub fn ground_truth_text(&self) -> String {
        self.choice_text(self.ground_truth)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_tuple(self)
    }

    /// Layout of the flat feature space. The tuple should validate first;
    /// the layout is still well defined for malformed tuples.
    pub fn layout(&self) -> ModalityLayout {
        build_modality_layout(self)
    }
}

/// Problems found by [`validate_tuple`]. Empty means well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.problems.iter().any(|p| p.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.problems.join("; "))
    }
}

fn check_element(problems: &mut Vec<String>, place: &str, element: &str) {
    if element.is_empty() {
        problems.push(format!("{place}: empty element"));
    } else if element.chars().any(char::is_whitespace) {
        problems.push(format!("{place}: element contains whitespace ({element:?})"));
    }
}

/// Lists every violated tuple invariant. Never panics.
pub fn validate_tuple(tuple: &VqaTuple) -> ValidationReport {
    let mut problems = Vec::new();
    if tuple.tuple_id.is_empty() {
        problems.push("tuple_id is empty".to_string());
    }
    if tuple.question_elements.is_empty() {
        problems.push("question has no elements".to_string());
    }
    for (i, e) in tuple.question_elements.iter().enumerate() {
        check_element(&mut problems, &format!("question[{i}]"), e);
    }
    let n = tuple.choices.len();
    if !(MIN_CHOICES..=MAX_CHOICES).contains(&n) {
        problems.push(format!(
            "choice count {n} outside [{MIN_CHOICES}, {MAX_CHOICES}]"
        ));
    }
    for (k, choice) in tuple.choices.iter().enumerate() {
        if choice.is_empty() {
            problems.push(format!("choice[{k}] has no elements"));
        }
        for (i, e) in choice.iter().enumerate() {
            check_element(&mut problems, &format!("choice[{k}][{i}]"), e);
        }
    }
    if tuple.ground_truth >= n {
        problems.push(format!(
            "ground_truth out of range ({} with {n} choices)",
            tuple.ground_truth
        ));
    }
    ValidationReport { problems }
}

/// Partition of the flat feature index space into video, question and
/// answer segments. Answer elements are flattened in choice order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModalityLayout {
    pub n_v: usize,
    pub n_q: usize,
    pub n_a: usize,
    /// Element count of each choice, in choice order. Not persisted; it is
    /// rebuilt from the owning tuple when needed.
    #[serde(skip)]
    pub choice_lengths: Vec<usize>,
}

impl ModalityLayout {
    /// A layout without the per-choice side table.
    pub fn new(n_v: usize, n_q: usize, n_a: usize) -> Self {
        Self {
            n_v,
            n_q,
            n_a,
            choice_lengths: Vec::new(),
        }
    }

    /// Total number of simplified features, `M`.
    pub fn len(&self) -> usize {
        self.n_v + self.n_q + self.n_a
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segment_len(&self, m: Modality) -> usize {
        match m {
            Modality::Video => self.n_v,
            Modality::Question => self.n_q,
            Modality::Answer => self.n_a,
        }
    }

    pub fn segment(&self, m: Modality) -> Range<usize> {
        match m {
            Modality::Video => 0..self.n_v,
            Modality::Question => self.n_v..self.n_v + self.n_q,
            Modality::Answer => self.n_v + self.n_q..self.len(),
        }
    }

    /// Modality owning flat index `i`.
    pub fn modality_of(&self, i: usize) -> Option<Modality> {
        Modality::ALL
            .into_iter()
            .find(|&m| self.segment(m).contains(&i))
    }

    /// Choice owning flat index `i`, if `i` is an answer element and the
    /// side table is present.
    pub fn choice_of(&self, i: usize) -> Option<usize> {
        let seg = self.segment(Modality::Answer);
        if !seg.contains(&i) {
            return None;
        }
        let mut offset = i - seg.start;
        for (k, &len) in self.choice_lengths.iter().enumerate() {
            if offset < len {
                return Some(k);
            }
            offset -= len;
        }
        None
    }

    /// Flat index range of choice `k`.
    pub fn choice_range(&self, k: usize) -> Option<Range<usize>> {
        let start = self.n_v + self.n_q + self.choice_lengths.get(..k)?.iter().sum::<usize>();
        let len = *self.choice_lengths.get(k)?;
        Some(start..start + len)
    }

    pub fn has_choice_table(&self) -> bool {
        !self.choice_lengths.is_empty() && self.choice_lengths.iter().sum::<usize>() == self.n_a
    }

    /// Compares the persisted counts only.
    pub fn same_shape(&self, other: &ModalityLayout) -> bool {
        (self.n_v, self.n_q, self.n_a) == (other.n_v, other.n_q, other.n_a)
    }
}

/// Flat order: frames, question elements, then each choice's elements.
pub fn build_modality_layout(tuple: &VqaTuple) -> ModalityLayout {
    let choice_lengths: Vec<usize> = tuple.choices.iter().map(Vec::len).collect();
    ModalityLayout {
        n_v: tuple.frames.len(),
        n_q: tuple.question_elements.len(),
        n_a: choice_lengths.iter().sum(),
        choice_lengths,
    }
}

/// Simplified feature vector `x'`: bit `i` set keeps feature `i`, clear
/// masks it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MaskVector {
    words: Vec<u64>,
    len: usize,
}

impl MaskVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self::zeros(len);
        for i in 0..len {
            m.set(i, true);
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            m.set(i, b);
        }
        m
    }

    /// Low `len` bits of `pattern`, bit `i` = feature `i`.
    pub fn from_u64(pattern: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 features");
        let mut m = Self::zeros(len);
        if len > 0 {
            let keep = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            m.words[0] = pattern & keep;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "mask index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "mask index {i} out of range {}", self.len);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    /// Copy with bit `i` set to `value`.
    pub fn with(&self, i: usize, value: bool) -> Self {
        let mut m = self.clone();
        m.set(i, value);
        m
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Bitwise AND; both masks must have the same length.
    pub fn and(&self, other: &MaskVector) -> MaskVector {
        assert_eq!(self.len, other.len, "mask length mismatch");
        MaskVector {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
            len: self.len,
        }
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bits of a sub-range, used to mask one segment's elements.
    pub fn slice(&self, range: Range<usize>) -> Vec<bool> {
        range.map(|i| self.get(i)).collect()
    }
}

impl fmt::Debug for MaskVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        write!(f, "MaskVector({s})")
    }
}

/// One logit per answer choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardVector {
    pub logits: Vec<f64>,
}

impl RewardVector {
    pub fn new(logits: Vec<f64>) -> Self {
        Self { logits }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|v| v.is_finite())
    }

    /// Index of the largest logit; the first one wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.logits.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    MonteCarlo,
}

fn is_true(b: &bool) -> bool {
    *b
}

fn default_true() -> bool {
    true
}

/// Per-feature, per-class Shapley estimates for one tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub tuple_id: String,
    pub estimator: Estimator,
    pub iterations: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub layout: ModalityLayout,
    /// `values[i][c]`: attribution of feature `i` toward class `c`.
    pub values: Vec<Vec<f64>>,
    /// False when the reward source declared itself nondeterministic.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub reproducible: bool,
}

impl AttributionResult {
    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    pub fn n_classes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Column of class `c`.
    pub fn class_column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[c]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

/// A named collection of tuples with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub tuples: Vec<VqaTuple>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed dataset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate tuple_id {0:?}")]
    DuplicateId(String),
    #[error("tuple {id:?} is malformed: {report}")]
    Invalid { id: String, report: ValidationReport },
}

impl Dataset {
    pub fn new(name: impl Into<String>, tuples: Vec<VqaTuple>) -> Self {
        Self {
            name: name.into(),
            tuples,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn get(&self, tuple_id: &str) -> Option<&VqaTuple> {
        self.tuples.iter().find(|t| t.tuple_id == tuple_id)
    }

    /// Checks id uniqueness and every tuple's invariants.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for t in &self.tuples {
            if !seen.insert(t.tuple_id.as_str()) {
                return Err(DatasetError::DuplicateId(t.tuple_id.clone()));
            }
            let report = validate_tuple(t);
            if !report.is_ok() {
                return Err(DatasetError::Invalid {
                    id: t.tuple_id.clone(),
                    report,
                });
            }
        }
        Ok(())
    }

    /// Parses and validates a dataset document.
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let ds: Dataset = serde_json::from_str(text.strip_prefix('\u{feff}').unwrap_or(text))?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

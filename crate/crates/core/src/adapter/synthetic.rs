//! In-process synthetic reward models with closed-form Shapley values.
//!
//! A model scores class `c` as
//! `b_c + sum_i w_{c,i} x_i + sum_{(i,j)} u_{c,ij} x_i x_j`, so the exact
//! attribution of feature `i` to class `c` is `w_{c,i} + 1/2 sum_j u_{c,ij}`.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adapter, AdapterError, AdapterHandshake};
use crate::model::{MaskVector, Modality, ModalityLayout, RewardVector, VqaTuple};
use crate::shapley::{available_parallelism, RewardError, RewardFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Additive,
    Interaction,
    /// No dependence on video features.
    TextBiased,
    Constant,
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "additive" => Ok(Self::Additive),
            "interaction" => Ok(Self::Interaction),
            "text_biased" | "text-biased" => Ok(Self::TextBiased),
            "constant" => Ok(Self::Constant),
            _ => Err(format!("unknown synthetic model kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub class: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub kind: SyntheticKind,
    /// `weights[c][i]`.
    pub weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub interactions: Vec<PairTerm>,
    pub bias: Vec<f64>,
}

impl SyntheticModelSpec {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Checks shapes against `layout` and the kind's structural promise.
    pub fn validate(&self, layout: &ModalityLayout) -> Result<(), String> {
        let m = layout.len();
        if self.weights.len() != self.bias.len() {
            return Err("weights and bias disagree on class count".into());
        }
        if let Some(bad) = self.weights.iter().find(|w| w.len() != m) {
            return Err(format!("weight vector has {} entries, layout has {m}", bad.len()));
        }
        for t in &self.interactions {
            if t.class >= self.n_classes() || t.i >= m || t.j >= m || t.i == t.j {
                return Err(format!("invalid interaction term {t:?}"));
            }
        }
        let video = layout.segment(Modality::Video);
        match self.kind {
            SyntheticKind::Additive if !self.interactions.is_empty() => {
                Err("additive model carries interaction terms".into())
            }
            SyntheticKind::Constant
                if !self.interactions.is_empty()
                    || self.weights.iter().flatten().any(|&w| w != 0.0) =>
            {
                Err("constant model carries weights".into())
            }
            SyntheticKind::TextBiased
                if self.weights.iter().any(|w| w[video.clone()].iter().any(|&v| v != 0.0))
                    || self
                        .interactions
                        .iter()
                        .any(|t| video.contains(&t.i) || video.contains(&t.j)) =>
            {
                Err("text-biased model depends on video features".into())
            }
            _ => Ok(()),
        }
    }

    pub fn logits(&self, mask: &MaskVector) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (c, w) in self.weights.iter().enumerate() {
            for (i, &wi) in w.iter().enumerate() {
                if mask.get(i) {
                    out[c] += wi;
                }
            }
        }
        for t in &self.interactions {
            if mask.get(t.i) && mask.get(t.j) {
                out[t.class] += t.value;
            }
        }
        out
    }

    /// Closed-form Shapley values `values[i][c]`.
    pub fn shapley_values(&self) -> Vec<Vec<f64>> {
        let m = self.n_features();
        let mut v: Vec<Vec<f64>> = (0..m)
            .map(|i| self.weights.iter().map(|w| w[i]).collect())
            .collect();
        for t in &self.interactions {
            v[t.i][t.class] += 0.5 * t.value;
            v[t.j][t.class] += 0.5 * t.value;
        }
        v
    }
}

impl RewardFunction for SyntheticModelSpec {
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError> {
        if mask.len() != self.n_features() {
            return Err(RewardError::Fatal(format!(
                "mask has {} bits, model has {} features",
                mask.len(),
                self.n_features()
            )));
        }
        Ok(RewardVector::new(self.logits(mask)))
    }

    fn max_concurrency(&self) -> usize {
        available_parallelism()
    }
}

/// Derives one synthetic model per tuple from `(seed, tuple_id)`.
///
/// Answer elements of choice `k` push class `k` up, strongest for the
/// ground-truth choice, so unmasked predictions are mostly correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFamily {
    pub kind: SyntheticKind,
    #[serde(default)]
    pub seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl SyntheticFamily {
    pub fn new(kind: SyntheticKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn model_for(&self, tuple: &VqaTuple) -> SyntheticModelSpec {
        let layout = tuple.layout();
        let m = layout.len();
        let n_c = tuple.n_choices();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(&tuple.tuple_id));

        let bias: Vec<f64> = (0..n_c).map(|_| rng.random_range(-0.5..0.5)).collect();
        if self.kind == SyntheticKind::Constant {
            return SyntheticModelSpec {
                kind: self.kind,
                weights: vec![vec![0.0; m]; n_c],
                interactions: Vec::new(),
                bias,
            };
        }

        let mut weights = vec![vec![0.0; m]; n_c];
        for (c, w) in weights.iter_mut().enumerate() {
            for i in layout.segment(Modality::Video) {
                if self.kind != SyntheticKind::TextBiased {
                    let lift = if c == tuple.ground_truth { 0.2 } else { 0.0 };
                    w[i] = rng.random_range(-0.3..0.3) + lift;
                }
            }
            for i in layout.segment(Modality::Question) {
                w[i] = rng.random_range(-0.3..0.3);
            }
            for k in 0..n_c {
                let range = layout.choice_range(k).expect("layout from tuple has a choice table");
                for i in range {
                    w[i] = if k != c {
                        rng.random_range(-0.2..0.2)
                    } else if c == tuple.ground_truth {
                        rng.random_range(0.5..1.5)
                    } else {
                        rng.random_range(0.0..0.6)
                    };
                }
            }
        }

        let mut interactions = Vec::new();
        if self.kind == SyntheticKind::Interaction && m >= 2 {
            for class in 0..n_c {
                for _ in 0..m.min(8) {
                    let i = rng.random_range(0..m);
                    let mut j = rng.random_range(0..m - 1);
                    if j >= i {
                        j += 1;
                    }
                    interactions.push(PairTerm {
                        class,
                        i: i.min(j),
                        j: i.max(j),
                        value: rng.random_range(-1.0..1.0),
                    });
                }
            }
        }

        SyntheticModelSpec {
            kind: self.kind,
            weights,
            interactions,
            bias,
        }
    }
}

/// Where a synthetic adapter gets its per-tuple models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSource {
    Family(SyntheticFamily),
    Models(HashMap<String, SyntheticModelSpec>),
}

impl SyntheticSource {
    /// `<kind>[:<seed>]` or a path to a JSON document.
    pub fn parse(spec: &str) -> Result<Self, AdapterError> {
        if spec.ends_with(".json") {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| AdapterError::Config(format!("reading {spec}: {e}")))?;
            return serde_json::from_str(&text)
                .map_err(|e| AdapterError::Config(format!("parsing {spec}: {e}")));
        }
        let (kind, seed) = match spec.split_once(':') {
            Some((k, s)) => (
                k,
                s.parse::<u64>()
                    .map_err(|_| AdapterError::Config(format!("bad synthetic seed {s:?}")))?,
            ),
            None => (spec, 0),
        };
        let kind = kind.parse().map_err(AdapterError::Config)?;
        Ok(SyntheticSource::Family(SyntheticFamily::new(kind, seed)))
    }
}

pub struct SyntheticAdapter {
    source: SyntheticSource,
}

impl SyntheticAdapter {
    pub fn new(source: SyntheticSource) -> Self {
        Self { source }
    }

    pub fn family(kind: SyntheticKind, seed: u64) -> Self {
        Self::new(SyntheticSource::Family(SyntheticFamily::new(kind, seed)))
    }

    pub fn model_for(&self, tuple: &VqaTuple) -> Result<SyntheticModelSpec, AdapterError> {
        let model = match &self.source {
            SyntheticSource::Family(f) => f.model_for(tuple),
            SyntheticSource::Models(map) => map
                .get(&tuple.tuple_id)
                .cloned()
                .ok_or_else(|| AdapterError::UnknownTuple(tuple.tuple_id.clone()))?,
        };
        model
            .validate(&tuple.layout())
            .map_err(AdapterError::Config)?;
        if model.n_classes() != tuple.n_choices() {
            return Err(AdapterError::Config(format!(
                "model for {} scores {} classes, tuple has {} choices",
                tuple.tuple_id,
                model.n_classes(),
                tuple.n_choices()
            )));
        }
        Ok(model)
    }
}

impl Adapter for SyntheticAdapter {
    fn handshake(&self) -> Result<AdapterHandshake, AdapterError> {
        Ok(AdapterHandshake {
            protocol_version: super::PROTOCOL_VERSION,
            deterministic: true,
            max_concurrency: available_parallelism(),
            supports_batching: false,
        })
    }

    fn evaluate(&self, tuple: &VqaTuple, mask: &MaskVector) -> Result<RewardVector, AdapterError> {
        let model = self.model_for(tuple)?;
        if mask.len() != model.n_features() {
            return Err(AdapterError::MaskLength {
                expected: model.n_features(),
                found: mask.len(),
            });
        }
        Ok(RewardVector::new(model.logits(mask)))
    }

    fn bind<'a>(&'a self, tuple: &'a VqaTuple) -> Result<Box<dyn RewardFunction + 'a>, AdapterError> {
        Ok(Box::new(self.model_for(tuple)?))
    }
}

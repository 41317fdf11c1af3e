use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::RewardVector;

/// One generated token with its logits over (at least) the choice labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedToken {
    pub text: String,
    pub logits: BTreeMap<String, f64>,
}

impl GeneratedToken {
    pub fn new(text: impl Into<String>, logits: &[(&str, f64)]) -> Self {
        Self {
            text: text.into(),
            logits: logits.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("model produced no tokens")]
    EmptyOutput,
    #[error("token {token} has no logit for label {label}")]
    MissingLabel { token: usize, label: char },
}

fn token_label(text: &str) -> Option<char> {
    let core = text.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let mut chars = core.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Reads the choice logits from the first generated token that is a choice
/// label, falling back to the first token. The first occurrence wins when a
/// label repeats.
pub fn extract_choice_logits(tokens: &[GeneratedToken], labels: &[char]) -> Result<RewardVector, ExtractError> {
    if tokens.is_empty() {
        return Err(ExtractError::EmptyOutput);
    }
    let index = tokens
        .iter()
        .position(|t| token_label(&t.text).is_some_and(|c| labels.contains(&c)))
        .unwrap_or(0);
    let token = &tokens[index];
    labels
        .iter()
        .map(|&label| {
            token
                .logits
                .get(label.encode_utf8(&mut [0; 4]) as &str)
                .copied()
                .ok_or(ExtractError::MissingLabel { token: index, label })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(RewardVector::new)
}

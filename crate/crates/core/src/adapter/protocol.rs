//! Wire protocol v1: one JSON object per line, UTF-8.

use serde::{Deserialize, Serialize};

use crate::model::MaskVector;

pub const PROTOCOL_VERSION: u32 = 1;

/// Error codes used in `error` messages.
pub mod codes {
    pub const UNKNOWN_TUPLE: &str = "unknown_tuple";
    pub const MASK_LENGTH: &str = "mask_length";
    pub const MODEL_FAILURE: &str = "model_failure";
    pub const BAD_REQUEST: &str = "bad_request";
    pub const VERSION_MISMATCH: &str = "version_mismatch";
    pub const NOT_READY: &str = "not_ready";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
    },
    Capabilities {
        deterministic: bool,
        max_concurrency: usize,
        supports_batching: bool,
        /// Absent means version 1.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<u32>,
    },
    Evaluate {
        request_id: String,
        tuple_id: String,
        mask_hex: String,
    },
    Logits {
        request_id: String,
        logits: Vec<f64>,
    },
    Error {
        #[serde(default)]
        request_id: String,
        code: String,
        message: String,
    },
}

impl Message {
    pub fn hello() -> Self {
        Message::Hello {
            version: PROTOCOL_VERSION,
        }
    }

    pub fn request_id(&self) -> Option<&str> {
        match self {
            Message::Evaluate { request_id, .. }
            | Message::Logits { request_id, .. }
            | Message::Error { request_id, .. } => Some(request_id),
            _ => None,
        }
    }

    /// Single-line JSON encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("mask_hex has {found} digits, expected {expected} for {m} features")]
    Width { m: usize, expected: usize, found: usize },
    #[error("invalid hex digit {0:?}")]
    Digit(char),
    #[error("mask_hex sets bits beyond feature {0}")]
    Overflow(usize),
}

/// Hex digits needed for `m` features.
pub fn hex_width(m: usize) -> usize {
    m.div_ceil(4)
}

/// Encodes the mask as the hex form of the integer `sum(bit_i * 2^i)`,
/// most significant digit first, zero padded to `ceil(M / 4)` digits.
pub fn encode_mask_hex(mask: &MaskVector) -> String {
    let width = hex_width(mask.len());
    let words = mask.words();
    (0..width)
        .rev()
        .map(|d| {
            let bit = d * 4;
            let nibble = (words[bit / 64] >> (bit % 64)) & 0xf;
            char::from_digit(nibble as u32, 16).expect("nibble")
        })
        .collect()
}

/// Inverse of [`encode_mask_hex`]; accepts either case.
pub fn decode_mask_hex(hex: &str, m: usize) -> Result<MaskVector, HexError> {
    let expected = hex_width(m);
    let found = hex.chars().count();
    if found != expected {
        return Err(HexError::Width { m, expected, found });
    }
    let mut mask = MaskVector::zeros(m);
    for (d, ch) in hex.chars().rev().enumerate() {
        let nibble = ch.to_digit(16).ok_or(HexError::Digit(ch))?;
        for k in 0..4 {
            if nibble >> k & 1 == 1 {
                let i = d * 4 + k;
                if i >= m {
                    return Err(HexError::Overflow(m));
                }
                mask.set(i, true);
            }
        }
    }
    Ok(mask)
}

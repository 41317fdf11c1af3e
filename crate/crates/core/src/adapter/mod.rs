//! Engine side of the model adapter protocol, plus the built-in synthetic
//! adapter.
//!
//! An adapter answers "what are the choice logits for this tuple under this
//! mask". Masked frames are zeroed and masked text elements become a single
//! space; the engine only ships bits.

mod exec;
mod extract;
mod http;
mod protocol;
mod synthetic;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{MaskVector, RewardVector, VqaTuple};
use crate::shapley::{RewardError, RewardFunction};

pub use exec::ExecAdapter;
pub use extract::{extract_choice_logits, ExtractError, GeneratedToken};
pub use http::HttpAdapter;
pub use protocol::{codes, decode_mask_hex, encode_mask_hex, hex_width, HexError, Message, PROTOCOL_VERSION};
pub use synthetic::{
    PairTerm, SyntheticAdapter, SyntheticFamily, SyntheticKind, SyntheticModelSpec, SyntheticSource,
};

/// Default deadline for handshakes and individual requests.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterHandshake {
    pub protocol_version: u32,
    pub deterministic: bool,
    pub max_concurrency: usize,
    pub supports_batching: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter speaks protocol version {adapter}, engine speaks {engine}")]
    VersionMismatch { engine: u32, adapter: u32 },
    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("unknown tuple {0:?}")]
    UnknownTuple(String),
    #[error("mask has {found} bits, tuple has {expected} features")]
    MaskLength { expected: usize, found: usize },
    #[error("adapter error {code}: {message}")]
    Remote { code: String, message: String },
    #[error("adapter configuration: {0}")]
    Config(String),
}

impl AdapterError {
    fn from_remote(code: String, message: String) -> Self {
        match code.as_str() {
            codes::UNKNOWN_TUPLE => AdapterError::UnknownTuple(message),
            _ => AdapterError::Remote { code, message },
        }
    }

    /// Whether a retry could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            AdapterError::Timeout(_) | AdapterError::Transport(_) => true,
            AdapterError::Remote { code, .. } => code == codes::MODEL_FAILURE,
            _ => false,
        }
    }
}

impl From<AdapterError> for RewardError {
    fn from(e: AdapterError) -> Self {
        if e.is_transient() {
            RewardError::Transient(e.to_string())
        } else {
            RewardError::Fatal(e.to_string())
        }
    }
}

pub trait Adapter: Send + Sync {
    /// Negotiated capabilities. Transports perform the exchange once and
    /// return the cached answer afterwards.
    fn handshake(&self) -> Result<AdapterHandshake, AdapterError>;

    fn evaluate(&self, tuple: &VqaTuple, mask: &MaskVector) -> Result<RewardVector, AdapterError>;

    /// Reward function for one tuple.
    fn bind<'a>(&'a self, tuple: &'a VqaTuple) -> Result<Box<dyn RewardFunction + 'a>, AdapterError> {
        let caps = self.handshake()?;
        Ok(Box::new(TupleReward {
            adapter: self,
            tuple,
            caps,
        }))
    }
}

/// Rejects anything but protocol version 1 and clamps concurrency to >= 1.
pub fn check_capabilities(msg: Message) -> Result<AdapterHandshake, AdapterError> {
    match msg {
        Message::Capabilities {
            deterministic,
            max_concurrency,
            supports_batching,
            version,
        } => {
            let version = version.unwrap_or(PROTOCOL_VERSION);
            if version != PROTOCOL_VERSION {
                return Err(AdapterError::VersionMismatch {
                    engine: PROTOCOL_VERSION,
                    adapter: version,
                });
            }
            Ok(AdapterHandshake {
                protocol_version: version,
                deterministic,
                max_concurrency: max_concurrency.max(1),
                supports_batching,
            })
        }
        Message::Error { code, message, .. } if code == codes::VERSION_MISMATCH => {
            let adapter = message
                .split(|c: char| !c.is_ascii_digit())
                .find_map(|s| s.parse().ok())
                .unwrap_or(0);
            Err(AdapterError::VersionMismatch {
                engine: PROTOCOL_VERSION,
                adapter,
            })
        }
        Message::Error { code, message, .. } => Err(AdapterError::Remote { code, message }),
        other => Err(AdapterError::Protocol(format!(
            "expected capabilities, got {}",
            other.to_line()
        ))),
    }
}

/// Interprets an `evaluate` answer.
pub(crate) fn response_logits(msg: Message, n_choices: usize) -> Result<RewardVector, AdapterError> {
    match msg {
        Message::Logits { logits, .. } => {
            if logits.len() != n_choices {
                return Err(AdapterError::Protocol(format!(
                    "{} logits for {n_choices} choices",
                    logits.len()
                )));
            }
            Ok(RewardVector::new(logits))
        }
        Message::Error { code, message, .. } => Err(AdapterError::from_remote(code, message)),
        other => Err(AdapterError::Protocol(format!("unexpected {}", other.to_line()))),
    }
}

struct TupleReward<'a, A: ?Sized> {
    adapter: &'a A,
    tuple: &'a VqaTuple,
    caps: AdapterHandshake,
}

impl<A: Adapter + ?Sized> RewardFunction for TupleReward<'_, A> {
    fn evaluate(&self, mask: &MaskVector) -> Result<RewardVector, RewardError> {
        Ok(self.adapter.evaluate(self.tuple, mask)?)
    }
    fn is_deterministic(&self) -> bool {
        self.caps.deterministic
    }
    fn max_concurrency(&self) -> usize {
        self.caps.max_concurrency
    }
}

/// Parsed `--adapter` argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AdapterSpec {
    /// Shell command speaking the protocol over stdin/stdout. `{dataset}`
    /// is replaced with the dataset path in use.
    Exec(String),
    Http(String),
    Synthetic(String),
}

impl std::str::FromStr for AdapterSpec {
    type Err = AdapterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| AdapterError::Config(format!("adapter spec {s:?} lacks a scheme")))?;
        if rest.is_empty() {
            return Err(AdapterError::Config(format!("adapter spec {s:?} is empty")));
        }
        match scheme {
            "exec" => Ok(AdapterSpec::Exec(rest.to_string())),
            // Accepts full URLs as well as `http:<host:port/path>`.
            "http" | "https" if rest.starts_with("//") => Ok(AdapterSpec::Http(s.to_string())),
            "http" | "https" if rest.starts_with("http://") || rest.starts_with("https://") => {
                Ok(AdapterSpec::Http(rest.to_string()))
            }
            "http" | "https" => Ok(AdapterSpec::Http(format!("{scheme}://{rest}"))),
            "synthetic" => Ok(AdapterSpec::Synthetic(rest.to_string())),
            _ => Err(AdapterError::Config(format!("unknown adapter scheme {scheme:?}"))),
        }
    }
}

impl std::fmt::Display for AdapterSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdapterSpec::Exec(c) => write!(f, "exec:{c}"),
            AdapterSpec::Http(u) => f.write_str(u),
            AdapterSpec::Synthetic(s) => write!(f, "synthetic:{s}"),
        }
    }
}

impl TryFrom<String> for AdapterSpec {
    type Error = AdapterError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AdapterSpec> for String {
    fn from(a: AdapterSpec) -> String {
        a.to_string()
    }
}

impl AdapterSpec {
    /// Starts the adapter and completes the handshake.
    pub fn connect(&self, dataset_path: &str, timeout: Duration) -> Result<Box<dyn Adapter>, AdapterError> {
        let adapter: Box<dyn Adapter> = match self {
            AdapterSpec::Exec(cmd) => Box::new(ExecAdapter::spawn(&cmd.replace("{dataset}", dataset_path), timeout)?),
            AdapterSpec::Http(url) => Box::new(HttpAdapter::new(url, timeout)),
            AdapterSpec::Synthetic(spec) => Box::new(SyntheticAdapter::new(SyntheticSource::parse(spec)?)),
        };
        adapter.handshake()?;
        Ok(adapter)
    }
}

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use once_cell::sync::OnceCell;

use super::{check_capabilities, response_logits, Adapter, AdapterError, AdapterHandshake, Message};
use crate::adapter::encode_mask_hex;
use crate::model::{MaskVector, RewardVector, VqaTuple};

/// HTTP binding: every protocol message is POSTed to one URL and the
/// response body is the reply message.
pub struct HttpAdapter {
    url: String,
    agent: ureq::Agent,
    timeout: Duration,
    caps: OnceCell<AdapterHandshake>,
    next_id: AtomicU64,
}

impl HttpAdapter {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.to_string(),
            agent,
            timeout,
            caps: OnceCell::new(),
            next_id: AtomicU64::new(0),
        }
    }

    fn post(&self, msg: &Message) -> Result<Message, AdapterError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(msg.to_line())
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AdapterError::Timeout(self.timeout),
                other => AdapterError::Transport(other.to_string()),
            })?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AdapterError::Transport(e.to_string()))?;
        Message::from_line(&body).map_err(|e| AdapterError::Protocol(format!("{e}: {body}")))
    }
}

impl Adapter for HttpAdapter {
    fn handshake(&self) -> Result<AdapterHandshake, AdapterError> {
        self.caps
            .get_or_try_init(|| check_capabilities(self.post(&Message::hello())?))
            .copied()
    }

    fn evaluate(&self, tuple: &VqaTuple, mask: &MaskVector) -> Result<RewardVector, AdapterError> {
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        let reply = self.post(&Message::Evaluate {
            request_id: request_id.clone(),
            tuple_id: tuple.tuple_id.clone(),
            mask_hex: encode_mask_hex(mask),
        })?;
        if reply.request_id().is_some_and(|id| !id.is_empty() && id != request_id) {
            return Err(AdapterError::Protocol(format!(
                "reply for request {:?}, expected {request_id:?}",
                reply.request_id()
            )));
        }
        response_logits(reply, tuple.n_choices())
    }
}

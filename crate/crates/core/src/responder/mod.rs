//! Vision-language responder clients.
//!
//! A responder receives one image variant plus the question and returns
//! `sample_count` answer texts. [`HttpResponder`] talks to a remote endpoint;
//! [`MockResponder`] is deterministic and instrumented for tests.

mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::Variant;

pub use mock::{MockFixture, MockResponder};
pub use remote::{HttpResponder, HttpResponderConfig};

#[derive(Debug, Error)]
pub enum ResponderError {
    /// Transport or server-side failure that outlived the retry budget.
    #[error("responder unavailable after {attempts} attempt(s): {message}")]
    Retriable { attempts: u32, message: String },
    /// The responder answered, but not with usable text.
    #[error("unusable responder output: {message}")]
    Content { message: String, raw: String },
    /// Credentials or endpoint configuration are wrong; retrying cannot help.
    #[error("responder configuration error: {0}")]
    Fatal(String),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub record_id: String,
    pub variant: Variant,
    /// PNG-encoded image variant.
    #[serde(skip)]
    pub image: Vec<u8>,
    pub question: String,
    pub sample_count: usize,
    pub model_id: String,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), ResponderError> {
        let bad = |m: &str| Err(ResponderError::InvalidRequest(m.to_string()));
        if self.sample_count == 0 {
            return bad("sample_count must be at least 1");
        }
        if self.image.is_empty() {
            return bad("image is empty");
        }
        if self.question.trim().is_empty() {
            return bad("question is empty");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a finite value >= 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResponse {
    pub record_id: String,
    pub variant: Variant,
    pub samples: Vec<String>,
    pub model_id: String,
    pub latency_ms: u64,
    pub from_cache: bool,
}

impl VariantResponse {
    /// Checks sample count and that no sample is blank.
    pub fn validate_for(&self, req: &GenerationRequest) -> Result<(), ResponderError> {
        if self.samples.len() != req.sample_count {
            return Err(ResponderError::Content {
                message: format!(
                    "expected {} samples, got {}",
                    req.sample_count,
                    self.samples.len()
                ),
                raw: serde_json::to_string(&self.samples).unwrap_or_default(),
            });
        }
        if let Some(i) = self.samples.iter().position(|s| s.trim().is_empty()) {
            return Err(ResponderError::Content {
                message: format!("sample {i} is empty"),
                raw: serde_json::to_string(&self.samples).unwrap_or_default(),
            });
        }
        Ok(())
    }
}

pub trait Responder: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<VariantResponse, ResponderError>;

    /// Identifies the responder configuration; part of generation cache keys.
    fn fingerprint(&self) -> String;
}

impl<T: Responder + ?Sized> Responder for std::sync::Arc<T> {
    fn generate(&self, req: &GenerationRequest) -> Result<VariantResponse, ResponderError> {
        (**self).generate(req)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

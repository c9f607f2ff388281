use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{GenerationRequest, Responder, ResponderError, VariantResponse};
use crate::retry::{Backoff, RateLimiter, RetryPolicy};

#[derive(Clone, Debug)]
pub struct HttpResponderConfig {
    pub endpoint: String,
    /// Sent as `Authorization: Bearer ...` when present.
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Maximum request starts per second; `0` disables pacing.
    pub requests_per_second: f64,
}

impl HttpResponderConfig {
    pub const API_KEY_ENV: &'static str = "VQA_PREFILTER_RESPONDER_KEY";

    /// Endpoint plus an API key taken from the environment, if set.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: std::env::var(Self::API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            requests_per_second: 0.0,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    question: &'a str,
    image_base64: String,
    n: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct WireReply {
    samples: Vec<String>,
}

/// Blocking JSON-over-HTTP responder with retries and request pacing.
pub struct HttpResponder {
    cfg: HttpResponderConfig,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl HttpResponder {
    pub fn new(cfg: HttpResponderConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        let limiter = RateLimiter::per_second(cfg.requests_per_second);
        Self {
            cfg,
            agent,
            limiter,
        }
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<Vec<String>, Attempt> {
        let mut call = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        match call.send_json(body) {
            Ok(resp) => {
                let raw = resp.into_string().map_err(|e| Attempt::Transient(e.to_string()))?;
                serde_json::from_str::<WireReply>(&raw)
                    .map(|r| r.samples)
                    .map_err(|e| Attempt::Content(format!("unparseable reply: {e}"), raw))
            }
            Err(ureq::Error::Status(status, resp)) => {
                let raw = resp.into_string().unwrap_or_default();
                Err(match status {
                    401 | 403 => Attempt::Fatal(format!("authentication rejected ({status})")),
                    408 | 429 | 500..=599 => Attempt::Transient(format!("HTTP {status}: {raw}")),
                    _ => Attempt::Content(format!("HTTP {status}"), raw),
                })
            }
            Err(e) => Err(Attempt::Transient(e.to_string())),
        }
    }
}

enum Attempt {
    Transient(String),
    Content(String, String),
    Fatal(String),
}

impl Responder for HttpResponder {
    fn generate(&self, req: &GenerationRequest) -> Result<VariantResponse, ResponderError> {
        req.validate()?;
        let body = WireRequest {
            model: &req.model_id,
            question: &req.question,
            image_base64: base64::engine::general_purpose::STANDARD.encode(&req.image),
            n: req.sample_count,
            temperature: req.temperature,
        };
        let mut backoff = Backoff::new(self.cfg.retry);
        let started = Instant::now();
        loop {
            self.limiter.acquire();
            match self.attempt(&body) {
                Ok(samples) => {
                    let resp = VariantResponse {
                        record_id: req.record_id.clone(),
                        variant: req.variant,
                        samples,
                        model_id: req.model_id.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        from_cache: false,
                    };
                    resp.validate_for(req)?;
                    return Ok(resp);
                }
                Err(Attempt::Transient(message)) => match backoff.next_delay() {
                    Some(d) => {
                        tracing::debug!(record = %req.record_id, %message, delay_ms = d.as_millis() as u64, "retrying responder call");
                        std::thread::sleep(d);
                    }
                    None => {
                        return Err(ResponderError::Retriable {
                            attempts: backoff.retries_used() + 1,
                            message,
                        })
                    }
                },
                Err(Attempt::Content(message, raw)) => {
                    return Err(ResponderError::Content { message, raw })
                }
                Err(Attempt::Fatal(m)) => return Err(ResponderError::Fatal(m)),
            }
        }
    }

    fn fingerprint(&self) -> String {
        format!("http:{}", self.cfg.endpoint)
    }
}

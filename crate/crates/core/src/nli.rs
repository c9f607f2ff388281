//! Client side of the NLI logits service, plus an in-process stub.
//!
//! Wire format (`POST {base}/v1/nli`):
//!
//! ```text
//! request: {"model_id": str, "pairs": [{"premise": str, "hypothesis": str}, ...]}
//! reply:   {"model_id": str, "logits": [[z_e, z_n, z_c], ...], "truncated": [bool, ...]}
//! ```
//!
//! Replies carry raw three-class logits; normalisation happens in
//! [`crate::scoring::contradiction_probability`].

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retry::{Backoff, RetryPolicy};

#[derive(Debug, Error)]
pub enum NliError {
    #[error("nli transport failure: {0}")]
    Transport(String),
    #[error("nli service rejected request ({status}): {body}")]
    Protocol { status: u16, body: String },
    #[error("malformed nli reply: {0}")]
    InvalidReply(String),
}

impl NliError {
    pub fn is_retriable(&self) -> bool {
        match self {
            NliError::Transport(_) => true,
            NliError::Protocol { status, .. } => *status == 429 || *status >= 500,
            NliError::InvalidReply(_) => false,
        }
    }
}

/// Entailment, neutral and contradiction logits, serialized as a 3-array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct NliLogits {
    pub entail: f64,
    pub neutral: f64,
    pub contra: f64,
}

impl NliLogits {
    pub const fn new(entail: f64, neutral: f64, contra: f64) -> Self {
        Self {
            entail,
            neutral,
            contra,
        }
    }
}

impl From<[f64; 3]> for NliLogits {
    fn from([entail, neutral, contra]: [f64; 3]) -> Self {
        Self::new(entail, neutral, contra)
    }
}

impl From<NliLogits> for [f64; 3] {
    fn from(l: NliLogits) -> Self {
        [l.entail, l.neutral, l.contra]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

impl NliPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NliBatchRequest {
    pub model_id: String,
    pub pairs: Vec<NliPair>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NliBatchReply {
    pub model_id: String,
    pub logits: Vec<NliLogits>,
    #[serde(default)]
    pub truncated: Vec<bool>,
}

/// Source of premise/hypothesis logits.
pub trait NliClient: Send + Sync {
    /// Returns one logit triple per pair, in request order.
    fn logits(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError>;

    /// Identifies the model behind the client; part of score cache keys.
    fn fingerprint(&self) -> String;
}

impl<T: NliClient + ?Sized> NliClient for std::sync::Arc<T> {
    fn logits(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError> {
        (**self).logits(pairs)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Deterministic in-process NLI: exact lookups first, then a lexical
/// heuristic (identical text entails, disjoint vocabulary contradicts).
#[derive(Debug, Default)]
pub struct StubNli {
    table: HashMap<NliPair, NliLogits>,
    calls: AtomicUsize,
}

impl StubNli {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entry(mut self, pair: NliPair, logits: NliLogits) -> Self {
        self.table.insert(pair, logits);
        self
    }

    /// Number of pairs scored so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn heuristic(pair: &NliPair) -> NliLogits {
        let p = tokens(&pair.premise);
        let h = tokens(&pair.hypothesis);
        if p == h {
            return NliLogits::new(10.0, 0.0, -10.0);
        }
        let inter = h.iter().filter(|t| p.contains(t)).count() as f64;
        let union = (p.len() + h.len()) as f64 - inter;
        let jaccard = if union == 0.0 { 1.0 } else { inter / union };
        let z = 6.0 * jaccard - 3.0;
        NliLogits::new(z, 0.0, -z)
    }
}

fn tokens(s: &str) -> Vec<String> {
    let mut t: Vec<String> = s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    t.sort();
    t.dedup();
    t
}

impl NliClient for StubNli {
    fn logits(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError> {
        self.calls.fetch_add(pairs.len(), Ordering::Relaxed);
        Ok(pairs
            .iter()
            .map(|p| self.table.get(p).copied().unwrap_or_else(|| Self::heuristic(p)))
            .collect())
    }

    fn fingerprint(&self) -> String {
        // Table contents change the answers, so they are part of the identity.
        let mut entries: Vec<String> = self
            .table
            .iter()
            .map(|(k, v)| format!("{}\u{1f}{}\u{1f}{:?}", k.premise, k.hypothesis, v))
            .collect();
        entries.sort();
        format!("stub:{}", crate::fsutil::sha256_hex(entries.join("\u{1e}").as_bytes()))
    }
}

#[derive(Clone, Debug)]
pub struct HttpNliConfig {
    /// Base URL; `/v1/nli` is appended.
    pub endpoint: String,
    pub model_id: String,
    pub max_batch: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpNliConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_id: "default".into(),
            max_batch: 32,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

/// Blocking HTTP client for the NLI service.
pub struct HttpNliClient {
    cfg: HttpNliConfig,
    agent: ureq::Agent,
}

impl HttpNliClient {
    pub fn new(cfg: HttpNliConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        Self { cfg, agent }
    }

    fn url(&self) -> String {
        format!("{}/v1/nli", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn post_batch(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError> {
        let body = NliBatchRequest {
            model_id: self.cfg.model_id.clone(),
            pairs: pairs.to_vec(),
        };
        let mut backoff = Backoff::new(self.cfg.retry);
        loop {
            let attempt = match self.agent.post(&self.url()).send_json(&body) {
                Ok(resp) => resp
                    .into_json::<NliBatchReply>()
                    .map_err(|e| NliError::InvalidReply(e.to_string())),
                Err(ureq::Error::Status(status, resp)) => Err(NliError::Protocol {
                    status,
                    body: resp.into_string().unwrap_or_default(),
                }),
                Err(e) => Err(NliError::Transport(e.to_string())),
            };
            match attempt {
                Ok(reply) => {
                    if reply.logits.len() != pairs.len() {
                        return Err(NliError::InvalidReply(format!(
                            "asked for {} pairs, got {} logit triples",
                            pairs.len(),
                            reply.logits.len()
                        )));
                    }
                    return Ok(reply.logits);
                }
                Err(e) if e.is_retriable() => match backoff.next_delay() {
                    Some(d) => std::thread::sleep(d),
                    None => return Err(e),
                },
                Err(e) => return Err(e),
            }
        }
    }
}

impl NliClient for HttpNliClient {
    fn logits(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.cfg.max_batch.max(1)) {
            out.extend(self.post_batch(chunk)?);
        }
        Ok(out)
    }

    fn fingerprint(&self) -> String {
        format!("http:{}#{}", self.url(), self.cfg.model_id)
    }
}

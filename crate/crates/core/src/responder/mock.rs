use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationRequest, Responder, ResponderError, VariantResponse};
use crate::error::Result;
use crate::imaging::Variant;

/// Canned answers keyed by `(record_id, variant)`.
///
/// ```json
/// {"responses": [{"record_id": "q1", "variant": "NR", "samples": ["..."]}]}
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    pub responses: Vec<FixtureEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub record_id: String,
    pub variant: Variant,
    pub samples: Vec<String>,
}

impl MockFixture {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn insert(&mut self, record_id: &str, variant: Variant, samples: &[&str]) {
        self.responses.push(FixtureEntry {
            record_id: record_id.into(),
            variant,
            samples: samples.iter().map(|s| s.to_string()).collect(),
        });
    }
}

const SUBJECTS: [&str; 6] = ["The object", "The animal", "The person", "The item", "It", "The scene"];
const PREDICATES: [&str; 16] = [
    "is red", "is black", "is blue", "is yellow-orange", "is green", "is white",
    "has two parts", "has three parts", "has one part", "has no parts",
    "is a jacket", "is a hoodie", "is a sword", "is a cat", "is wearing glasses", "is partially hidden",
];
const HEDGES: [&str; 4] = [
    "This is clearly visible in the image.",
    "The image is somewhat unclear here.",
    "Nothing else stands out.",
    "Other details are hard to make out.",
];

/// Deterministic responder.
///
/// Fixture entries are returned verbatim (cycled when more samples are asked
/// for than the entry holds). Anything else is synthesized from a SHA-256 of
/// the seed and every request field, so output is identical across runs and
/// platforms.
#[derive(Debug, Default)]
pub struct MockResponder {
    seed: u64,
    table: HashMap<(String, Variant), Vec<String>>,
    failing: HashSet<String>,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockResponder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_fixture(mut self, fixture: MockFixture) -> Self {
        for e in fixture.responses {
            self.table.insert((e.record_id, e.variant), e.samples);
        }
        self
    }

    /// Requests for this record fail with a retriable error.
    pub fn failing_for(mut self, record_id: &str) -> Self {
        self.failing.insert(record_id.to_string());
        self
    }

    /// Sleep inside every call, to make concurrency observable.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneously running `generate` calls seen.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn synthesize(&self, req: &GenerationRequest, index: usize) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for field in [req.record_id.as_str(), req.variant.as_str(), &req.question, &req.model_id] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
        h.update(req.temperature.to_bits().to_le_bytes());
        h.update(Sha256::digest(&req.image));
        h.update((index as u64).to_le_bytes());
        let d = h.finalize();
        let pick = |i: usize, n: usize| d[i] as usize % n;
        let mut text = format!("{} {}.", SUBJECTS[pick(0, SUBJECTS.len())], PREDICATES[pick(1, PREDICATES.len())]);
        if d[2] % 2 == 0 {
            text.push(' ');
            text.push_str(HEDGES[pick(3, HEDGES.len())]);
        }
        text
    }
}

impl Responder for MockResponder {
    fn generate(&self, req: &GenerationRequest) -> std::result::Result<VariantResponse, ResponderError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        if self.failing.contains(&req.record_id) {
            return Err(ResponderError::Retriable {
                attempts: 1,
                message: format!("mock failure for {}", req.record_id),
            });
        }
        let samples = match self.table.get(&(req.record_id.clone(), req.variant)) {
            Some(canned) if !canned.is_empty() => {
                canned.iter().cycle().take(req.sample_count).cloned().collect()
            }
            _ => (0..req.sample_count).map(|i| self.synthesize(req, i)).collect(),
        };
        let resp = VariantResponse {
            record_id: req.record_id.clone(),
            variant: req.variant,
            samples,
            model_id: req.model_id.clone(),
            latency_ms: 0,
            from_cache: false,
        };
        resp.validate_for(req)?;
        Ok(resp)
    }

    fn fingerprint(&self) -> String {
        let mut entries: Vec<String> = self
            .table
            .iter()
            .map(|((id, v), s)| format!("{id}\u{1f}{v}\u{1f}{}", s.join("\u{1f}")))
            .collect();
        entries.sort();
        let digest = crate::fsutil::sha256_hex(entries.join("\u{1e}").as_bytes());
        format!("mock:{}:{}", self.seed, &digest[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(sample_count: usize) -> GenerationRequest {
        GenerationRequest {
            record_id: "kitten".into(),
            variant: Variant::Nr,
            image: vec![1, 2, 3],
            question: "How many buttons are there on the kitten's sweater?".into(),
            sample_count,
            model_id: "mock-vlm".into(),
            temperature: 0.7,
        }
    }

    #[test]
    fn same_request_same_samples() {
        let a = MockResponder::new(7).generate(&request(3)).unwrap();
        let b = MockResponder::new(7).generate(&request(3)).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = MockResponder::new(8).generate(&request(3)).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn returns_requested_sample_count() {
        for n in [1, 3, 5] {
            let r = MockResponder::new(1).generate(&request(n)).unwrap();
            assert_eq!(r.samples.len(), n);
            assert!(r.samples.iter().all(|s| !s.trim().is_empty()));
        }
    }

    #[test]
    fn fixture_answer_is_returned_verbatim() {
        let mut fx = MockFixture::default();
        fx.insert("kitten", Variant::Nr, &["There are three buttons on the kitten's sweater"]);
        fx.insert("kitten", Variant::Ee, &["There are no buttons on the kitten's sweater"]);
        let mock = MockResponder::new(0).with_fixture(fx);
        let r = mock.generate(&request(1)).unwrap();
        assert_eq!(r.samples, vec!["There are three buttons on the kitten's sweater"]);
        let r = mock.generate(&request(2)).unwrap();
        assert_eq!(r.samples.len(), 2);
        assert!(r.samples.iter().all(|s| s == "There are three buttons on the kitten's sweater"));
    }

    #[test]
    fn golden_synthetic_output() {
        let r = MockResponder::new(42).generate(&request(2)).unwrap();
        let golden: Vec<String> = serde_json::from_str(include_str!("../../tests/data/mock_golden.json")).unwrap();
        assert_eq!(r.samples, golden);
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let mock = MockResponder::new(0);
        let mut r = request(0);
        assert!(matches!(mock.generate(&r), Err(ResponderError::InvalidRequest(_))));
        r.sample_count = 1;
        r.image.clear();
        assert!(matches!(mock.generate(&r), Err(ResponderError::InvalidRequest(_))));
        assert_eq!(mock.calls(), 0);
    }

    #[test]
    fn failing_records_error() {
        let mock = MockResponder::new(0).failing_for("kitten");
        assert!(matches!(mock.generate(&request(1)), Err(ResponderError::Retriable { .. })));
    }
}

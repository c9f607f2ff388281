use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::Policy;
use crate::error::{Error, Result};
use crate::imaging::{validate_kernel, BlendWeights, FilterSpec, NrMode, Variant};
use crate::scoring::PremiseMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResponderSelector {
    /// Deterministic mock seeded by [`RunConfig::seed`].
    Mock { fixture: Option<PathBuf> },
    Url { endpoint: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NliSelector {
    Stub,
    Url { endpoint: String, model_id: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySet {
    Oracle,
    Route,
    #[default]
    Both,
}

impl PolicySet {
    pub fn policies(self) -> Vec<Policy> {
        match self {
            PolicySet::Oracle => vec![Policy::OracleMin],
            PolicySet::Route => vec![Policy::CategoryRoute],
            PolicySet::Both => vec![Policy::OracleMin, Policy::CategoryRoute],
        }
    }
}

impl FromStr for PolicySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(PolicySet::Oracle),
            "route" => Ok(PolicySet::Route),
            "both" => Ok(PolicySet::Both),
            _ => Err(Error::invalid(format!("unknown policy set {s:?}"))),
        }
    }
}

/// Everything that determines a run. Serialized into the run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub limit: Option<usize>,
    /// Treat missing local images as a fatal load error.
    pub strict: bool,
    pub kernel_size: usize,
    pub nr_mode: NrMode,
    pub blend: BlendWeights,
    /// Samples N per variant; in self-sample mode N + 1 are generated.
    pub sample_count: usize,
    pub premise_mode: PremiseMode,
    pub model_id: String,
    pub temperature: f64,
    pub responder: ResponderSelector,
    pub nli: NliSelector,
    pub policies: PolicySet,
    pub concurrency: usize,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        let out_dir = out_dir.into();
        Self {
            manifest: manifest.into(),
            limit: None,
            strict: false,
            kernel_size: FilterSpec::DEFAULT_KERNEL,
            nr_mode: NrMode::default(),
            blend: BlendWeights::default(),
            sample_count: 3,
            premise_mode: PremiseMode::Reference,
            model_id: "gpt-3.5-vision".into(),
            temperature: 0.7,
            responder: ResponderSelector::Mock { fixture: None },
            nli: NliSelector::Stub,
            policies: PolicySet::Both,
            concurrency: 4,
            cache_dir: out_dir.join("cache"),
            out_dir,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Err(e) = validate_kernel(self.kernel_size) {
            return bad(e.to_string());
        }
        if let Err(e) = self.blend.validate() {
            return bad(e.to_string());
        }
        if self.sample_count == 0 {
            return bad("sample count must be at least 1".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.limit == Some(0) {
            return bad("record limit must be at least 1".into());
        }
        if self.model_id.trim().is_empty() {
            return bad("model id is empty".into());
        }
        if !self.manifest.is_file() {
            return bad(format!("manifest {} does not exist", self.manifest.display()));
        }
        Ok(())
    }

    pub fn filter_spec(&self, variant: Variant) -> FilterSpec {
        FilterSpec::new(variant)
            .with_kernel(self.kernel_size)
            .with_nr_mode(self.nr_mode)
            .with_blend(self.blend)
    }

    /// Samples requested from the responder per variant.
    pub fn generated_samples(&self) -> usize {
        match self.premise_mode {
            PremiseMode::Reference => self.sample_count,
            PremiseMode::SelfSamples => self.sample_count + 1,
        }
    }
}

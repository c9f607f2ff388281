//! End-to-end run: load the corpus, build the three image variants per
//! record, collect responses, score them, ensemble and write reports.
//!
//! Every stage output is stored in a content-addressed [`Cache`], so an
//! interrupted run picks up where it stopped and a repeated run performs no
//! new work. Records that fail are quarantined with the failing stage and
//! excluded from aggregates; they never abort the run. The one exception is
//! a responder configuration error (bad credentials), which would fail every
//! record the same way.

mod cache;
mod config;
mod state;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

pub use cache::{Cache, CacheKey, CacheStage, KeyBuilder};
pub use config::{NliSelector, PolicySet, ResponderSelector, RunConfig};
pub use state::{RunState, Stage};

use crate::corpus::{load_manifest_with, CorpusManifest, CorpusRecord, ImageFetcher, LoadOptions};
use crate::ensemble::VariantScoreTriple;
use crate::error::{Error, Result};
use crate::fsutil::{sha256_hex, write_atomic};
use crate::imaging::{apply_variant, codec, ImageBuffer, NrMode, Variant};
use crate::nli::{HttpNliClient, HttpNliConfig, NliClient, StubNli};
use crate::report::{emit, pretty_json, Artifacts, QuarantineEntry, RunReport, ScoredRecord};
use crate::responder::{
    GenerationRequest, HttpResponder, HttpResponderConfig, MockFixture, MockResponder, Responder,
    ResponderError,
};
use crate::retry::Semaphore;
use crate::scoring::{mean, score_response, PremiseMode, ResponseScore};

/// File names written into the output directory besides the report artifacts.
pub const RUN_FILE: &str = "run.json";
pub const STATE_FILE: &str = "run_state.json";

/// Scores of one variant of one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub responses: Vec<ResponseScore>,
    /// Mean `response_nli` over `responses`.
    pub nli: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    /// `None` when no record completed.
    pub artifacts: Option<Artifacts>,
    pub state: RunState,
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Calls that reached the responder (cache misses).
    pub responder_calls: usize,
}

impl RunOutcome {
    /// 0 when every record completed, 2 when some were quarantined.
    pub fn exit_code(&self) -> i32 {
        if self.report.quarantined.is_empty() {
            0
        } else {
            2
        }
    }
}

pub struct Pipeline {
    config: RunConfig,
    responder: Arc<dyn Responder>,
    nli: Arc<dyn NliClient>,
    responder_slots: Semaphore,
}

struct RecordFailure {
    entry: QuarantineEntry,
    fatal: bool,
}

impl Pipeline {
    /// Builds clients from the selectors in `config`.
    pub fn from_config(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let responder: Arc<dyn Responder> = match &config.responder {
            ResponderSelector::Mock { fixture } => {
                let mut mock = MockResponder::new(config.seed);
                if let Some(path) = fixture {
                    let fx = MockFixture::load(path)
                        .map_err(|e| Error::Config(format!("mock fixture {}: {e}", path.display())))?;
                    mock = mock.with_fixture(fx);
                }
                Arc::new(mock)
            }
            ResponderSelector::Url { endpoint } => {
                Arc::new(HttpResponder::new(HttpResponderConfig::from_env(endpoint.clone())))
            }
        };
        let nli: Arc<dyn NliClient> = match &config.nli {
            NliSelector::Stub => Arc::new(StubNli::new()),
            NliSelector::Url { endpoint, model_id } => {
                let mut cfg = HttpNliConfig::new(endpoint.clone());
                cfg.model_id = model_id.clone();
                Arc::new(HttpNliClient::new(cfg))
            }
        };
        Ok(Self::with_clients(config, responder, nli))
    }

    pub fn with_clients(config: RunConfig, responder: Arc<dyn Responder>, nli: Arc<dyn NliClient>) -> Self {
        let responder_slots = Semaphore::new(config.concurrency);
        Self {
            config,
            responder,
            nli,
            responder_slots,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run(&self) -> Result<RunOutcome> {
        let cfg = &self.config;
        cfg.validate()?;
        let manifest = load_manifest_with(
            &cfg.manifest,
            LoadOptions {
                limit: cfg.limit,
                strict: cfg.strict,
            },
        )?;
        info!(records = manifest.records.len(), source = %manifest.source_name, "corpus loaded");

        let cache = Cache::new(&cfg.cache_dir);
        let fetcher = ImageFetcher::new(&cfg.cache_dir);
        let calls = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.concurrency)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let results: Vec<(std::result::Result<ScoredRecord, RecordFailure>, RunState)> = pool.install(|| {
            manifest
                .records
                .par_iter()
                .map(|record| {
                    let mut state = RunState::new();
                    if abort.load(Ordering::Relaxed) {
                        let entry = quarantine(record, "aborted", "run aborted by a fatal error".into());
                        return (Err(RecordFailure { entry, fatal: false }), state);
                    }
                    let ctx = RecordCtx {
                        manifest: &manifest,
                        record,
                        cache: &cache,
                        fetcher: &fetcher,
                        calls: &calls,
                    };
                    let res = self.process_record(&ctx, &mut state);
                    if let Err(f) = &res {
                        if f.fatal {
                            abort.store(true, Ordering::Relaxed);
                        }
                        warn!(record = %record.id, stage = %f.entry.stage, reason = %f.entry.reason, "record quarantined");
                    }
                    (res, state)
                })
                .collect()
        });

        let mut state = RunState::new();
        let mut records = Vec::new();
        let mut quarantined = Vec::new();
        for (res, s) in results {
            state.merge(&s);
            match res {
                Ok(r) => records.push(r),
                Err(f) if f.fatal => return Err(Error::Config(f.entry.reason)),
                Err(f) => quarantined.push(f.entry),
            }
        }

        let report = RunReport {
            config: serde_json::to_value(cfg)?,
            policies: cfg.policies.policies(),
            records,
            quarantined,
        };
        std::fs::create_dir_all(&cfg.out_dir)?;
        write_atomic(&cfg.out_dir.join(RUN_FILE), &pretty_json(&report)?)?;
        write_atomic(&cfg.out_dir.join(STATE_FILE), &pretty_json(&state)?)?;
        let artifacts = if report.records.is_empty() {
            write_atomic(&cfg.out_dir.join("quarantine.json"), &pretty_json(&report.quarantined)?)?;
            None
        } else {
            Some(emit(&report, &cfg.out_dir)?)
        };

        Ok(RunOutcome {
            report,
            artifacts,
            state,
            cache_hits: cache.stats().hits(),
            cache_misses: cache.stats().misses(),
            responder_calls: calls.load(Ordering::SeqCst),
        })
    }

    fn process_record(
        &self,
        ctx: &RecordCtx<'_>,
        state: &mut RunState,
    ) -> std::result::Result<ScoredRecord, RecordFailure> {
        let record = ctx.record;
        let fail = |stage: &str, e: Error| RecordFailure {
            fatal: matches!(e, Error::Responder(ResponderError::Fatal(_))),
            entry: quarantine(record, stage, e.to_string()),
        };
        if record.skippable {
            return Err(fail("load", Error::MissingImage(record.image.clone())));
        }
        let source_bytes = ctx.fetcher.fetch(ctx.manifest, record).map_err(|e| fail("load", e))?;
        let source_digest = sha256_hex(&source_bytes);
        let mut decoded: Option<ImageBuffer> = None;

        let mut scores = [0.0f64; 3];
        for variant in Variant::ALL {
            let png = self
                .build_variant(ctx, variant, &source_bytes, &source_digest, &mut decoded)
                .map_err(|e| fail("variant", e))?;
            state.advance(&record.id, variant, Stage::VariantBuilt);

            let samples = self.generate(ctx, variant, &png).map_err(|e| fail("generate", e))?;
            state.advance(&record.id, variant, Stage::Generated);

            let score = self.score(ctx, variant, &samples).map_err(|e| fail("score", e))?;
            state.advance(&record.id, variant, Stage::Scored);
            scores[variant.index()] = score.nli;
        }

        let [org, nr, ee] = scores;
        Ok(ScoredRecord {
            scores: VariantScoreTriple::new(&record.id, org, ee, nr),
            categories: record.categories,
        })
    }

    /// Cache key of a variant image. Only settings that change the pixels are included.
    pub fn variant_key(&self, record_id: &str, variant: Variant, source_digest: &str) -> CacheKey {
        let cfg = &self.config;
        let spec = cfg.filter_spec(variant);
        let mut key = KeyBuilder::new(CacheStage::Variant)
            .part("record", record_id)
            .part("variant", variant.as_str())
            .part("source", source_digest);
        match variant {
            Variant::Org => {}
            Variant::Nr => {
                key = key
                    .part("kernel", spec.kernel_size.to_string())
                    .part("nr_mode", format!("{:?}", spec.nr_mode))
                    .part("border", format!("{:?}", spec.border));
                if spec.nr_mode == NrMode::Blended {
                    key = key.part("blend", blend_repr(&spec.blend));
                }
            }
            Variant::Ee => key = key.part("blend", blend_repr(&spec.blend)),
        }
        key.finish()
    }

    /// Cache key of one generated sample.
    pub fn generation_key(
        &self,
        record: &CorpusRecord,
        variant: Variant,
        image_digest: &str,
        sample_index: usize,
    ) -> CacheKey {
        let cfg = &self.config;
        KeyBuilder::new(CacheStage::Generation)
            .part("record", &record.id)
            .part("variant", variant.as_str())
            .part("question", sha256_hex(record.question.as_bytes()))
            .part("model", &cfg.model_id)
            .part("temperature", cfg.temperature.to_bits().to_le_bytes())
            .part("sample", sample_index.to_string())
            .part("image", image_digest)
            .part("responder", self.responder.fingerprint())
            .finish()
    }

    fn score_key(&self, record: &CorpusRecord, variant: Variant, samples: &[String]) -> CacheKey {
        let mut key = KeyBuilder::new(CacheStage::Score)
            .part("record", &record.id)
            .part("variant", variant.as_str())
            .part("premise_mode", self.config.premise_mode.to_string())
            .part("sample_count", self.config.sample_count.to_string())
            .part("reference", &record.reference_answer)
            .part("nli", self.nli.fingerprint());
        for s in samples {
            key = key.part("sample", s);
        }
        key.finish()
    }

    fn build_variant(
        &self,
        ctx: &RecordCtx<'_>,
        variant: Variant,
        source_bytes: &[u8],
        source_digest: &str,
        decoded: &mut Option<ImageBuffer>,
    ) -> Result<Vec<u8>> {
        let key = self.variant_key(&ctx.record.id, variant, source_digest);
        if let Some(png) = ctx.cache.get(&key) {
            return Ok(png);
        }
        if decoded.is_none() {
            *decoded = Some(codec::decode(source_bytes)?);
        }
        let src = decoded.as_ref().expect("decoded above");
        let img = apply_variant(src, &self.config.filter_spec(variant))?;
        let png = codec::encode_png(&img)?;
        ctx.cache.put(&key, &png)?;
        Ok(png)
    }

    fn generate(&self, ctx: &RecordCtx<'_>, variant: Variant, png: &[u8]) -> Result<Vec<String>> {
        let cfg = &self.config;
        let n = cfg.generated_samples();
        let image_digest = sha256_hex(png);
        let keys: Vec<CacheKey> = (0..n)
            .map(|i| self.generation_key(ctx.record, variant, &image_digest, i))
            .collect();

        let cached: Option<Vec<String>> = keys
            .iter()
            .map(|k| ctx.cache.get(k).and_then(|b| String::from_utf8(b).ok()))
            .collect();
        if let Some(samples) = cached {
            return Ok(samples);
        }

        let req = GenerationRequest {
            record_id: ctx.record.id.clone(),
            variant,
            image: png.to_vec(),
            question: ctx.record.question.clone(),
            sample_count: n,
            model_id: cfg.model_id.clone(),
            temperature: cfg.temperature,
        };
        let resp = {
            let _slot = self.responder_slots.acquire();
            ctx.calls.fetch_add(1, Ordering::SeqCst);
            self.responder.generate(&req)?
        };
        resp.validate_for(&req)?;
        for (k, s) in keys.iter().zip(&resp.samples) {
            ctx.cache.put(k, s.as_bytes())?;
        }
        Ok(resp.samples)
    }

    fn score(&self, ctx: &RecordCtx<'_>, variant: Variant, samples: &[String]) -> Result<VariantScore> {
        let key = self.score_key(ctx.record, variant, samples);
        if let Some(bytes) = ctx.cache.get(&key) {
            if let Ok(score) = serde_json::from_slice::<VariantScore>(&bytes) {
                return Ok(score);
            }
        }
        let id = &ctx.record.id;
        let mode = self.config.premise_mode;
        let responses = match mode {
            PremiseMode::Reference => {
                let premises = [ctx.record.reference_answer.clone()];
                samples
                    .iter()
                    .map(|s| score_response(id, variant, s, &premises, mode, self.nli.as_ref()))
                    .collect::<Result<Vec<_>>>()?
            }
            PremiseMode::SelfSamples => {
                let (answer, premises) = samples
                    .split_first()
                    .ok_or_else(|| Error::EmptyInput("no samples to score".into()))?;
                vec![score_response(id, variant, answer, premises, mode, self.nli.as_ref())?]
            }
        };
        let nli = mean(&responses.iter().map(|r| r.response_nli).collect::<Vec<_>>());
        let score = VariantScore { responses, nli };
        ctx.cache.put(&key, &serde_json::to_vec(&score)?)?;
        Ok(score)
    }
}

struct RecordCtx<'a> {
    manifest: &'a CorpusManifest,
    record: &'a CorpusRecord,
    cache: &'a Cache,
    fetcher: &'a ImageFetcher,
    calls: &'a AtomicUsize,
}

fn quarantine(record: &CorpusRecord, stage: &str, reason: String) -> QuarantineEntry {
    QuarantineEntry {
        record_id: record.id.clone(),
        stage: stage.to_string(),
        reason,
    }
}

fn blend_repr(w: &crate::imaging::BlendWeights) -> String {
    format!("{:?}/{:?}/{:?}", w.alpha.to_bits(), w.beta.to_bits(), w.gamma.to_bits())
}

/// Re-emits the report artifacts of a finished run from its `run.json`.
pub fn rerun_report(run_dir: &Path, out_dir: Option<&Path>) -> Result<Artifacts> {
    let bytes = std::fs::read(run_dir.join(RUN_FILE))?;
    let report: RunReport = serde_json::from_slice(&bytes)?;
    emit(&report, out_dir.unwrap_or(run_dir))
}

/// Writes the ORG, NR and EE versions of one image as PNGs.
pub fn write_variants(
    input: &Path,
    out_dir: &Path,
    spec_for: impl Fn(Variant) -> crate::imaging::FilterSpec,
) -> Result<Vec<PathBuf>> {
    let src = codec::load(input)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    std::fs::create_dir_all(out_dir)?;
    Variant::ALL
        .into_iter()
        .map(|v| {
            let img = apply_variant(&src, &spec_for(v))?;
            let path = out_dir.join(format!("{stem}_{}.png", v.as_str().to_lowercase()));
            write_atomic(&path, &codec::encode_png(&img)?)?;
            Ok(path)
        })
        .collect()
}

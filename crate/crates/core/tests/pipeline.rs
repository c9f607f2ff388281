mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{read_all, write_corpus};
use vqa_prefilter::nli::{NliClient, NliError, NliLogits, NliPair, StubNli};
use vqa_prefilter::pipeline::{rerun_report, Pipeline, RunConfig, Stage, RUN_FILE};
use vqa_prefilter::responder::{MockFixture, MockResponder};
use vqa_prefilter::{Error, Variant};

const OUTPUTS: [&str; 6] = [
    "case_counts.csv",
    "summary.json",
    "per_record.csv",
    "quarantine.json",
    RUN_FILE,
    "run_state.json",
];

fn config(dir: &std::path::Path, records: usize) -> RunConfig {
    let manifest = write_corpus(dir, records, 11);
    let mut cfg = RunConfig::new(manifest, dir.join("out"));
    cfg.kernel_size = 3;
    cfg.seed = 5;
    cfg
}

fn run_with(cfg: &RunConfig, mock: &Arc<MockResponder>, nli: Arc<dyn NliClient>) -> vqa_prefilter::pipeline::RunOutcome {
    Pipeline::with_clients(cfg.clone(), mock.clone(), nli).run().unwrap()
}

/// NLI client that fails after a fixed number of batches.
struct DiesAfter {
    inner: StubNli,
    budget: std::sync::atomic::AtomicIsize,
}

impl NliClient for DiesAfter {
    fn logits(&self, pairs: &[NliPair]) -> Result<Vec<NliLogits>, NliError> {
        if self.budget.fetch_sub(1, std::sync::atomic::Ordering::SeqCst) <= 0 {
            return Err(NliError::Transport("connection reset".into()));
        }
        self.inner.logits(pairs)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

#[test]
fn repeated_run_is_byte_identical_and_fully_cached() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 24);

    let first = Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    assert_eq!(first.exit_code(), 0);
    assert_eq!(first.report.records.len(), 24);
    assert_eq!(first.cache_hits, 0);
    let before = read_all(&cfg.out_dir, &OUTPUTS);

    let second = Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    assert_eq!(second.responder_calls, 0);
    assert_eq!(second.cache_misses, 0);
    assert!(second.cache_hits > 0);
    assert_eq!(before, read_all(&cfg.out_dir, &OUTPUTS));
}

#[test]
fn output_does_not_depend_on_concurrency() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 16);
    cfg.concurrency = 1;
    Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    let serial = read_all(&cfg.out_dir, &["per_record.csv", "case_counts.csv"]);

    cfg.concurrency = 8;
    cfg.out_dir = dir.path().join("out8");
    cfg.cache_dir = dir.path().join("cache8");
    Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    assert_eq!(serial, read_all(&cfg.out_dir, &["per_record.csv", "case_counts.csv"]));
}

#[test]
fn resume_after_failure_makes_no_duplicate_responder_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 12);
    let mock = Arc::new(MockResponder::new(cfg.seed));

    // First attempt: scoring dies part way through.
    let dying = Arc::new(DiesAfter {
        inner: StubNli::new(),
        budget: 40.into(),
    });
    let interrupted = run_with(&cfg, &mock, dying);
    assert_eq!(interrupted.exit_code(), 2);
    assert!(interrupted.report.quarantined.iter().all(|q| q.stage == "score"));
    let generated = interrupted.state.count_at_least(Stage::Generated);
    assert_eq!(mock.calls(), generated);

    let resumed = run_with(&cfg, &mock, Arc::new(StubNli::new()));
    assert_eq!(resumed.exit_code(), 0);
    assert_eq!(mock.calls(), 12 * 3, "every (record, variant) is generated exactly once");
    assert_eq!(resumed.responder_calls, 12 * 3 - generated);

    // Same results as an uninterrupted run in a fresh cache.
    let mut clean = cfg.clone();
    clean.cache_dir = dir.path().join("clean-cache");
    clean.out_dir = dir.path().join("clean-out");
    let fresh = Arc::new(MockResponder::new(cfg.seed));
    run_with(&clean, &fresh, Arc::new(StubNli::new()));
    assert_eq!(
        read_all(&cfg.out_dir, &["per_record.csv", "case_counts.csv"]),
        read_all(&clean.out_dir, &["per_record.csv", "case_counts.csv"])
    );
}

#[test]
fn responder_failure_is_quarantined_and_retried_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 6);
    let failing = Arc::new(MockResponder::new(cfg.seed).failing_for("r0003"));
    let first = run_with(&cfg, &failing, Arc::new(StubNli::new()));
    assert_eq!(first.exit_code(), 2);
    assert_eq!(first.report.records.len(), 5);
    assert_eq!(first.report.quarantined.len(), 1);
    let q = &first.report.quarantined[0];
    assert_eq!((q.record_id.as_str(), q.stage.as_str()), ("r0003", "generate"));
    assert!(first.report.records.iter().all(|r| r.scores.record_id != "r0003"));
    let quarantine: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.out_dir.join("quarantine.json")).unwrap()).unwrap();
    assert_eq!(quarantine[0]["record_id"], "r0003");

    let healthy = Arc::new(MockResponder::new(cfg.seed));
    let second = run_with(&cfg, &healthy, Arc::new(StubNli::new()));
    assert_eq!(second.exit_code(), 0);
    assert_eq!(healthy.calls(), 3);
}

#[test]
fn responder_concurrency_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 16);
    cfg.concurrency = 3;
    let mock = Arc::new(MockResponder::new(cfg.seed).with_delay(Duration::from_millis(15)));
    run_with(&cfg, &mock, Arc::new(StubNli::new()));
    assert!(mock.peak_in_flight() <= 3, "peak {}", mock.peak_in_flight());
    assert!(mock.peak_in_flight() >= 2, "calls never overlapped");
}

#[test]
fn changing_the_kernel_only_invalidates_nr_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 8);
    let mock = Arc::new(MockResponder::new(cfg.seed));
    run_with(&cfg, &mock, Arc::new(StubNli::new()));
    assert_eq!(mock.calls(), 24);

    cfg.kernel_size = 5;
    let second = run_with(&cfg, &mock, Arc::new(StubNli::new()));
    // Only NR pixels change; ORG and EE generations are reused. A 1x1 or
    // flat image can give the same NR pixels for both kernels, in which
    // case the generation is reused too.
    assert!(second.responder_calls <= 8);
    assert!(second.responder_calls >= 1);

    let p = Pipeline::with_clients(cfg.clone(), mock.clone(), Arc::new(StubNli::new()));
    let mut other = cfg.clone();
    other.kernel_size = 3;
    let q = Pipeline::with_clients(other, mock.clone(), Arc::new(StubNli::new()));
    assert_eq!(p.variant_key("r", Variant::Org, "d"), q.variant_key("r", Variant::Org, "d"));
    assert_eq!(p.variant_key("r", Variant::Ee, "d"), q.variant_key("r", Variant::Ee, "d"));
    assert_ne!(p.variant_key("r", Variant::Nr, "d"), q.variant_key("r", Variant::Nr, "d"));
}

#[test]
fn self_sample_mode_requests_one_extra_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 3);
    cfg.premise_mode = vqa_prefilter::scoring::PremiseMode::SelfSamples;
    let outcome = Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let run: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.out_dir.join(RUN_FILE)).unwrap()).unwrap();
    assert_eq!(run["config"]["premise_mode"], "self_samples");
}

#[test]
fn kitten_fixture_scores_nr_lowest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 2);
    // r0001 is the kitten question of the generated corpus.
    let mut fixture = MockFixture::default();
    fixture.insert("r0001", Variant::Org, &["There are two buttons on the kitten's sweater"]);
    fixture.insert("r0001", Variant::Ee, &["There are no buttons on the kitten's sweater"]);
    fixture.insert("r0001", Variant::Nr, &["There are three buttons on the kitten's sweater"]);
    let mock = Arc::new(MockResponder::new(cfg.seed).with_fixture(fixture));
    let outcome = run_with(&cfg, &mock, Arc::new(StubNli::new()));

    let kitten = outcome
        .report
        .records
        .iter()
        .find(|r| r.scores.record_id == "r0001")
        .unwrap();
    let s = &kitten.scores;
    assert!(s.nli_nr < 1e-3, "{s:?}");
    assert!(s.nli_nr < s.nli_org && s.nli_nr < s.nli_ee);
    let decisions = outcome.report.decide().unwrap();
    let oracle = &decisions[0].1;
    let d = oracle.iter().find(|d| d.record_id == "r0001").unwrap();
    assert_eq!(d.chosen_variant, Variant::Nr);
}

#[test]
fn missing_images_are_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 4);
    std::fs::remove_file(dir.path().join("images/img0002.png")).unwrap();
    let outcome = Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    assert_eq!(outcome.exit_code(), 2);
    assert_eq!(outcome.report.quarantined.len(), 1);
    assert_eq!(outcome.report.quarantined[0].stage, "load");

    let mut strict = cfg;
    strict.strict = true;
    assert!(Pipeline::from_config(strict).unwrap().run().is_err());
}

#[test]
fn limit_truncates_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 10);
    cfg.limit = Some(4);
    let outcome = Pipeline::from_config(cfg).unwrap().run().unwrap();
    assert_eq!(outcome.report.records.len(), 4);
}

#[test]
fn invalid_configuration_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 2);
    cfg.kernel_size = 4;
    assert!(matches!(Pipeline::from_config(cfg), Err(Error::Config(_))));
}

#[test]
fn report_can_be_regenerated_from_run_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5);
    Pipeline::from_config(cfg.clone()).unwrap().run().unwrap();
    let again = dir.path().join("again");
    rerun_report(&cfg.out_dir, Some(&again)).unwrap();
    let names = ["case_counts.csv", "summary.json", "per_record.csv", "quarantine.json"];
    assert_eq!(read_all(&cfg.out_dir, &names), read_all(&again, &names));
}

#[test]
fn all_records_failing_still_writes_quarantine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 2);
    let mock = Arc::new(MockResponder::new(0).failing_for("r0000").failing_for("r0001"));
    let outcome = run_with(&cfg, &mock, Arc::new(StubNli::new()));
    assert!(outcome.artifacts.is_none());
    assert_eq!(outcome.exit_code(), 2);
    assert!(cfg.out_dir.join("quarantine.json").is_file());
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use vqa_prefilter::imaging::{BlendWeights, FilterSpec, NrMode};
use vqa_prefilter::pipeline::{self, NliSelector, Pipeline, PolicySet, ResponderSelector, RunConfig};
use vqa_prefilter::scoring::PremiseMode;

/// Filter images three ways, ask a vision-language model about each, and
/// keep the answer an NLI model finds least contradictory.
#[derive(Parser)]
#[command(name = "vqa-prefilter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a manifest.
    Run(RunArgs),
    /// Re-emit report artifacts from a finished run directory.
    Report {
        #[arg(long = "run", value_name = "DIR")]
        run_dir: PathBuf,
        /// Write artifacts here instead of into the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the ORG, NR and EE variants of one image as PNGs.
    Filters {
        #[arg(long = "in", value_name = "IMG")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
}

#[derive(Args)]
struct FilterArgs {
    /// Median kernel size (odd, >= 3).
    #[arg(long, default_value_t = FilterSpec::DEFAULT_KERNEL)]
    kernel: usize,
    /// `pure` median or `blended` (median sharpened against the source).
    #[arg(long, default_value = "pure", value_parser = parse_with::<NrMode>)]
    nr_mode: NrMode,
    #[arg(long, default_value_t = BlendWeights::SHARPEN.alpha, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = BlendWeights::SHARPEN.beta, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = BlendWeights::SHARPEN.gamma, allow_negative_numbers = true)]
    gamma: f64,
}

impl FilterArgs {
    fn blend(&self) -> BlendWeights {
        BlendWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Process only the first N records.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Defaults to `<out>/cache`.
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    /// Responses sampled per variant.
    #[arg(long, default_value_t = 3)]
    samples: usize,
    /// `reference` answer or `self` samples as NLI premises.
    #[arg(long, default_value = "reference", value_parser = parse_with::<PremiseMode>)]
    premise: PremiseMode,
    /// `oracle`, `route` or `both`.
    #[arg(long, default_value = "both", value_parser = parse_with::<PolicySet>)]
    policy: PolicySet,
    /// `mock` or the URL of a responder endpoint.
    #[arg(long, default_value = "mock")]
    responder: String,
    /// Canned answers for the mock responder.
    #[arg(long, value_name = "PATH")]
    mock_fixture: Option<PathBuf>,
    /// `stub` or the base URL of an NLI service.
    #[arg(long, default_value = "stub")]
    nli: String,
    #[arg(long, default_value = "default")]
    nli_model: String,
    /// Model id sent to the responder.
    #[arg(long, default_value = "gpt-3.5-vision")]
    model: String,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    /// Maximum records in flight, which also bounds responder calls.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail on missing local images instead of quarantining them.
    #[arg(long)]
    strict: bool,
}

fn parse_with<T: std::str::FromStr<Err = vqa_prefilter::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: vqa_prefilter::Error| e.to_string())
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.manifest, self.out);
        if let Some(dir) = self.cache_dir {
            cfg.cache_dir = dir;
        }
        cfg.limit = self.limit;
        cfg.strict = self.strict;
        cfg.kernel_size = self.filter.kernel;
        cfg.nr_mode = self.filter.nr_mode;
        cfg.blend = self.filter.blend();
        cfg.sample_count = self.samples;
        cfg.premise_mode = self.premise;
        cfg.policies = self.policy;
        cfg.model_id = self.model;
        cfg.temperature = self.temperature;
        cfg.concurrency = self.concurrency;
        cfg.seed = self.seed;
        cfg.responder = match self.responder.as_str() {
            "mock" => ResponderSelector::Mock {
                fixture: self.mock_fixture,
            },
            url if is_url(url) => {
                if self.mock_fixture.is_some() {
                    bail!("--mock-fixture only applies to the mock responder");
                }
                ResponderSelector::Url { endpoint: url.into() }
            }
            other => bail!("--responder must be `mock` or an http(s) URL, got {other:?}"),
        };
        cfg.nli = match self.nli.as_str() {
            "stub" => NliSelector::Stub,
            url if is_url(url) => NliSelector::Url {
                endpoint: url.into(),
                model_id: self.nli_model,
            },
            other => bail!("--nli must be `stub` or an http(s) URL, got {other:?}"),
        };
        Ok(cfg)
    }
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

fn run(args: RunArgs) -> Result<u8> {
    let pipeline = Pipeline::from_config(args.into_config()?)?;
    let outcome = pipeline.run()?;
    let complete = outcome.report.records.len();
    let quarantined = outcome.report.quarantined.len();
    match &outcome.artifacts {
        Some(a) => {
            let summary = outcome.report.summary()?;
            for p in &summary.policies {
                println!(
                    "{}: org {:.3} ee {:.3} nr {:.3} ensemble {:.3} (reduction {})",
                    p.policy,
                    p.stats.mean_org,
                    p.stats.mean_ee,
                    p.stats.mean_nr,
                    p.stats.mean_ensemble,
                    p.stats.reduction_display()
                );
            }
            println!("summary: {}", a.summary_json.display());
        }
        None => println!("no record completed"),
    }
    println!(
        "{complete} complete, {quarantined} quarantined, {} cache hits, {} responder calls",
        outcome.cache_hits, outcome.responder_calls
    );
    Ok(outcome.exit_code() as u8)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Report { run_dir, out } => {
            let a = pipeline::rerun_report(&run_dir, out.as_deref())
                .with_context(|| format!("re-emitting report from {}", run_dir.display()))?;
            println!("summary: {}", a.summary_json.display());
            Ok(0)
        }
        Command::Filters { input, out, filter } => {
            let spec = |v| {
                FilterSpec::new(v)
                    .with_kernel(filter.kernel)
                    .with_nr_mode(filter.nr_mode)
                    .with_blend(filter.blend())
            };
            for path in pipeline::write_variants(&input, &out, spec)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

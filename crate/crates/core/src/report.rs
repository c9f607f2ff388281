//! Result tables: win counts per case and category, mean scores with the
//! relative reduction achieved by an ensemble, and per-record score series.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{category_route, oracle_min, EnsembleDecision, Policy, RoutingTable, VariantScoreTriple};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::imaging::Variant;
use crate::scoring::mean;
use crate::taxonomy::{CategorySet, QuestionCategory};

/// Row predicates of the win-count table. All comparisons are strict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    EeLowest,
    NrLowest,
    OrgLowest,
    /// No variant is strictly below both others.
    NoStrictLowest,
    EeBelowOrg,
    NrBelowOrg,
    NrBelowEe,
    EeEqualsOrg,
    NrEqualsOrg,
    NrEqualsEe,
}

impl Case {
    pub const ALL: [Case; 10] = [
        Case::EeLowest,
        Case::NrLowest,
        Case::OrgLowest,
        Case::NoStrictLowest,
        Case::EeBelowOrg,
        Case::NrBelowOrg,
        Case::NrBelowEe,
        Case::EeEqualsOrg,
        Case::NrEqualsOrg,
        Case::NrEqualsEe,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Case::EeLowest => "NLI_EE < NLI_NR & NLI_EE < NLI_org",
            Case::NrLowest => "NLI_NR < NLI_EE & NLI_NR < NLI_org",
            Case::OrgLowest => "NLI_org < NLI_EE & NLI_org < NLI_NR",
            Case::NoStrictLowest => "no strict lowest (tie)",
            Case::EeBelowOrg => "NLI_EE < NLI_org",
            Case::NrBelowOrg => "NLI_NR < NLI_org",
            Case::NrBelowEe => "NLI_NR < NLI_EE",
            Case::EeEqualsOrg => "NLI_EE = NLI_org",
            Case::NrEqualsOrg => "NLI_NR = NLI_org",
            Case::NrEqualsEe => "NLI_NR = NLI_EE",
        }
    }

    pub fn holds(self, t: &VariantScoreTriple) -> bool {
        let (o, e, n) = (t.nli_org, t.nli_ee, t.nli_nr);
        match self {
            Case::EeLowest => e < n && e < o,
            Case::NrLowest => n < e && n < o,
            Case::OrgLowest => o < e && o < n,
            Case::NoStrictLowest => {
                !(Case::EeLowest.holds(t) || Case::NrLowest.holds(t) || Case::OrgLowest.holds(t))
            }
            Case::EeBelowOrg => e < o,
            Case::NrBelowOrg => n < o,
            Case::NrBelowEe => n < e,
            Case::EeEqualsOrg => e == o,
            Case::NrEqualsOrg => n == o,
            Case::NrEqualsEe => n == e,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case: Case,
    pub all: usize,
    pub per_category: BTreeMap<QuestionCategory, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub records: usize,
    /// Records per category; overlapping records count in every category.
    pub category_records: BTreeMap<QuestionCategory, usize>,
    pub rows: Vec<CaseRow>,
}

impl CaseCounts {
    pub fn count(&self, case: Case) -> usize {
        self.row(case).all
    }

    pub fn count_in(&self, case: Case, category: QuestionCategory) -> usize {
        self.row(case).per_category.get(&category).copied().unwrap_or(0)
    }

    fn row(&self, case: Case) -> &CaseRow {
        self.rows
            .iter()
            .find(|r| r.case == case)
            .expect("every case has a row")
    }

    /// Table rows as CSV: one row per case, one column per category.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["case".to_string(), format!("all ({})", self.records)];
        for c in QuestionCategory::ALL {
            header.push(format!("{} ({})", c, self.category_records.get(&c).copied().unwrap_or(0)));
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.case.label().to_string(), row.all.to_string()];
            for c in QuestionCategory::ALL {
                rec.push(row.per_category.get(&c).copied().unwrap_or(0).to_string());
            }
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Evaluates every [`Case`] overall and per category.
pub fn case_counts(triples: &[VariantScoreTriple], categories: &[CategorySet]) -> Result<CaseCounts> {
    if triples.len() != categories.len() {
        return Err(Error::invalid("score triples and category sets differ in length"));
    }
    let category_records = QuestionCategory::ALL
        .into_iter()
        .map(|c| (c, categories.iter().filter(|s| s.contains(c)).count()))
        .collect();
    let rows = Case::ALL
        .into_iter()
        .map(|case| {
            let hits: Vec<&CategorySet> = triples
                .iter()
                .zip(categories)
                .filter(|(t, _)| case.holds(t))
                .map(|(_, c)| c)
                .collect();
            CaseRow {
                case,
                all: hits.len(),
                per_category: QuestionCategory::ALL
                    .into_iter()
                    .map(|c| (c, hits.iter().filter(|s| s.contains(c)).count()))
                    .collect(),
            }
        })
        .collect();
    Ok(CaseCounts {
        records: triples.len(),
        category_records,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub records: usize,
    pub mean_org: f64,
    pub mean_ee: f64,
    pub mean_nr: f64,
    pub mean_ensemble: f64,
    /// `(mean_org - mean_ensemble) / mean_org * 100`; absent when `mean_org == 0`.
    pub reduction_pct: Option<f64>,
}

impl SummaryStats {
    pub fn from_means(records: usize, org: f64, ee: f64, nr: f64, ensemble: f64) -> Self {
        let reduction_pct = (org > 0.0).then(|| (org - ensemble) / org * 100.0);
        Self {
            records,
            mean_org: org,
            mean_ee: ee,
            mean_nr: nr,
            mean_ensemble: ensemble,
            reduction_pct,
        }
    }

    /// Reduction rounded to one decimal, e.g. `"44.3%"`.
    pub fn reduction_display(&self) -> String {
        self.reduction_pct
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.1}%"))
    }
}

/// Mean score per variant and for the ensemble decisions.
pub fn summarize(triples: &[VariantScoreTriple], decisions: &[EnsembleDecision]) -> Result<SummaryStats> {
    if triples.is_empty() || decisions.is_empty() {
        return Err(Error::EmptyRun);
    }
    if triples.len() != decisions.len() {
        return Err(Error::invalid(format!(
            "{} triples but {} decisions",
            triples.len(),
            decisions.len()
        )));
    }
    if let Some((t, d)) = triples.iter().zip(decisions).find(|(t, d)| t.record_id != d.record_id) {
        return Err(Error::invalid(format!(
            "decision for {:?} paired with triple {:?}",
            d.record_id, t.record_id
        )));
    }
    let col = |f: fn(&VariantScoreTriple) -> f64| mean(&triples.iter().map(f).collect::<Vec<_>>());
    Ok(SummaryStats::from_means(
        triples.len(),
        col(|t| t.nli_org),
        col(|t| t.nli_ee),
        col(|t| t.nli_nr),
        mean(&decisions.iter().map(|d| d.chosen_score).collect::<Vec<_>>()),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub scores: VariantScoreTriple,
    pub categories: CategorySet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub record_id: String,
    pub stage: String,
    pub reason: String,
}

/// Snapshot of a finished run; everything the artifacts are derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// The run configuration, embedded for provenance.
    pub config: serde_json::Value,
    pub policies: Vec<Policy>,
    /// Complete records in manifest order.
    pub records: Vec<ScoredRecord>,
    pub quarantined: Vec<QuarantineEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: Policy,
    #[serde(flatten)]
    pub stats: SummaryStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub routing_table: Option<RoutingTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: serde_json::Value,
    pub complete_records: usize,
    pub quarantined_records: usize,
    pub policies: Vec<PolicySummary>,
    pub case_counts: CaseCounts,
}

/// Paths written by [`emit`].
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub case_counts_csv: PathBuf,
    pub summary_json: PathBuf,
    pub per_record_csv: PathBuf,
    pub quarantine_json: PathBuf,
}

impl RunReport {
    fn triples_and_categories(&self) -> (Vec<VariantScoreTriple>, Vec<CategorySet>) {
        self.records
            .iter()
            .map(|r| (r.scores.clone(), r.categories))
            .unzip()
    }

    /// Decisions per configured policy, in policy order.
    pub fn decide(&self) -> Result<Vec<(Policy, Vec<EnsembleDecision>, Option<RoutingTable>)>> {
        let (triples, cats) = self.triples_and_categories();
        if triples.is_empty() {
            return Err(Error::EmptyRun);
        }
        self.policies
            .iter()
            .map(|p| match p {
                Policy::OracleMin => Ok((*p, triples.iter().map(oracle_min).collect(), None)),
                Policy::CategoryRoute => {
                    let (table, d) = category_route(&triples, &cats)?;
                    Ok((*p, d, Some(table)))
                }
            })
            .collect()
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let (triples, cats) = self.triples_and_categories();
        let policies = self
            .decide()?
            .into_iter()
            .map(|(policy, decisions, routing_table)| {
                Ok(PolicySummary {
                    policy,
                    stats: summarize(&triples, &decisions)?,
                    routing_table,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RunSummary {
            config: self.config.clone(),
            complete_records: triples.len(),
            quarantined_records: self.quarantined.len(),
            policies,
            case_counts: case_counts(&triples, &cats)?,
        })
    }

    /// Long-format rows: one per (record, variant) with a chosen flag per policy.
    pub fn per_record_csv(&self) -> Result<Vec<u8>> {
        let decided = self.decide()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["record_id".to_string(), "categories".into(), "variant".into(), "score".into()];
        header.extend(decided.iter().map(|(p, _, _)| format!("chosen_{p}")));
        w.write_record(&header)?;
        for (i, rec) in self.records.iter().enumerate() {
            let cats: Vec<&str> = rec.categories.iter().map(|c| c.as_str()).collect();
            for v in Variant::ALL {
                let mut row = vec![
                    rec.scores.record_id.clone(),
                    cats.join("|"),
                    v.to_string(),
                    rec.scores.score(v).to_string(),
                ];
                row.extend(
                    decided
                        .iter()
                        .map(|(_, d, _)| u8::from(d[i].chosen_variant == v).to_string()),
                );
                w.write_record(&row)?;
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Writes all artifacts of `run` into `out_dir`. Output bytes depend only on `run`.
pub fn emit(run: &RunReport, out_dir: &Path) -> Result<Artifacts> {
    let summary = run.summary()?;
    std::fs::create_dir_all(out_dir)?;
    let artifacts = Artifacts {
        case_counts_csv: out_dir.join("case_counts.csv"),
        summary_json: out_dir.join("summary.json"),
        per_record_csv: out_dir.join("per_record.csv"),
        quarantine_json: out_dir.join("quarantine.json"),
    };
    write_atomic(&artifacts.case_counts_csv, &summary.case_counts.to_csv()?)?;
    write_atomic(&artifacts.summary_json, &pretty_json(&summary)?)?;
    write_atomic(&artifacts.per_record_csv, &run.per_record_csv()?)?;
    write_atomic(&artifacts.quarantine_json, &pretty_json(&run.quarantined)?)?;
    Ok(artifacts)
}

pub(crate) fn pretty_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

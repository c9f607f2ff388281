//! Picking one variant per record.
//!
//! Two policies are provided:
//!
//! * [`oracle_min`] looks at all three scores of a record and keeps the
//!   lowest. It needs every variant scored at inference time.
//! * [`category_route`] learns, per question category, which variant has the
//!   lowest mean score, then routes each record by its primary category.
//!
//! Ties always resolve to the least processed variant (ORG, then NR, then EE).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Variant;
use crate::taxonomy::{CategorySet, QuestionCategory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantScoreTriple {
    pub record_id: String,
    pub nli_org: f64,
    pub nli_ee: f64,
    pub nli_nr: f64,
}

impl VariantScoreTriple {
    pub fn new(record_id: impl Into<String>, org: f64, ee: f64, nr: f64) -> Self {
        Self {
            record_id: record_id.into(),
            nli_org: org,
            nli_ee: ee,
            nli_nr: nr,
        }
    }

    /// Assembles a triple from possibly missing scores.
    pub fn from_partial(
        record_id: &str,
        org: Option<f64>,
        ee: Option<f64>,
        nr: Option<f64>,
    ) -> Result<Self> {
        let need = |v: Option<f64>, variant: Variant| {
            v.ok_or_else(|| Error::IncompleteRecord {
                record_id: record_id.to_string(),
                variant: variant.to_string(),
            })
        };
        Ok(Self::new(
            record_id,
            need(org, Variant::Org)?,
            need(ee, Variant::Ee)?,
            need(nr, Variant::Nr)?,
        ))
    }

    pub fn score(&self, v: Variant) -> f64 {
        match v {
            Variant::Org => self.nli_org,
            Variant::Nr => self.nli_nr,
            Variant::Ee => self.nli_ee,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    OracleMin,
    CategoryRoute,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::OracleMin => "oracle_min",
            Policy::CategoryRoute => "category_route",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub record_id: String,
    pub chosen_variant: Variant,
    pub chosen_score: f64,
    pub policy: Policy,
}

/// Lowest-scoring variant under the ORG > NR > EE tie preference.
fn argmin(score: impl Fn(Variant) -> f64) -> Variant {
    let mut best = Variant::ALL[0];
    for v in &Variant::ALL[1..] {
        if score(*v) < score(best) {
            best = *v;
        }
    }
    best
}

pub fn oracle_min(t: &VariantScoreTriple) -> EnsembleDecision {
    let v = argmin(|v| t.score(v));
    EnsembleDecision {
        record_id: t.record_id.clone(),
        chosen_variant: v,
        chosen_score: t.score(v),
        policy: Policy::OracleMin,
    }
}

/// Category to variant assignments learned from scored records.
///
/// Equality compares routes only. A fitted table routes every category, so
/// the fallback is informational and is not part of the JSON form.
#[derive(Clone, Debug)]
pub struct RoutingTable {
    routes: BTreeMap<QuestionCategory, Variant>,
    /// Used for categories that had no records when fitting.
    fallback: Variant,
}

impl RoutingTable {
    /// Fits the table: per category, the variant with the lowest mean score
    /// among the records carrying that category.
    pub fn fit(triples: &[VariantScoreTriple], categories: &[CategorySet]) -> Result<Self> {
        check_aligned(triples, categories)?;
        if triples.is_empty() {
            return Err(Error::invalid("cannot fit a routing table on zero records"));
        }
        let fallback = argmin(|v| mean_score(triples.iter(), v));
        let routes = QuestionCategory::ALL
            .into_iter()
            .map(|cat| {
                let members: Vec<&VariantScoreTriple> = triples
                    .iter()
                    .zip(categories)
                    .filter(|(_, cs)| cs.contains(cat))
                    .map(|(t, _)| t)
                    .collect();
                let variant = if members.is_empty() {
                    fallback
                } else {
                    argmin(|v| mean_score(members.iter().copied(), v))
                };
                (cat, variant)
            })
            .collect();
        Ok(Self { routes, fallback })
    }

    pub fn variant_for(&self, category: QuestionCategory) -> Variant {
        self.routes.get(&category).copied().unwrap_or(self.fallback)
    }

    /// Variant chosen for a record with these categories.
    pub fn route(&self, categories: &CategorySet) -> Variant {
        self.variant_for(categories.primary())
    }

    pub fn fallback(&self) -> Variant {
        self.fallback
    }

    /// Routes every record; usable on records other than those fitted on.
    pub fn apply(
        &self,
        triples: &[VariantScoreTriple],
        categories: &[CategorySet],
    ) -> Result<Vec<EnsembleDecision>> {
        check_aligned(triples, categories)?;
        Ok(triples
            .iter()
            .zip(categories)
            .map(|(t, cs)| {
                let v = self.route(cs);
                EnsembleDecision {
                    record_id: t.record_id.clone(),
                    chosen_variant: v,
                    chosen_score: t.score(v),
                    policy: Policy::CategoryRoute,
                }
            })
            .collect())
    }

    /// The `{category: variant}` map, every category present.
    pub fn as_map(&self) -> BTreeMap<String, Variant> {
        QuestionCategory::ALL
            .into_iter()
            .map(|c| (c.as_str().to_string(), self.variant_for(c)))
            .collect()
    }
}

impl PartialEq for RoutingTable {
    fn eq(&self, other: &Self) -> bool {
        self.as_map() == other.as_map()
    }
}

impl Eq for RoutingTable {}

impl Serialize for RoutingTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RoutingTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, Variant>::deserialize(d)?;
        let mut routes = BTreeMap::new();
        for (k, v) in raw {
            let cat = k.parse::<QuestionCategory>().map_err(serde::de::Error::custom)?;
            routes.insert(cat, v);
        }
        let fallback = routes
            .get(&QuestionCategory::Other)
            .copied()
            .unwrap_or(Variant::Org);
        Ok(Self { routes, fallback })
    }
}

/// Fits a routing table on `triples` and applies it to the same records.
pub fn category_route(
    triples: &[VariantScoreTriple],
    categories: &[CategorySet],
) -> Result<(RoutingTable, Vec<EnsembleDecision>)> {
    let table = RoutingTable::fit(triples, categories)?;
    let decisions = table.apply(triples, categories)?;
    Ok((table, decisions))
}

fn mean_score<'a>(ts: impl Iterator<Item = &'a VariantScoreTriple>, v: Variant) -> f64 {
    let (sum, n) = ts.fold((0.0, 0usize), |(s, n), t| (s + t.score(v), n + 1));
    sum / n as f64
}

fn check_aligned(triples: &[VariantScoreTriple], categories: &[CategorySet]) -> Result<()> {
    if triples.len() != categories.len() {
        return Err(Error::invalid(format!(
            "{} score triples but {} category sets",
            triples.len(),
            categories.len()
        )));
    }
    Ok(())
}

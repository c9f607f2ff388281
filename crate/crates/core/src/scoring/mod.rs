//! Sentence-level NLI contradiction scoring.
//!
//! For each sentence `r_i` of an answer and each premise `S^n`, the NLI model
//! reads `premise = S^n`, `hypothesis = r_i`. The contradiction probability
//! is a softmax over the entailment and contradiction logits only:
//!
//! ```text
//! P(contradict | r_i, S^n) = exp(z_c) / (exp(z_e) + exp(z_c))
//! ```
//!
//! A sentence scores the mean of that probability over all premises, and a
//! response scores the mean over its sentences. Scores near 1 indicate
//! hallucination, scores near 0 agreement.

mod sentences;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use sentences::split_sentences;

use crate::error::{Error, Result};
use crate::imaging::Variant;
use crate::nli::{NliClient, NliLogits, NliPair};

/// Contradiction probability from raw logits. The neutral logit is ignored.
pub fn contradiction_probability(logits: &NliLogits) -> Result<f64> {
    let (e, c) = (logits.entail, logits.contra);
    if !e.is_finite() || !c.is_finite() {
        return Err(Error::invalid(format!("non-finite NLI logits {logits:?}")));
    }
    let m = e.max(c);
    let (pe, pc) = ((e - m).exp(), (c - m).exp());
    Ok(pc / (pe + pc))
}

/// Where the premises of a scored answer come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseMode {
    /// The record's reference answer is the single premise.
    #[default]
    Reference,
    /// Independently sampled responses are the premises.
    SelfSamples,
}

impl fmt::Display for PremiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PremiseMode::Reference => "reference",
            PremiseMode::SelfSamples => "self",
        })
    }
}

impl FromStr for PremiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(PremiseMode::Reference),
            "self" | "self_samples" => Ok(PremiseMode::SelfSamples),
            _ => Err(Error::invalid(format!("unknown premise mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence_index: usize,
    pub sentence: String,
    /// One contradiction probability per premise, in premise order.
    pub per_premise: Vec<f64>,
    pub s_nli: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub record_id: String,
    pub variant: Variant,
    pub sentence_scores: Vec<SentenceScore>,
    pub response_nli: f64,
    pub premise_mode: PremiseMode,
}

/// Scores one answer against `premises`.
///
/// All `(premise, sentence)` pairs go to the NLI client in a single batch,
/// sentence-major, so the aggregation order never depends on scheduling.
pub fn score_response(
    record_id: &str,
    variant: Variant,
    answer: &str,
    premises: &[String],
    premise_mode: PremiseMode,
    nli: &dyn NliClient,
) -> Result<ResponseScore> {
    if answer.trim().is_empty() {
        return Err(Error::EmptyInput("answer is empty".into()));
    }
    if premises.is_empty() {
        return Err(Error::invalid("at least one premise is required"));
    }
    let sentences = split_sentences(answer)?;
    let pairs: Vec<NliPair> = sentences
        .iter()
        .flat_map(|s| premises.iter().map(move |p| NliPair::new(p.as_str(), s.as_str())))
        .collect();
    let logits = nli.logits(&pairs)?;
    if logits.len() != pairs.len() {
        return Err(Error::invalid(format!(
            "NLI client returned {} results for {} pairs",
            logits.len(),
            pairs.len()
        )));
    }
    let probs = logits
        .iter()
        .map(contradiction_probability)
        .collect::<Result<Vec<_>>>()?;

    let sentence_scores: Vec<SentenceScore> = sentences
        .into_iter()
        .zip(probs.chunks(premises.len()))
        .enumerate()
        .map(|(i, (sentence, per_premise))| SentenceScore {
            sentence_index: i,
            sentence,
            s_nli: mean(per_premise),
            per_premise: per_premise.to_vec(),
        })
        .collect();
    let response_nli = mean(&sentence_scores.iter().map(|s| s.s_nli).collect::<Vec<_>>());
    Ok(ResponseScore {
        record_id: record_id.to_string(),
        variant,
        sentence_scores,
        response_nli,
        premise_mode,
    })
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

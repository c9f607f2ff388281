use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::imaging::Variant;

/// Progress of one (record, variant) pair. Ordered: a later stage implies the earlier ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pending,
    VariantBuilt,
    Generated,
    Scored,
}

/// Stage markers for every (record, variant) pair touched by a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunState {
    markers: BTreeMap<String, BTreeMap<Variant, Stage>>,
}

impl RunState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&self, record_id: &str, variant: Variant) -> Stage {
        self.markers
            .get(record_id)
            .and_then(|m| m.get(&variant))
            .copied()
            .unwrap_or(Stage::Pending)
    }

    /// Records progress. Markers never move backwards.
    pub fn advance(&mut self, record_id: &str, variant: Variant, stage: Stage) {
        let slot = self
            .markers
            .entry(record_id.to_string())
            .or_default()
            .entry(variant)
            .or_insert(Stage::Pending);
        *slot = (*slot).max(stage);
    }

    pub fn merge(&mut self, other: &RunState) {
        for (id, m) in &other.markers {
            for (v, s) in m {
                self.advance(id, *v, *s);
            }
        }
    }

    pub fn count_at_least(&self, stage: Stage) -> usize {
        self.markers
            .values()
            .flat_map(|m| m.values())
            .filter(|s| **s >= stage)
            .count()
    }
}

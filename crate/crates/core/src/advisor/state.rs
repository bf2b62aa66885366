use serde::{Deserialize, Serialize};

use super::{CandidateIndex, IndexConfiguration, Recommendation};

pub const CSV_HEADER: [&str; 12] = [
    "cycle",
    "queries",
    "emerged",
    "declined",
    "retained",
    "candidates",
    "selected",
    "total_index_bytes",
    "baseline_cost_pages",
    "recommended_cost_pages",
    "selection_ms",
    "update_ms",
];

/// One evaluation row per advisory cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleRecord {
    pub cycle: u64,
    pub queries: usize,
    pub emerged: usize,
    pub declined: usize,
    pub retained: usize,
    pub candidates: usize,
    pub selected: usize,
    pub total_index_bytes: u64,
    pub baseline_cost_pages: f64,
    pub recommended_cost_pages: f64,
    pub selection_ms: f64,
    pub update_ms: f64,
}

impl CycleRecord {
    pub fn from_recommendation(r: &Recommendation) -> Self {
        Self {
            cycle: r.cycle,
            queries: r.queries,
            emerged: r.emerged.len(),
            declined: r.declined.len(),
            retained: r.retained.len(),
            candidates: r.candidates.len(),
            selected: r.selected.len(),
            total_index_bytes: r.selected.total_size,
            baseline_cost_pages: r.baseline_cost_pages,
            recommended_cost_pages: r.recommended_cost_pages,
            selection_ms: r.timings_ms.selection,
            update_ms: r.timings_ms.update(),
        }
    }
}

/// The current index configuration and the per-cycle history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvisorState {
    /// Knowledge-base version this configuration was derived from.
    pub kb_version: u64,
    pub configuration: IndexConfiguration,
    pub history: Vec<CycleRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    kb_version: u64,
    indexes: Vec<CandidateIndex>,
    total_size: u64,
    history: Vec<CycleRecord>,
}

impl AdvisorState {
    pub fn next_cycle(&self) -> u64 {
        self.history.last().map_or(1, |r| r.cycle + 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StateFile {
            kb_version: self.kb_version,
            indexes: self.configuration.indexes.clone(),
            total_size: self.configuration.total_size,
            history: self.history.clone(),
        })
        .expect("state serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: StateFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let configuration = IndexConfiguration::new(file.indexes.iter().cloned());
        if configuration.indexes != file.indexes {
            return Err("indexes must be distinct and sorted by itemset".into());
        }
        if configuration.total_size != file.total_size {
            return Err(format!(
                "total_size {} does not match the index sizes ({})",
                file.total_size, configuration.total_size
            ));
        }
        if file.history.windows(2).any(|w| w[0].cycle >= w[1].cycle) {
            return Err("history cycles must be strictly increasing".into());
        }
        Ok(Self { kb_version: file.kb_version, configuration, history: file.history })
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{schema, set};
    use super::*;
    use crate::costmodel::CostParameters;

    fn state() -> AdvisorState {
        let s = schema();
        let p = CostParameters::default();
        AdvisorState {
            kb_version: 3,
            configuration: IndexConfiguration::new([
                CandidateIndex::new(set(&["customer.city"]), &s, &p),
                CandidateIndex::new(set(&["customer.segment", "product.brand"]), &s, &p),
            ]),
            history: vec![CycleRecord {
                cycle: 1,
                queries: 30,
                emerged: 2,
                declined: 0,
                retained: 0,
                candidates: 2,
                selected: 2,
                total_index_bytes: 1_125_000,
                baseline_cost_pages: 37_380.0,
                recommended_cost_pages: 0.1 + 0.2,
                selection_ms: 1.0 / 3.0,
                update_ms: 2.5,
            }],
        }
    }

    #[test]
    fn round_trip() {
        let s = state();
        assert_eq!(AdvisorState::from_json(&s.to_json()).unwrap(), s);
        assert_eq!(s.next_cycle(), 2);
        assert_eq!(AdvisorState::default().next_cycle(), 1);
    }

    #[test]
    fn inconsistent_totals_are_rejected() {
        let text = state().to_json().replace("\"total_size\": 1125000", "\"total_size\": 7");
        assert!(AdvisorState::from_json(&text).unwrap_err().contains("total_size"));
    }
}

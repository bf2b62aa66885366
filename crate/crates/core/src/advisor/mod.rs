//! Candidate generation, budgeted greedy selection, configuration diffs and DDL.

mod cycle;
mod ddl;
mod select;
mod state;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costmodel::{index_size, AttrSet, CostParameters};
use crate::schema::StarSchema;

pub use cycle::{run_cycle, run_cycle_at, CycleError, CycleResult, NamedItemset, Recommendation, StepTimings};
pub use ddl::emit_ddl;
pub use select::{select_configuration, select_configuration_traced, CostMatrix, Selection};
pub use state::{AdvisorState, CycleRecord, CSV_HEADER};

const MAX_NAME_LEN: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateIndex {
    pub name: String,
    pub itemset: AttrSet,
    pub size: u64,
    pub feasible: bool,
}

impl CandidateIndex {
    pub fn new(itemset: AttrSet, schema: &StarSchema, params: &CostParameters) -> Self {
        let name = index_name(&itemset, schema);
        match index_size(&itemset, schema, params) {
            Ok(size) => Self { name, itemset, size, feasible: true },
            Err(e) => {
                log::debug!("candidate {name} discarded: {e}");
                Self { name, itemset, size: 0, feasible: false }
            }
        }
    }
}

/// `bji_<fact>_<table>_<attr>_...`, shortened to 30 characters with a hash suffix.
pub fn index_name(itemset: &AttrSet, schema: &StarSchema) -> String {
    let fragments: Vec<String> = itemset.iter().map(|a| format!("{}_{}", a.table, a.attribute)).collect();
    let full = format!("bji_{}_{}", schema.fact.name, fragments.join("_")).to_ascii_lowercase();
    if full.len() <= MAX_NAME_LEN {
        return full;
    }
    let digest = Sha256::digest(full.as_bytes());
    let hash: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    let keep = full.char_indices().nth(MAX_NAME_LEN - hash.len()).map_or(full.len(), |(i, _)| i);
    format!("{}{hash}", &full[..keep])
}

/// A set of indexes keyed by itemset, kept sorted by itemset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfiguration {
    pub indexes: Vec<CandidateIndex>,
    pub total_size: u64,
}

impl IndexConfiguration {
    pub fn new(indexes: impl IntoIterator<Item = CandidateIndex>) -> Self {
        let mut indexes: Vec<CandidateIndex> = indexes.into_iter().collect();
        indexes.sort_by(|a, b| a.itemset.cmp(&b.itemset));
        indexes.dedup_by(|a, b| a.itemset == b.itemset);
        let total_size = indexes.iter().map(|i| i.size).sum();
        Self { indexes, total_size }
    }

    pub fn itemsets(&self) -> Vec<AttrSet> {
        self.indexes.iter().map(|i| i.itemset.clone()).collect()
    }

    pub fn contains(&self, itemset: &AttrSet) -> bool {
        self.indexes.binary_search_by(|i| i.itemset.cmp(itemset)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes.is_empty()
    }

    /// `(self − to_drop) ∪ to_create`.
    pub fn apply(&self, diff: &ConfigurationDiff) -> Self {
        let dropped: BTreeSet<&AttrSet> = diff.to_drop.iter().map(|i| &i.itemset).collect();
        Self::new(self.indexes.iter().filter(|i| !dropped.contains(&i.itemset)).chain(&diff.to_create).cloned())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationDiff {
    pub to_create: Vec<CandidateIndex>,
    pub to_drop: Vec<CandidateIndex>,
}

impl ConfigurationDiff {
    pub fn is_empty(&self) -> bool {
        self.to_create.is_empty() && self.to_drop.is_empty()
    }
}

/// `(current ∪ emerged) − declined`, materialized with names and sizes.
pub fn generate_candidates(
    emerged: &[AttrSet],
    declined: &[AttrSet],
    current: &IndexConfiguration,
    schema: &StarSchema,
    params: &CostParameters,
) -> Vec<CandidateIndex> {
    let declined: BTreeSet<&AttrSet> = declined.iter().collect();
    let mut itemsets: BTreeSet<&AttrSet> = current.indexes.iter().map(|i| &i.itemset).collect();
    itemsets.extend(emerged.iter().filter(|s| !s.is_empty()));
    itemsets
        .into_iter()
        .filter(|s| !declined.contains(s))
        .map(|s| {
            current
                .indexes
                .iter()
                .find(|i| &i.itemset == s)
                .filter(|i| i.name == index_name(s, schema))
                .cloned()
                .unwrap_or_else(|| CandidateIndex::new(s.clone(), schema, params))
        })
        .collect()
}

pub fn diff_configurations(current: &IndexConfiguration, next: &IndexConfiguration) -> ConfigurationDiff {
    let mut to_create: Vec<CandidateIndex> =
        next.indexes.iter().filter(|i| !current.contains(&i.itemset)).cloned().collect();
    let mut to_drop: Vec<CandidateIndex> =
        current.indexes.iter().filter(|i| !next.contains(&i.itemset)).cloned().collect();
    to_create.sort_by(|a, b| a.name.cmp(&b.name));
    to_drop.sort_by(|a, b| a.name.cmp(&b.name));
    ConfigurationDiff { to_create, to_drop }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use std::collections::BTreeMap;

    use crate::schema::{AttrRef, AttributeStats, JoinTarget, StarSchema, TableStats};

    fn attrs(list: &[(&str, u64)]) -> Vec<AttributeStats> {
        list.iter().map(|(n, dv)| AttributeStats { name: (*n).into(), distinct_values: *dv }).collect()
    }

    /// sales(100000 rows) joined to customer and product.
    pub fn schema() -> StarSchema {
        StarSchema {
            fact: TableStats {
                name: "sales".into(),
                row_count: 100_000,
                row_width: 100,
                attributes: attrs(&[("cust_id", 1000), ("prod_id", 500), ("amount", 5000)]),
                primary_key: None,
            },
            dimensions: vec![
                TableStats {
                    name: "customer".into(),
                    row_count: 1000,
                    row_width: 200,
                    attributes: attrs(&[("id", 1000), ("name", 1000), ("city", 10), ("segment", 4)]),
                    primary_key: Some("id".into()),
                },
                TableStats {
                    name: "product".into(),
                    row_count: 500,
                    row_width: 120,
                    attributes: attrs(&[("id", 500), ("sku", 500), ("brand", 20), ("category", 8)]),
                    primary_key: Some("id".into()),
                },
            ],
            join_keys: BTreeMap::from([
                ("cust_id".into(), JoinTarget { dimension: "customer".into(), primary_key: "id".into() }),
                ("prod_id".into(), JoinTarget { dimension: "product".into(), primary_key: "id".into() }),
            ]),
            page_size: 8192,
        }
    }

    pub fn a(s: &str) -> AttrRef {
        s.parse().unwrap()
    }

    pub fn set(list: &[&str]) -> crate::costmodel::AttrSet {
        list.iter().map(|s| a(s)).collect()
    }
}

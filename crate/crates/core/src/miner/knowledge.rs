//! Persistent mining state reused across advisory cycles.

use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::genmax::{mine_at, mine_covered, mine_uncovered};
use super::{classify, Itemset, MiningOutcome, MiningParameters};
use crate::context::{apply_delta, ContextError, DeltaBatch, ItemDictionary, ItemId, Transaction, TransactionDatabase};
use crate::schema::AttrRef;
use crate::workload::AnalyticalQuery;

#[derive(Debug, Error)]
pub enum KnowledgeBaseError {
    #[error("malformed knowledge base: {0}")]
    Json(#[from] serde_json::Error),
    #[error("knowledge base invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub parameters: MiningParameters,
    /// The current transaction database D, including its item dictionary.
    pub database: TransactionDatabase,
    /// Maximal frequent itemsets of `database`, sorted.
    pub maximal: Vec<Itemset>,
    pub version: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl KnowledgeBase {
    pub fn new(parameters: MiningParameters) -> Self {
        let now = now();
        Self {
            parameters,
            database: TransactionDatabase::default(),
            maximal: Vec::new(),
            version: 0,
            created_at: now,
            updated_at: now,
        }
    }

    pub fn dictionary(&self) -> &ItemDictionary {
        self.database.dictionary()
    }

    pub fn transaction_weight(&self) -> u64 {
        self.database.total_weight()
    }

    pub fn threshold(&self) -> u64 {
        self.parameters.absolute_threshold(self.transaction_weight())
    }

    /// Equality ignoring version and timestamps.
    pub fn same_content(&self, other: &Self) -> bool {
        self.parameters == other.parameters
            && self.database == other.database
            && self
                .maximal
                .iter()
                .map(|m| (&m.items, m.support))
                .eq(other.maximal.iter().map(|m| (&m.items, m.support)))
    }

    pub fn validate(&self) -> Result<(), KnowledgeBaseError> {
        let invariant = |m: String| Err(KnowledgeBaseError::Invariant(m));
        let threshold = self.threshold();
        let n_items = self.dictionary().len();
        for m in &self.maximal {
            if m.items.is_empty() {
                return invariant("maximal itemset is empty".into());
            }
            if !m.items.windows(2).all(|w| w[0] < w[1]) {
                return invariant(format!("maximal itemset {m} is not sorted and duplicate-free"));
            }
            if let Some(i) = m.items.iter().find(|&&i| i as usize >= n_items) {
                return invariant(format!("maximal itemset {m} references unknown item {i}"));
            }
            let actual = self.database.support(&m.items)?;
            if actual != m.support {
                return invariant(format!(
                    "maximal itemset {m} records support {} but the database gives {actual}",
                    m.support
                ));
            }
            if m.support < threshold {
                return invariant(format!("maximal itemset {m} is below the support threshold {threshold}"));
            }
        }
        for (a, x) in self.maximal.iter().enumerate() {
            for (b, y) in self.maximal.iter().enumerate() {
                if a != b && x.is_subset_of(y) {
                    return invariant(format!("antichain: maximal itemset {x} is a subset of {y}"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&KnowledgeBaseFile::from_kb(self))
            .expect("knowledge base serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, KnowledgeBaseError> {
        let file: KnowledgeBaseFile = serde_json::from_str(text)?;
        let kb = file.into_kb()?;
        kb.validate()?;
        Ok(kb)
    }
}

fn now() -> DateTime<Utc> {
    // Whole seconds keep the serialized form round-trip exact.
    DateTime::from_timestamp(Utc::now().timestamp(), 0).expect("current time is representable")
}

/// Applies a delta and re-mines, reusing the stored maximal itemsets.
///
/// The outcome is classified against the old maximal set only; callers that
/// track an index configuration run [`classify`] with it instead.
pub fn mine_incremental(
    kb: &KnowledgeBase,
    delta: &DeltaBatch,
) -> Result<(MiningOutcome, KnowledgeBase), ContextError> {
    let next = kb.advance(apply_delta(&kb.database, delta)?, delta);
    Ok((classify(&kb.maximal, &next.maximal, &[]), next))
}

impl KnowledgeBase {
    /// Re-mines `database`, the result of applying `delta` to this knowledge base's database.
    ///
    /// An itemset infrequent before the update lies inside no old maximal
    /// itemset, and it can only become frequent if the added rows give it
    /// support `θ' − θ + 1`, where θ and θ' are the old and new absolute
    /// thresholds. Old maximal itemsets are recounted, and new ones are
    /// searched for only among itemsets meeting both conditions. When the
    /// threshold drops this bound vanishes and the full search runs instead.
    /// Both paths rely on `maximal` being the complete maximal set of the
    /// stored database.
    pub fn advance(&self, database: TransactionDatabase, delta: &DeltaBatch) -> KnowledgeBase {
        self.advance_at(self.parameters, database, delta)
    }

    /// As [`KnowledgeBase::advance`], switching to new mining parameters.
    pub fn advance_at(
        &self,
        parameters: MiningParameters,
        database: TransactionDatabase,
        delta: &DeltaBatch,
    ) -> KnowledgeBase {
        let threshold = parameters.absolute_threshold(database.total_weight());
        let old_threshold = self.threshold();
        let removed = self.database.transactions().iter().filter(|t| delta.removed_ids.contains(&t.id)).count();
        let tail_from = database.len().saturating_sub(delta.added.len());
        let appended = delta.added.len() <= database.len()
            && database.transactions()[tail_from..].iter().zip(&delta.added).all(|(t, r)| t.id == r.id);
        let use_cover = appended
            && parameters == self.parameters
            && !self.database.is_empty()
            && threshold >= old_threshold
            && 2 * (delta.added.len() + removed) < database.len();

        let maximal = if use_cover {
            let mut still = Vec::new();
            let mut lost = Vec::new();
            for m in &self.maximal {
                let support = if removed == 0 {
                    m.support + database.vertical().support_from(&m.items, tail_from)
                } else {
                    database.support(&m.items).expect("old items keep their ids")
                };
                if support >= threshold {
                    still.push(Itemset::new(m.items.clone(), support));
                } else {
                    lost.push(m.items.clone());
                }
            }
            let old: Vec<Vec<ItemId>> = self.maximal.iter().map(|m| m.items.clone()).collect();
            let growth = threshold + 1 - old_threshold;
            let fresh = mine_uncovered(&database, threshold, (tail_from, growth), &old);
            mine_covered(&database, threshold, &still, &fresh, &lost)
        } else {
            mine_at(&database, threshold, &self.maximal)
        };
        KnowledgeBase {
            parameters,
            database,
            maximal,
            version: self.version + 1,
            created_at: self.created_at,
            updated_at: now(),
        }
    }
}

// On-disk layout.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeBaseFile {
    version: u64,
    minsup: f64,
    dictionary: Vec<AttrRef>,
    transactions: Vec<TransactionFile>,
    maximal: Vec<MaximalFile>,
    created_at: String,
    updated_at: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransactionFile {
    id: String,
    items: Vec<ItemId>,
    weight: u64,
    #[serde(default)]
    cycle: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    query: Option<AnalyticalQuery>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaximalFile {
    items: Vec<ItemId>,
    support: u64,
}

impl KnowledgeBaseFile {
    fn from_kb(kb: &KnowledgeBase) -> Self {
        Self {
            version: kb.version,
            minsup: kb.parameters.minsup_f64(),
            dictionary: kb.dictionary().attrs().to_vec(),
            transactions: kb
                .database
                .transactions()
                .iter()
                .map(|t| TransactionFile {
                    id: t.id.clone(),
                    items: t.items.clone(),
                    weight: t.weight,
                    cycle: t.cycle,
                    query: t.query.as_deref().cloned(),
                })
                .collect(),
            maximal: kb.maximal.iter().map(|m| MaximalFile { items: m.items.clone(), support: m.support }).collect(),
            created_at: kb.created_at.to_rfc3339_opts(SecondsFormat::Secs, true),
            updated_at: kb.updated_at.to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    fn into_kb(self) -> Result<KnowledgeBase, KnowledgeBaseError> {
        let invariant = |m: String| KnowledgeBaseError::Invariant(m);
        let parameters = MiningParameters::new(self.minsup).map_err(|e| invariant(e.to_string()))?;
        let dictionary = ItemDictionary::from_attrs(self.dictionary)?;
        let mut transactions = Vec::with_capacity(self.transactions.len());
        for t in self.transactions {
            if t.weight == 0 {
                return Err(invariant(format!("transaction `{}` has zero weight", t.id)));
            }
            if !t.items.windows(2).all(|w| w[0] < w[1]) {
                return Err(invariant(format!("transaction `{}` items are not sorted and duplicate-free", t.id)));
            }
            transactions.push(Transaction {
                id: t.id,
                items: t.items,
                weight: t.weight,
                cycle: t.cycle,
                query: t.query.map(Arc::new),
            });
        }
        let database = TransactionDatabase::from_parts(dictionary, transactions)?;
        let parse_time = |s: &str| {
            DateTime::parse_from_rfc3339(s)
                .map(|d| d.with_timezone(&Utc))
                .map_err(|e| invariant(format!("bad timestamp `{s}`: {e}")))
        };
        let maximal: Vec<Itemset> =
            self.maximal.into_iter().map(|m| Itemset { items: m.items, support: m.support }).collect();
        let mut sorted = maximal.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invariant("antichain: duplicate maximal itemset".into()));
        }
        Ok(KnowledgeBase {
            parameters,
            database,
            maximal: sorted,
            version: self.version,
            created_at: parse_time(&self.created_at)?,
            updated_at: parse_time(&self.updated_at)?,
        })
    }
}

//! Maximal frequent itemset mining over the extraction context.
//!
//! [`mine_maximal`] is a depth-first backtracking miner in the GenMax style;
//! [`brute_force_maximal`] is an exhaustive oracle with the same contract;
//! [`mine_incremental`] reuses a [`KnowledgeBase`] across workload deltas and
//! [`classify`] splits the result into emerged, declined and retained sets.

mod genmax;
mod knowledge;
mod oracle;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ItemId;

pub use genmax::{mine_maximal, mine_maximal_seeded};
pub use knowledge::{mine_incremental, KnowledgeBase, KnowledgeBaseError};
pub use oracle::{brute_force_maximal, brute_force_maximal_with_limit, OracleError, DEFAULT_ORACLE_LIMIT};

/// A sorted set of item ids with its support, compared by items only.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct Itemset {
    pub items: Vec<ItemId>,
    pub support: u64,
}

impl Itemset {
    pub fn new(mut items: Vec<ItemId>, support: u64) -> Self {
        items.sort_unstable();
        items.dedup();
        Self { items, support }
    }

    /// `self ⊆ other`, both sorted.
    pub fn is_subset_of(&self, other: &Itemset) -> bool {
        is_sorted_subset(&self.items, &other.items)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

impl PartialEq for Itemset {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Hash for Itemset {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.items.hash(state);
    }
}

impl PartialOrd for Itemset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Itemset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.items.cmp(&other.items)
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.items.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}:{}", self.support)
    }
}

pub(crate) fn is_sorted_subset(small: &[ItemId], big: &[ItemId]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("minimum support must lie in (0, 1], got {0}")]
pub struct InvalidMinsup(pub String);

/// Relative minimum support, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningParameters {
    minsup: Ratio<u64>,
}

impl MiningParameters {
    pub fn from_ratio(numerator: u64, denominator: u64) -> Result<Self, InvalidMinsup> {
        if denominator == 0 || numerator == 0 || numerator > denominator {
            return Err(InvalidMinsup(format!("{numerator}/{denominator}")));
        }
        Ok(Self { minsup: Ratio::new(numerator, denominator) })
    }

    /// Converts a decimal such as `0.05` to the simplest fraction within 1e-12.
    pub fn new(minsup: f64) -> Result<Self, InvalidMinsup> {
        if !(minsup > 0.0 && minsup <= 1.0) {
            return Err(InvalidMinsup(minsup.to_string()));
        }
        let r = Ratio::<i64>::approximate_float(minsup)
            .filter(|r| (r.numer().to_owned() as f64 / r.denom().to_owned() as f64 - minsup).abs() < 1e-12)
            .ok_or_else(|| InvalidMinsup(minsup.to_string()))?;
        Self::from_ratio(*r.numer() as u64, *r.denom() as u64)
    }

    pub fn minsup(&self) -> Ratio<u64> {
        self.minsup
    }

    pub fn minsup_f64(&self) -> f64 {
        *self.minsup.numer() as f64 / *self.minsup.denom() as f64
    }

    /// `max(1, ceil(minsup × total_weight))`.
    pub fn absolute_threshold(&self, total_weight: u64) -> u64 {
        let num = u128::from(*self.minsup.numer()) * u128::from(total_weight);
        let t = num.div_ceil(u128::from(*self.minsup.denom()));
        u64::try_from(t).unwrap_or(u64::MAX).max(1)
    }
}

/// Emerged (I⁺), declined (I⁻) and retained (I⁰) itemsets of one update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MiningOutcome {
    pub emerged: Vec<Itemset>,
    pub declined: Vec<Itemset>,
    pub retained: Vec<Itemset>,
    pub new_maximal: Vec<Itemset>,
}

/// Frequency is tested as "subset of some maximal itemset", so neither
/// database is consulted.
pub fn classify(old_maximal: &[Itemset], new_maximal: &[Itemset], current_index_itemsets: &[Itemset]) -> MiningOutcome {
    let old_cover = Cover::new(old_maximal);
    let new_cover = Cover::new(new_maximal);
    let mut emerged = Vec::new();
    let mut retained = Vec::new();
    for m in new_maximal {
        if old_cover.covers(m) {
            retained.push(m.clone());
        } else {
            emerged.push(m.clone());
        }
    }
    let mut declined: Vec<Itemset> =
        old_maximal.iter().chain(current_index_itemsets).filter(|x| !new_cover.covers(x)).cloned().collect();
    declined.sort();
    declined.dedup();
    emerged.sort();
    retained.sort();
    let mut new_maximal = new_maximal.to_vec();
    new_maximal.sort();
    MiningOutcome { emerged, declined, retained, new_maximal }
}

/// Superset lookups over a family of itemsets through per-item postings.
struct Cover<'a> {
    sets: &'a [Itemset],
    exact: HashSet<&'a [ItemId]>,
    postings: HashMap<ItemId, Vec<usize>>,
}

impl<'a> Cover<'a> {
    fn new(sets: &'a [Itemset]) -> Self {
        let mut postings: HashMap<ItemId, Vec<usize>> = HashMap::new();
        for (n, s) in sets.iter().enumerate() {
            for &i in &s.items {
                postings.entry(i).or_default().push(n);
            }
        }
        Self { sets, exact: sets.iter().map(|s| s.items.as_slice()).collect(), postings }
    }

    /// Whether `x` is a subset of some member.
    fn covers(&self, x: &Itemset) -> bool {
        if self.exact.contains(x.items.as_slice()) {
            return true;
        }
        let mut shortest: Option<&Vec<usize>> = None;
        for i in &x.items {
            match self.postings.get(i) {
                None => return false,
                Some(p) if shortest.is_none_or(|s| p.len() < s.len()) => shortest = Some(p),
                Some(_) => {}
            }
        }
        match shortest {
            None => !self.sets.is_empty(),
            Some(p) => p.iter().any(|&n| x.is_subset_of(&self.sets[n])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[ItemId]) -> Itemset {
        Itemset::new(items.to_vec(), 0)
    }

    #[test]
    fn threshold_is_exact() {
        let p = MiningParameters::new(0.1).unwrap();
        assert_eq!(p.minsup(), Ratio::new(1, 10));
        assert_eq!(p.absolute_threshold(30), 3);
        let p = MiningParameters::new(0.05).unwrap();
        assert_eq!(p.absolute_threshold(30), 2);
        assert_eq!(p.absolute_threshold(0), 1);
        assert_eq!(MiningParameters::new(0.4).unwrap().absolute_threshold(5), 2);
        assert_eq!(MiningParameters::new(1.0).unwrap().absolute_threshold(7), 7);
        assert!(MiningParameters::new(0.0).is_err());
        assert!(MiningParameters::new(1.5).is_err());
        assert!(MiningParameters::new(f64::NAN).is_err());
    }

    #[test]
    fn classify_superseded_index_is_not_declined() {
        let (a, b, c) = (0, 1, 2);
        let out = classify(&[set(&[a, b]), set(&[a, c]), set(&[b, c])], &[set(&[a, b, c])], &[set(&[a, b])]);
        assert_eq!(out.emerged, vec![set(&[a, b, c])]);
        assert!(out.retained.is_empty());
        assert!(out.declined.is_empty());
    }

    #[test]
    fn classify_no_change() {
        let out = classify(&[set(&[0, 1])], &[set(&[0, 1])], &[]);
        assert!(out.emerged.is_empty());
        assert_eq!(out.retained, vec![set(&[0, 1])]);
        assert!(out.declined.is_empty());
    }

    #[test]
    fn classify_vanished_itemset() {
        let out = classify(&[set(&[0, 1]), set(&[2, 3])], &[set(&[0, 1])], &[set(&[2, 3])]);
        assert_eq!(out.declined, vec![set(&[2, 3])]);
    }
}

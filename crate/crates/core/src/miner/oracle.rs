//! Exhaustive maximal-itemset enumeration, used to check the miner.
//!
//! Supports are counted by scanning the horizontal rows; nothing here goes
//! through the vertical index.

use thiserror::Error;

use super::{Itemset, MiningParameters};
use crate::context::{ItemId, TransactionDatabase};

pub const DEFAULT_ORACLE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("item universe of {items} exceeds the enumeration limit of {limit}")]
pub struct OracleError {
    pub items: usize,
    pub limit: usize,
}

pub fn brute_force_maximal(
    database: &TransactionDatabase,
    parameters: &MiningParameters,
) -> Result<Vec<Itemset>, OracleError> {
    brute_force_maximal_with_limit(database, parameters, DEFAULT_ORACLE_LIMIT)
}

pub fn brute_force_maximal_with_limit(
    database: &TransactionDatabase,
    parameters: &MiningParameters,
    limit: usize,
) -> Result<Vec<Itemset>, OracleError> {
    let n = database.dictionary().len();
    if n > limit || n > 30 {
        return Err(OracleError { items: n, limit });
    }
    let threshold = parameters.absolute_threshold(database.total_weight());
    let rows: Vec<(u32, u64)> =
        database.transactions().iter().map(|t| (t.items.iter().fold(0u32, |m, &i| m | (1 << i)), t.weight)).collect();

    let universe = 1u32 << n;
    let support: Vec<u64> =
        (0..universe).map(|s| rows.iter().filter(|(t, _)| s & t == s).map(|(_, w)| w).sum()).collect();
    let frequent = |s: u32| support[s as usize] >= threshold;

    let mut out = Vec::new();
    for s in 1..universe {
        if !frequent(s) {
            continue;
        }
        let extendable = (0..n).any(|i| s & (1 << i) == 0 && frequent(s | (1 << i)));
        if !extendable {
            let items = (0..n as ItemId).filter(|i| s & (1 << i) != 0).collect();
            out.push(Itemset::new(items, support[s as usize]));
        }
    }
    out.sort();
    Ok(out)
}

//! Storage, access and maintenance estimates for bitmap join indexes, in pages.
//!
//! Uniform value distributions and independent predicates are assumed.
//! Page touches use Cardenas' formula. A multi-attribute index keeps one
//! bitmap per distinct value combination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{page_count, AttrRef, StarSchema};
use crate::workload::{extract_indexable, AnalyticalQuery, PredicateKind};

pub type AttrSet = BTreeSet<AttrRef>;

pub const DEFAULT_BITMAP_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("index on {attrs} needs {bitmaps} bitmaps, above the limit of {limit}")]
    Infeasible { attrs: String, bitmaps: u128, limit: u64 },
    #[error("`{0}` is not a dimension attribute")]
    UnknownAttribute(AttrRef),
    #[error("index on {attrs} is not usable by query `{query}`")]
    NotUsable { attrs: String, query: String },
    #[error("invalid cost parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParameters {
    pub maintenance_coefficient: f64,
    pub between_fraction: f64,
    pub bitmap_limit: u64,
}

impl Default for CostParameters {
    fn default() -> Self {
        Self { maintenance_coefficient: 0.1, between_fraction: 0.1, bitmap_limit: DEFAULT_BITMAP_LIMIT }
    }
}

impl CostParameters {
    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |m: String| Err(CostError::InvalidParameter(m));
        if !(self.maintenance_coefficient >= 0.0 && self.maintenance_coefficient.is_finite()) {
            return bad(format!("maintenance coefficient must be non-negative, got {}", self.maintenance_coefficient));
        }
        if !(self.between_fraction > 0.0 && self.between_fraction <= 1.0) {
            return bad(format!("between fraction must lie in (0, 1], got {}", self.between_fraction));
        }
        if self.bitmap_limit == 0 {
            return bad("bitmap limit must be positive".into());
        }
        Ok(())
    }

    fn between_ratio(&self) -> Ratio<u128> {
        Ratio::<i64>::approximate_float(self.between_fraction)
            .filter(|r| *r.numer() > 0 && r.numer() <= r.denom())
            .map(|r| Ratio::new(*r.numer() as u128, *r.denom() as u128))
            .unwrap_or_else(|| Ratio::new(1, 10))
    }
}

/// A page count estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostEstimate {
    pub pages: f64,
}

impl CostEstimate {
    pub const ZERO: Self = Self { pages: 0.0 };

    pub fn new(pages: f64) -> Self {
        Self { pages }
    }

    pub fn min(self, other: Self) -> Self {
        if other.pages < self.pages {
            other
        } else {
            self
        }
    }

    pub fn scaled(self, factor: u64) -> Self {
        Self { pages: self.pages * factor as f64 }
    }
}

impl Add for CostEstimate {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { pages: self.pages + rhs.pages }
    }
}

impl AddAssign for CostEstimate {
    fn add_assign(&mut self, rhs: Self) {
        self.pages += rhs.pages;
    }
}

impl Sum for CostEstimate {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl fmt::Display for CostEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} pages", self.pages)
    }
}

pub fn describe(attrs: &AttrSet) -> String {
    let names: Vec<String> = attrs.iter().map(ToString::to_string).collect();
    format!("{{{}}}", names.join(","))
}

fn bitmap_bytes(schema: &StarSchema) -> u128 {
    u128::from(schema.fact.row_count).div_ceil(8)
}

/// Bytes taken by a composite bitmap join index: one `|F|`-bit bitmap per value combination.
pub fn index_size(itemset: &AttrSet, schema: &StarSchema, params: &CostParameters) -> Result<u64, CostError> {
    let mut combinations: u128 = 1;
    for a in itemset {
        let stats = schema.dimension_attribute(a).ok_or_else(|| CostError::UnknownAttribute(a.clone()))?;
        combinations = combinations.saturating_mul(u128::from(stats.distinct_values));
    }
    let infeasible =
        || CostError::Infeasible { attrs: describe(itemset), bitmaps: combinations, limit: params.bitmap_limit };
    if combinations > u128::from(params.bitmap_limit) {
        return Err(infeasible());
    }
    u64::try_from(combinations * bitmap_bytes(schema)).map_err(|_| infeasible())
}

/// Expected distinct pages touched when fetching `k` random rows out of `m` pages.
pub fn cardenas_pages(m: u64, k: u64) -> f64 {
    match (m, k) {
        (0, _) | (_, 0) => 0.0,
        (_, 1) => 1.0,
        (1, _) => 1.0,
        _ => {
            let m = m as f64;
            -m * (k as f64 * (-1.0 / m).ln_1p()).exp_m1()
        }
    }
}

pub fn query_cost_unindexed(query: &AnalyticalQuery, schema: &StarSchema) -> CostEstimate {
    let dims: u64 = query.joined_dimensions.iter().filter_map(|d| schema.dimension(d)).map(|d| schema.pages(d)).sum();
    CostEstimate::new((schema.fact_pages() + dims) as f64)
}

pub fn is_usable(itemset: &AttrSet, query: &AnalyticalQuery) -> bool {
    !itemset.is_empty() && itemset.is_subset(&extract_indexable(query))
}

/// Per restricted attribute of `itemset`: the narrowest predicate on it, as
/// (selected fraction, bitmaps read).
fn restricted_factors(
    query: &AnalyticalQuery,
    itemset: &AttrSet,
    schema: &StarSchema,
    params: &CostParameters,
) -> Result<BTreeMap<AttrRef, (Ratio<u128>, u64)>, CostError> {
    let mut factors: BTreeMap<AttrRef, (Ratio<u128>, u64)> = BTreeMap::new();
    for r in query.restrictions.iter().filter(|r| itemset.contains(&r.attribute)) {
        let dv = schema
            .dimension_attribute(&r.attribute)
            .ok_or_else(|| CostError::UnknownAttribute(r.attribute.clone()))?
            .distinct_values;
        let dv128 = u128::from(dv);
        let (fraction, bitmaps) = match r.kind {
            PredicateKind::Equality | PredicateKind::InList => {
                let n = r.value_count.clamp(1, dv);
                (Ratio::new(u128::from(n), dv128), n)
            }
            PredicateKind::Between => {
                let bf = params.between_ratio();
                let n = (bf * dv128).ceil().to_integer().max(1);
                (bf, u64::try_from(n).unwrap_or(dv).min(dv))
            }
        };
        factors
            .entry(r.attribute.clone())
            .and_modify(|cur| {
                if fraction < cur.0 {
                    *cur = (fraction, bitmaps);
                }
            })
            .or_insert((fraction, bitmaps));
    }
    Ok(factors)
}

/// `ceil(s × rows)` with `s` the product of `fractions`, exact whenever u128 suffices.
fn fetched_rows(rows: u64, fractions: impl Iterator<Item = Ratio<u128>>) -> u64 {
    let mut exact: Option<Ratio<u128>> = Some(Ratio::from_integer(u128::from(rows)));
    let mut approx = rows as f64;
    for f in fractions {
        approx *= *f.numer() as f64 / *f.denom() as f64;
        exact = exact.and_then(|e| {
            let n = e.numer().checked_mul(*f.numer())?;
            let d = e.denom().checked_mul(*f.denom())?;
            Some(Ratio::new(n, d))
        });
    }
    match exact {
        Some(e) => u64::try_from(e.ceil().to_integer()).unwrap_or(rows),
        None => (approx.ceil() as u64).min(rows),
    }
}

pub fn query_cost_indexed(
    query: &AnalyticalQuery,
    itemset: &AttrSet,
    schema: &StarSchema,
    params: &CostParameters,
) -> Result<CostEstimate, CostError> {
    if !is_usable(itemset, query) {
        return Err(CostError::NotUsable { attrs: describe(itemset), query: query.id.clone() });
    }
    let factors = restricted_factors(query, itemset, schema, params)?;
    let rows = schema.fact.row_count;
    let k = fetched_rows(rows, factors.values().map(|(f, _)| *f));

    let pages_per_bitmap = u128::from(rows).div_ceil(8 * u128::from(schema.page_size));
    let bitmap_pages: u128 = factors.values().map(|&(_, n)| u128::from(n) * pages_per_bitmap).sum();

    let needed: BTreeSet<&str> = query
        .grouping
        .iter()
        .map(|a| a.table.as_str())
        .chain(
            query.restrictions.iter().filter(|r| !itemset.contains(&r.attribute)).map(|r| r.attribute.table.as_str()),
        )
        .collect();
    let residual: u64 = query
        .joined_dimensions
        .iter()
        .filter(|d| needed.contains(d.as_str()))
        .filter_map(|d| schema.dimension(d))
        .map(|d| page_count(d, schema.page_size))
        .sum();

    Ok(CostEstimate::new(bitmap_pages as f64 + cardenas_pages(schema.fact_pages(), k) + residual as f64))
}

pub fn maintenance_cost(
    itemset: &AttrSet,
    schema: &StarSchema,
    params: &CostParameters,
) -> Result<CostEstimate, CostError> {
    let size = index_size(itemset, schema, params)?;
    Ok(CostEstimate::new(params.maintenance_coefficient * size as f64 / schema.page_size as f64))
}

/// Cost of one query given the indexes it may pick from; unusable or
/// infeasible indexes are ignored.
pub fn best_query_cost<'a>(
    query: &AnalyticalQuery,
    configuration: impl IntoIterator<Item = &'a AttrSet>,
    schema: &StarSchema,
    params: &CostParameters,
) -> CostEstimate {
    configuration
        .into_iter()
        .filter_map(|i| query_cost_indexed(query, i, schema, params).ok())
        .fold(query_cost_unindexed(query, schema), CostEstimate::min)
}

pub fn workload_cost<'a, 'b>(
    queries: impl IntoIterator<Item = &'a AnalyticalQuery>,
    configuration: &'b [AttrSet],
    schema: &StarSchema,
    params: &CostParameters,
) -> CostEstimate {
    let access: CostEstimate =
        queries.into_iter().map(|q| best_query_cost(q, configuration, schema, params).scaled(q.weight.max(1))).sum();
    let maintenance: CostEstimate = configuration.iter().filter_map(|i| maintenance_cost(i, schema, params).ok()).sum();
    access + maintenance
}

use std::cmp::Ordering;

use super::{CandidateIndex, IndexConfiguration};
use crate::costmodel::{maintenance_cost, query_cost_indexed, query_cost_unindexed, CostEstimate, CostParameters};
use crate::schema::StarSchema;
use crate::workload::AnalyticalQuery;

/// Per-query costs of every candidate, evaluated once per selection run.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    weights: Vec<u64>,
    unindexed: Vec<f64>,
    /// `indexed[c][q]`, `None` where candidate `c` is unusable for query `q`.
    indexed: Vec<Vec<Option<f64>>>,
    maintenance: Vec<f64>,
}

impl CostMatrix {
    pub fn new(
        candidates: &[CandidateIndex],
        queries: &[&AnalyticalQuery],
        schema: &StarSchema,
        params: &CostParameters,
    ) -> Self {
        let indexed = candidates
            .iter()
            .map(|c| {
                queries
                    .iter()
                    .map(|q| query_cost_indexed(q, &c.itemset, schema, params).ok().map(|e| e.pages))
                    .collect()
            })
            .collect();
        Self {
            weights: queries.iter().map(|q| q.weight.max(1)).collect(),
            unindexed: queries.iter().map(|q| query_cost_unindexed(q, schema).pages).collect(),
            indexed,
            maintenance: candidates
                .iter()
                .map(|c| maintenance_cost(&c.itemset, schema, params).map_or(0.0, |e| e.pages))
                .collect(),
        }
    }

    /// Workload cost of the candidates in `selection`, maintenance summed in the given order.
    pub fn workload_cost(&self, selection: &[usize]) -> CostEstimate {
        let access: f64 = (0..self.weights.len())
            .map(|q| {
                let best = selection.iter().filter_map(|&c| self.indexed[c][q]).fold(self.unindexed[q], f64::min);
                best * self.weights[q] as f64
            })
            .sum();
        let maintenance: f64 = selection.iter().map(|&c| self.maintenance[c]).sum();
        CostEstimate::new(access + maintenance)
    }

    fn base_cost(&self, best: &[f64], maintenance: f64) -> f64 {
        best.iter().enumerate().map(|(q, &b)| b * self.weights[q] as f64).sum::<f64>() + maintenance
    }

    /// Cost of `selection` plus `extra`, computed from the per-query best of `selection`.
    fn extended_cost(&self, best: &[f64], maintenance: f64, extra: usize) -> f64 {
        let access: f64 = best
            .iter()
            .enumerate()
            .map(|(q, &b)| self.indexed[extra][q].map_or(b, |c| b.min(c)) * self.weights[q] as f64)
            .sum();
        access + maintenance + self.maintenance[extra]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub configuration: IndexConfiguration,
    /// Workload cost before the first acceptance and after each one.
    pub trace: Vec<CostEstimate>,
}

pub fn select_configuration(
    candidates: &[CandidateIndex],
    queries: &[&AnalyticalQuery],
    schema: &StarSchema,
    params: &CostParameters,
    budget: u64,
) -> IndexConfiguration {
    select_configuration_traced(candidates, queries, schema, params, budget).configuration
}

/// Greedy: repeatedly add the candidate with the largest cost decrease that
/// still fits the budget; ties go to the smaller index, then the smaller itemset.
pub fn select_configuration_traced(
    candidates: &[CandidateIndex],
    queries: &[&AnalyticalQuery],
    schema: &StarSchema,
    params: &CostParameters,
    budget: u64,
) -> Selection {
    let matrix = CostMatrix::new(candidates, queries, schema, params);
    let mut best: Vec<f64> = matrix.unindexed.clone();
    let mut maintenance = 0.0;
    let mut used = 0u64;
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = matrix.base_cost(&best, maintenance);
    let mut trace = vec![CostEstimate::new(current)];

    loop {
        let mut pick: Option<(usize, f64, f64)> = None;
        for (c, cand) in candidates.iter().enumerate() {
            if !cand.feasible || chosen.contains(&c) || used.saturating_add(cand.size) > budget {
                continue;
            }
            let after = matrix.extended_cost(&best, maintenance, c);
            let gain = current - after;
            let better = match pick {
                None => true,
                Some((p, g, _)) => match gain.partial_cmp(&g) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => (cand.size, &cand.itemset) < (candidates[p].size, &candidates[p].itemset),
                    _ => false,
                },
            };
            if better {
                pick = Some((c, gain, after));
            }
        }
        let Some((c, gain, after)) = pick else { break };
        if gain <= 0.0 {
            break;
        }
        for (q, b) in best.iter_mut().enumerate() {
            if let Some(cost) = matrix.indexed[c][q] {
                *b = b.min(cost);
            }
        }
        maintenance += matrix.maintenance[c];
        used += candidates[c].size;
        chosen.push(c);
        current = after;
        trace.push(CostEstimate::new(after));
        log::debug!("selected {} (gain {gain:.3} pages)", candidates[c].name);
    }

    Selection { configuration: IndexConfiguration::new(chosen.into_iter().map(|c| candidates[c].clone())), trace }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::super::fixtures::{a, schema, set};
    use super::*;
    use crate::costmodel::{workload_cost, AttrSet};
    use crate::workload::{PredicateKind, RestrictionPredicate};

    fn eq(attr: &str, values: u64) -> RestrictionPredicate {
        let kind = if values == 1 { PredicateKind::Equality } else { PredicateKind::InList };
        RestrictionPredicate { attribute: a(attr), kind, value_count: values }
    }

    fn query(id: &str, restrictions: Vec<RestrictionPredicate>, weight: u64) -> AnalyticalQuery {
        AnalyticalQuery {
            id: id.into(),
            joined_dimensions: restrictions.iter().map(|r| r.attribute.table.clone()).collect(),
            restrictions,
            weight,
            ..Default::default()
        }
    }

    fn candidates(sets: &[AttrSet], params: &CostParameters) -> Vec<CandidateIndex> {
        let s = schema();
        sets.iter().map(|x| CandidateIndex::new(x.clone(), &s, params)).collect()
    }

    #[test]
    fn only_fitting_candidate_is_selected() {
        let s = schema();
        let p = CostParameters::default();
        // name: 1000 bitmaps (12.5 MB); segment: 4 bitmaps (50 KB).
        let qs = [query("q1", vec![eq("customer.name", 1)], 1), query("q2", vec![eq("customer.segment", 1)], 1)];
        let refs: Vec<&AnalyticalQuery> = qs.iter().collect();
        let cands = candidates(&[set(&["customer.name"]), set(&["customer.segment"])], &p);
        let budget = 1_000_000;
        assert!(cands[0].size > budget && cands[1].size <= budget);
        let got = select_configuration(&cands, &refs, &s, &p, budget);
        assert_eq!(got.itemsets(), vec![set(&["customer.segment"])]);

        let got = select_configuration(&cands, &refs, &s, &p, u64::MAX);
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let p = CostParameters::default();
        let qs = [query("q1", vec![eq("customer.city", 1)], 1)];
        let cands = candidates(&[set(&["customer.city"])], &p);
        assert!(select_configuration(&cands, &[&qs[0]], &schema(), &p, 0).is_empty());
    }

    #[test]
    fn expensive_maintenance_is_never_worth_it() {
        let p = CostParameters { maintenance_coefficient: 1000.0, ..Default::default() };
        let qs = [query("q1", vec![eq("customer.city", 1)], 1)];
        let cands = candidates(&[set(&["customer.city"])], &p);
        let sel = select_configuration_traced(&cands, &[&qs[0]], &schema(), &p, u64::MAX);
        assert!(sel.configuration.is_empty());
        assert_eq!(sel.trace.len(), 1);
    }

    #[test]
    fn larger_improvement_wins_and_overlaps_are_not_double_counted() {
        let s = schema();
        let p = CostParameters::default();
        let qs = [
            query("q1", vec![eq("customer.city", 1), eq("customer.segment", 1)], 3),
            query("q2", vec![eq("customer.city", 1)], 1),
        ];
        let refs: Vec<&AnalyticalQuery> = qs.iter().collect();
        let sets = [set(&["customer.city"]), set(&["customer.city", "customer.segment"])];
        let cands = candidates(&sets, &p);
        let sel = select_configuration_traced(&cands, &refs, &s, &p, u64::MAX);
        for w in sel.trace.windows(2) {
            assert!(w[1].pages < w[0].pages);
        }
        let chosen = sel.configuration.itemsets();
        let literal = workload_cost(refs.iter().copied(), &chosen, &s, &p).pages;
        assert!((sel.trace.last().unwrap().pages - literal).abs() < 1e-9 * literal);
    }

    #[test]
    fn ties_prefer_smaller_indexes() {
        let s = schema();
        let p = CostParameters { maintenance_coefficient: 0.0, ..Default::default() };
        let mut q = query("q1", vec![eq("customer.name", 1)], 1);
        q.grouping = BTreeSet::from([a("customer.segment")]);
        let cands = candidates(&[set(&["customer.name", "customer.segment"]), set(&["customer.name"])], &p);
        let m = CostMatrix::new(&cands, &[&q], &s, &p);
        assert_eq!(m.workload_cost(&[0]), m.workload_cost(&[1]));
        let sel = select_configuration(&cands, &[&q], &s, &p, u64::MAX);
        assert_eq!(sel.itemsets(), vec![set(&["customer.name"])]);
    }

    #[test]
    fn matrix_agrees_with_literal_workload_cost() {
        let s = schema();
        let p = CostParameters::default();
        let qs = [
            query("q1", vec![eq("customer.city", 2)], 2),
            query("q2", vec![eq("product.brand", 1), eq("customer.segment", 1)], 1),
        ];
        let refs: Vec<&AnalyticalQuery> = qs.iter().collect();
        let sets = [set(&["customer.city"]), set(&["product.brand"]), set(&["customer.segment", "product.brand"])];
        let cands = candidates(&sets, &p);
        let m = CostMatrix::new(&cands, &refs, &s, &p);
        for sel in [vec![], vec![0], vec![1, 2], vec![0, 1, 2]] {
            let cfg: Vec<AttrSet> = sel.iter().map(|&c| sets[c].clone()).collect();
            assert_eq!(m.workload_cost(&sel).pages, workload_cost(refs.iter().copied(), &cfg, &s, &p).pages);
        }
    }
}

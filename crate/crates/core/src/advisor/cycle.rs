use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    diff_configurations, generate_candidates, select_configuration_traced, CandidateIndex, ConfigurationDiff,
    IndexConfiguration,
};
use crate::context::{apply_delta, ContextError, DeltaBatch, ItemDictionary};
use crate::costmodel::{workload_cost, AttrSet, CostParameters};
use crate::miner::{classify, Itemset, KnowledgeBase, MiningParameters};
use crate::schema::StarSchema;
use crate::workload::AnalyticalQuery;

#[derive(Debug, Error)]
pub enum CycleError {
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NamedItemset {
    pub attributes: AttrSet,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub context: f64,
    pub mining: f64,
    pub classification: f64,
    pub candidates: f64,
    pub selection: f64,
    pub diff: f64,
}

impl StepTimings {
    /// Knowledge-base update time: context delta, mining and classification.
    pub fn update(&self) -> f64 {
        self.context + self.mining + self.classification
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub cycle: u64,
    pub kb_version: u64,
    pub queries: usize,
    pub support_threshold: u64,
    pub emerged: Vec<NamedItemset>,
    pub declined: Vec<NamedItemset>,
    pub retained: Vec<NamedItemset>,
    pub candidates: Vec<CandidateIndex>,
    pub selected: IndexConfiguration,
    pub to_create: Vec<CandidateIndex>,
    pub to_drop: Vec<CandidateIndex>,
    pub baseline_cost_pages: f64,
    pub recommended_cost_pages: f64,
    /// Dropped indexes that would still have lowered the workload cost.
    pub declined_but_beneficial: Vec<String>,
    pub timings_ms: StepTimings,
}

impl Recommendation {
    pub fn diff(&self) -> ConfigurationDiff {
        ConfigurationDiff { to_create: self.to_create.clone(), to_drop: self.to_drop.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recommendation serialization is infallible")
    }

    /// The JSON report with timings zeroed, for byte comparisons.
    pub fn deterministic_json(&self) -> String {
        Self { timings_ms: StepTimings::default(), ..self.clone() }.to_json()
    }

    pub fn emerged_sets(&self) -> BTreeSet<&AttrSet> {
        self.emerged.iter().map(|n| &n.attributes).collect()
    }

    pub fn declined_sets(&self) -> BTreeSet<&AttrSet> {
        self.declined.iter().map(|n| &n.attributes).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CycleResult {
    pub recommendation: Recommendation,
    pub knowledge_base: KnowledgeBase,
    pub configuration: IndexConfiguration,
}

fn name(dictionary: &ItemDictionary, itemset: &Itemset) -> NamedItemset {
    NamedItemset {
        attributes: itemset
            .items
            .iter()
            .map(|&i| dictionary.attr(i).expect("mined items are in the dictionary").clone())
            .collect(),
        support: itemset.support,
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// One advisory cycle: apply the delta, re-mine, classify against the old
/// maximal sets and the current indexes, build candidates, select under the
/// budget and diff against the current configuration.
pub fn run_cycle(
    kb: &KnowledgeBase,
    delta: &DeltaBatch,
    current: &IndexConfiguration,
    schema: &StarSchema,
    params: &CostParameters,
    budget: u64,
) -> Result<CycleResult, CycleError> {
    run_cycle_at(kb, kb.parameters, delta, current, schema, params, budget)
}

/// [`run_cycle`] mining at `minsup` instead of the knowledge base's own
/// parameters. Classification still compares against the stored maximal sets.
pub fn run_cycle_at(
    kb: &KnowledgeBase,
    minsup: MiningParameters,
    delta: &DeltaBatch,
    current: &IndexConfiguration,
    schema: &StarSchema,
    params: &CostParameters,
    budget: u64,
) -> Result<CycleResult, CycleError> {
    let mut timings = StepTimings::default();

    let t = Instant::now();
    let database = apply_delta(&kb.database, delta)?;
    timings.context = ms(t);

    let t = Instant::now();
    let next_kb = kb.advance_at(minsup, database, delta);
    timings.mining = ms(t);

    let t = Instant::now();
    let dictionary = next_kb.dictionary();
    let mut unknown_indexes = Vec::new();
    let mut index_itemsets = Vec::new();
    for index in &current.indexes {
        let ids: Option<Vec<_>> = index.itemset.iter().map(|a| dictionary.id(a)).collect();
        match ids {
            Some(ids) => {
                let support = next_kb.database.support(&ids)?;
                index_itemsets.push(Itemset::new(ids, support));
            }
            None => unknown_indexes.push(NamedItemset { attributes: index.itemset.clone(), support: 0 }),
        }
    }
    let outcome = classify(&kb.maximal, &next_kb.maximal, &index_itemsets);
    let named = |sets: &[Itemset]| -> Vec<NamedItemset> { sets.iter().map(|s| name(dictionary, s)).collect() };
    let emerged = named(&outcome.emerged);
    let mut declined = named(&outcome.declined);
    declined.extend(unknown_indexes);
    declined.sort();
    declined.dedup_by(|a, b| a.attributes == b.attributes);
    let retained = named(&outcome.retained);
    timings.classification = ms(t);

    let t = Instant::now();
    let emerged_sets: Vec<AttrSet> = emerged.iter().map(|n| n.attributes.clone()).collect();
    let declined_sets: Vec<AttrSet> = declined.iter().map(|n| n.attributes.clone()).collect();
    let candidates = generate_candidates(&emerged_sets, &declined_sets, current, schema, params);
    timings.candidates = ms(t);

    let t = Instant::now();
    let queries: Vec<&AnalyticalQuery> = next_kb.database.queries().collect();
    let selection = select_configuration_traced(&candidates, &queries, schema, params, budget);
    timings.selection = ms(t);

    let t = Instant::now();
    let configuration = selection.configuration;
    let diff = diff_configurations(current, &configuration);
    timings.diff = ms(t);

    let selected_sets = configuration.itemsets();
    let baseline = workload_cost(queries.iter().copied(), &[], schema, params).pages;
    let recommended = workload_cost(queries.iter().copied(), &selected_sets, schema, params);
    let declined_but_beneficial = diff
        .to_drop
        .iter()
        .filter(|index| index.feasible)
        .filter(|index| {
            let mut with = selected_sets.clone();
            with.push(index.itemset.clone());
            workload_cost(queries.iter().copied(), &with, schema, params) < recommended
        })
        .map(|index| index.name.clone())
        .collect();

    let recommendation = Recommendation {
        cycle: delta.cycle,
        kb_version: next_kb.version,
        queries: queries.len(),
        support_threshold: next_kb.threshold(),
        emerged,
        declined,
        retained,
        candidates,
        selected: configuration.clone(),
        to_create: diff.to_create,
        to_drop: diff.to_drop,
        baseline_cost_pages: baseline,
        recommended_cost_pages: recommended.pages,
        declined_but_beneficial,
        timings_ms: timings,
    };
    Ok(CycleResult { recommendation, knowledge_base: next_kb, configuration })
}

//! Fixtures shared by the benchmarks. Inputs come from `dynidx_core::synth`.

use std::collections::BTreeSet;

use dynidx_core::context::NewRow;
use dynidx_core::synth::{self, DenseConfig, ScenarioConfig};
use dynidx_core::{
    mine_maximal, parse_workload, run_cycle, AnalyticalQuery, CostParameters, DeltaBatch, IndexConfiguration,
    KnowledgeBase, MiningParameters, StarSchema, TransactionDatabase,
};

pub const MINSUP: f64 = 0.05;

/// A mined knowledge base over `rows` dense rows.
pub fn dense_kb(rows: usize, seed: u64) -> KnowledgeBase {
    let params = MiningParameters::new(MINSUP).expect("valid minsup");
    let database = synth::dense_context(&DenseConfig::default(), rows, seed);
    let maximal = mine_maximal(&database, &params);
    KnowledgeBase { maximal, database, ..KnowledgeBase::new(params) }
}

/// `rows` fresh dense rows expressed over the knowledge base's attributes.
pub fn dense_delta(kb: &KnowledgeBase, rows: usize, seed: u64) -> DeltaBatch {
    let dictionary = kb.dictionary();
    let added = synth::dense_rows(&DenseConfig::default(), rows, seed)
        .into_iter()
        .enumerate()
        .map(|(n, (items, weight))| NewRow {
            id: format!("bench{seed}-{n}"),
            attrs: items.iter().map(|&i| dictionary.attr(i).expect("dense items are interned").clone()).collect(),
            weight,
            query: None,
        })
        .collect();
    DeltaBatch::from_rows(added, BTreeSet::new()).expect("fresh ids")
}

/// The dense rows of `dense_kb(base, base_seed)` plus `dense_delta(.., extra, extra_seed)`, built from scratch.
pub fn dense_union(base: usize, base_seed: u64, extra: usize, extra_seed: u64) -> TransactionDatabase {
    let config = DenseConfig::default();
    let mut rows = synth::dense_rows(&config, base, base_seed);
    rows.extend(synth::dense_rows(&config, extra, extra_seed));
    TransactionDatabase::from_item_rows(config.items, &rows)
}

/// State of the sales scenario after its first `cycles` workloads.
pub struct ScenarioState {
    pub schema: StarSchema,
    pub kb: KnowledgeBase,
    pub configuration: IndexConfiguration,
    pub workloads: Vec<String>,
}

impl ScenarioState {
    pub fn after(cycles: usize, budget: u64) -> Self {
        let schema = synth::sales_schema();
        let workloads = synth::scenario_workloads(&ScenarioConfig::default());
        let mut kb = KnowledgeBase::new(MiningParameters::new(MINSUP).expect("valid minsup"));
        let mut configuration = IndexConfiguration::default();
        for (n, text) in workloads.iter().take(cycles).enumerate() {
            let delta = delta_for(&schema, text, n as u64 + 1);
            let result = run_cycle(&kb, &delta, &configuration, &schema, &CostParameters::default(), budget)
                .expect("scenario cycles apply");
            kb = result.knowledge_base;
            configuration = result.configuration;
        }
        Self { schema, kb, configuration, workloads }
    }

    pub fn queries(&self) -> Vec<&AnalyticalQuery> {
        self.kb.database.queries().collect()
    }
}

/// Workload `text` as the delta of advisory cycle `cycle`, with cycle-qualified ids.
pub fn delta_for(schema: &StarSchema, text: &str, cycle: u64) -> DeltaBatch {
    let mut batch = parse_workload(text, schema, "bench");
    for q in &mut batch.queries {
        q.id = format!("c{cycle}-{}", q.id);
    }
    DeltaBatch::new(&batch, BTreeSet::new()).expect("fresh ids").with_cycle(cycle)
}

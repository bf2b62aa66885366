//! Bitmap join index advisor for star-schema warehouses.
//!
//! A workload log is parsed into analytical queries, each query becomes a
//! transaction of indexable dimension attributes, and maximal frequent
//! attribute sets are mined incrementally across workload batches. Emerged
//! and declined sets drive a budgeted greedy index selection whose result
//! is reported as a create/drop DDL script.

pub mod advisor;
pub mod bitset;
pub mod context;
pub mod costmodel;
pub mod miner;
pub mod schema;
pub mod store;
pub mod synth;
pub mod workload;

pub use advisor::{
    diff_configurations, emit_ddl, generate_candidates, index_name, run_cycle, run_cycle_at, select_configuration,
    AdvisorState, CandidateIndex, ConfigurationDiff, CycleRecord, CycleResult, IndexConfiguration, Recommendation,
};
pub use context::{apply_delta, build_context, DeltaBatch, ItemDictionary, ItemId, Transaction, TransactionDatabase};
pub use costmodel::{AttrSet, CostEstimate, CostParameters};
pub use miner::{
    brute_force_maximal, classify, mine_incremental, mine_maximal, Itemset, KnowledgeBase, MiningOutcome,
    MiningParameters,
};
pub use schema::{load_schema, AttrRef, StarSchema};
pub use workload::{load_workload, parse_workload, AnalyticalQuery, WorkloadBatch};

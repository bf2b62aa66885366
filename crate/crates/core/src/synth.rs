//! Seeded synthetic inputs: a five-dimension sales schema with evolving
//! workloads, dense transaction contexts and small random contexts.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{ItemId, TransactionDatabase};
use crate::schema::{AttrRef, AttributeStats, JoinTarget, StarSchema, TableStats, DEFAULT_PAGE_SIZE};

fn table(name: &str, rows: u64, width: u64, pk: Option<&str>, attrs: &[(&str, u64)]) -> TableStats {
    TableStats {
        name: name.into(),
        row_count: rows,
        row_width: width,
        attributes: attrs.iter().map(|(n, dv)| AttributeStats { name: (*n).into(), distinct_values: *dv }).collect(),
        primary_key: pk.map(Into::into),
    }
}

const JOINS: [(&str, &str); 5] = [
    ("cust_id", "customer"),
    ("prod_id", "product"),
    ("time_id", "time"),
    ("store_id", "store"),
    ("promo_id", "promotion"),
];

/// `sales` (1M rows) with customer, product, time, store and promotion dimensions.
pub fn sales_schema() -> StarSchema {
    StarSchema {
        fact: table(
            "sales",
            1_000_000,
            64,
            None,
            &[
                ("cust_id", 10_000),
                ("prod_id", 2_000),
                ("time_id", 3_650),
                ("store_id", 500),
                ("promo_id", 300),
                ("amount", 100_000),
                ("quantity", 50),
            ],
        ),
        dimensions: vec![
            table(
                "customer",
                10_000,
                180,
                Some("id"),
                &[("id", 10_000), ("city", 200), ("region", 20), ("segment", 5), ("gender", 2), ("age_band", 8)],
            ),
            table(
                "product",
                2_000,
                150,
                Some("id"),
                &[("id", 2_000), ("brand", 100), ("category", 30), ("color", 12), ("size", 6), ("packaging", 5)],
            ),
            table(
                "time",
                3_650,
                40,
                Some("id"),
                &[("id", 3_650), ("month", 12), ("quarter", 4), ("year", 10), ("weekday", 7)],
            ),
            table("store", 500, 120, Some("id"), &[("id", 500), ("city", 100), ("state", 40), ("format", 4)]),
            table("promotion", 300, 90, Some("id"), &[("id", 300), ("discount", 10), ("channel", 6), ("media", 5)]),
        ],
        join_keys: JOINS
            .iter()
            .map(|(fk, dim)| ((*fk).to_string(), JoinTarget { dimension: (*dim).into(), primary_key: "id".into() }))
            .collect(),
        page_size: DEFAULT_PAGE_SIZE,
    }
}

/// Attribute groups that appear only in planted queries.
pub const PLANTED_GROUPS: [&[&str]; 3] = [
    &["customer.age_band", "customer.gender", "store.format"],
    &["product.color", "product.size", "promotion.media"],
    &["promotion.channel", "time.weekday"],
];

/// Attributes used by background queries, disjoint from the planted groups.
pub const BACKGROUND: [&str; 12] = [
    "customer.city",
    "customer.region",
    "customer.segment",
    "product.brand",
    "product.category",
    "product.packaging",
    "time.month",
    "time.quarter",
    "time.year",
    "store.city",
    "store.state",
    "promotion.discount",
];

pub fn planted_group(g: usize) -> std::collections::BTreeSet<AttrRef> {
    PLANTED_GROUPS[g].iter().map(|a| a.parse().expect("valid attribute")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub cycles: usize,
    pub queries_per_cycle: usize,
    /// Planted queries per group in every active cycle.
    pub planted_per_group: usize,
    /// First and last cycle (1-based, inclusive) in which planted groups occur.
    pub planted_from: usize,
    pub planted_until: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { cycles: 5, queries_per_cycle: 30, planted_per_group: 4, planted_from: 2, planted_until: 4, seed: 2024 }
    }
}

struct SqlQuery {
    grouping: Vec<AttrRef>,
    restrictions: Vec<String>,
    tables: Vec<String>,
    measure: &'static str,
}

impl SqlQuery {
    fn render(&self) -> String {
        let mut tables = self.tables.clone();
        tables.sort();
        tables.dedup();
        let mut out = String::from("SELECT ");
        for g in &self.grouping {
            write!(out, "{g}, ").unwrap();
        }
        write!(out, "{} FROM sales", self.measure).unwrap();
        for t in &tables {
            write!(out, ", {t}").unwrap();
        }
        let mut conds: Vec<String> = tables
            .iter()
            .map(|t| {
                let fk = JOINS.iter().find(|(_, d)| d == t).expect("known dimension").0;
                format!("sales.{fk} = {t}.id")
            })
            .collect();
        conds.extend(self.restrictions.iter().cloned());
        if !conds.is_empty() {
            write!(out, " WHERE {}", conds.join(" AND ")).unwrap();
        }
        if !self.grouping.is_empty() {
            let g: Vec<String> = self.grouping.iter().map(ToString::to_string).collect();
            write!(out, " GROUP BY {}", g.join(", ")).unwrap();
        }
        out.push(';');
        out
    }
}

const MEASURES: [&str; 4] = ["SUM(sales.amount)", "AVG(sales.amount)", "SUM(sales.quantity)", "COUNT(*)"];

fn background_query(rng: &mut ChaCha8Rng) -> SqlQuery {
    let n_group = rng.random_range(1..=2);
    let n_restrict = rng.random_range(0..=2);
    let picked: Vec<&&str> = BACKGROUND.choose_multiple(rng, n_group + n_restrict).collect();
    let attrs: Vec<AttrRef> = picked.iter().map(|a| a.parse().expect("valid attribute")).collect();
    let (grouping, restricted) = attrs.split_at(n_group);
    let restrictions = restricted
        .iter()
        .map(|a| match rng.random_range(0..3) {
            0 => format!("{a} = 'v{}'", rng.random_range(0..10)),
            1 => format!("{a} IN ('v1', 'v2', 'v3')"),
            _ => format!("{a} BETWEEN 1 AND 5"),
        })
        .collect();
    SqlQuery {
        tables: attrs.iter().map(|a| a.table.clone()).collect(),
        grouping: grouping.to_vec(),
        restrictions,
        measure: MEASURES.choose(rng).expect("non-empty"),
    }
}

fn planted_query(group: usize, rng: &mut ChaCha8Rng) -> SqlQuery {
    let attrs: Vec<AttrRef> = planted_group(group).into_iter().collect();
    SqlQuery {
        tables: attrs.iter().map(|a| a.table.clone()).collect(),
        restrictions: attrs.iter().map(|a| format!("{a} = {}", rng.random_range(1..=4))).collect(),
        grouping: Vec::new(),
        measure: MEASURES.choose(rng).expect("non-empty"),
    }
}

/// Workload log text for each cycle. Planted queries come first in active cycles.
pub fn scenario_workloads(config: &ScenarioConfig) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (1..=config.cycles)
        .map(|cycle| {
            let active = (config.planted_from..=config.planted_until).contains(&cycle);
            let mut queries = Vec::new();
            if active {
                for g in 0..PLANTED_GROUPS.len() {
                    queries.extend((0..config.planted_per_group).map(|_| planted_query(g, &mut rng)));
                }
            }
            while queries.len() < config.queries_per_cycle {
                queries.push(background_query(&mut rng));
            }
            let mut text = format!("-- cycle {cycle}\n");
            for q in queries {
                text.push_str(&q.render());
                text.push('\n');
            }
            text
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseConfig {
    pub items: usize,
    pub templates: usize,
    pub template_len: usize,
    /// Probability that a template item is kept in a row.
    pub keep: f64,
    /// Probability that any other item is added to a row.
    pub noise: f64,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self { items: 64, templates: 8, template_len: 10, keep: 0.85, noise: 0.02 }
    }
}

/// Rows drawn from overlapping item templates: each row perturbs one template.
pub fn dense_rows(config: &DenseConfig, rows: usize, seed: u64) -> Vec<(Vec<ItemId>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut template_rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let universe: Vec<ItemId> = (0..config.items as ItemId).collect();
    let templates: Vec<Vec<ItemId>> = (0..config.templates)
        .map(|_| universe.choose_multiple(&mut template_rng, config.template_len).copied().collect())
        .collect();
    (0..rows)
        .map(|_| {
            let t = templates.choose(&mut rng).expect("at least one template");
            let mut items: Vec<ItemId> = t.iter().copied().filter(|_| rng.random_bool(config.keep)).collect();
            items.extend(universe.iter().filter(|i| !t.contains(i) && rng.random_bool(config.noise)));
            items.sort_unstable();
            (items, 1)
        })
        .collect()
}

pub fn dense_context(config: &DenseConfig, rows: usize, seed: u64) -> TransactionDatabase {
    TransactionDatabase::from_item_rows(config.items, &dense_rows(config, rows, seed))
}

/// Rows over `items` items, each item present independently with probability `density`.
pub fn random_rows(
    rng: &mut impl Rng,
    items: usize,
    rows: usize,
    density: f64,
    max_weight: u64,
) -> Vec<(Vec<ItemId>, u64)> {
    (0..rows)
        .map(|_| {
            let set = (0..items as ItemId).filter(|_| rng.random_bool(density)).collect();
            (set, rng.random_range(1..=max_weight.max(1)))
        })
        .collect()
}

/// Number of queries per attribute group in a parsed batch, for diagnostics.
pub fn group_frequencies(batch: &crate::workload::WorkloadBatch) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for q in &batch.queries {
        let attrs: Vec<String> = crate::workload::extract_indexable(q).iter().map(ToString::to_string).collect();
        *out.entry(attrs.join(",")).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::parse_workload;

    #[test]
    fn schema_is_valid() {
        sales_schema().validate().unwrap();
    }

    #[test]
    fn scenario_parses_completely() {
        let schema = sales_schema();
        let workloads = scenario_workloads(&ScenarioConfig::default());
        assert_eq!(workloads.len(), 5);
        for (n, text) in workloads.iter().enumerate() {
            let batch = parse_workload(text, &schema, "synthetic");
            assert_eq!(batch.skipped, 0, "cycle {}", n + 1);
            assert_eq!(batch.queries.len(), 30);
            let freq = group_frequencies(&batch);
            let key = PLANTED_GROUPS[0].join(",");
            let expected = if (2..=4).contains(&(n + 1)) { Some(&4) } else { None };
            assert_eq!(freq.get(&key), expected);
        }
        assert_eq!(workloads, scenario_workloads(&ScenarioConfig::default()));
    }

    #[test]
    fn dense_rows_are_deterministic_and_dense() {
        let c = DenseConfig::default();
        let a = dense_rows(&c, 200, 1);
        assert_eq!(a, dense_rows(&c, 200, 1));
        let avg = a.iter().map(|(r, _)| r.len()).sum::<usize>() as f64 / a.len() as f64;
        assert!(avg > 7.0, "{avg}");
    }
}

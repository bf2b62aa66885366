use std::collections::BTreeSet;
use std::fmt::Write;

use super::{CandidateIndex, ConfigurationDiff};
use crate::schema::StarSchema;

/// Drops first, then creates, each in name order. An empty diff yields an empty script.
pub fn emit_ddl(diff: &ConfigurationDiff, schema: &StarSchema) -> String {
    let mut drops: Vec<&CandidateIndex> = diff.to_drop.iter().collect();
    let mut creates: Vec<&CandidateIndex> = diff.to_create.iter().collect();
    drops.sort_by(|a, b| a.name.cmp(&b.name));
    creates.sort_by(|a, b| a.name.cmp(&b.name));

    let mut out = String::new();
    for index in drops {
        writeln!(out, "DROP INDEX {};", index.name).unwrap();
    }
    for index in creates {
        out.push_str(&create_statement(index, schema));
        out.push('\n');
    }
    out
}

fn create_statement(index: &CandidateIndex, schema: &StarSchema) -> String {
    let fact = &schema.fact.name;
    let columns: Vec<String> = index.itemset.iter().map(ToString::to_string).collect();
    let dims: BTreeSet<&str> = index.itemset.iter().map(|a| a.table.as_str()).collect();
    let joins: Vec<String> = dims
        .iter()
        .filter_map(|d| schema.join_key_for(d))
        .map(|(fk, target)| format!("{fact}.{fk} = {}.{}", target.dimension, target.primary_key))
        .collect();
    let mut from = vec![fact.as_str()];
    from.extend(&dims);
    format!(
        "CREATE BITMAP INDEX {} ON {fact}({}) FROM {} WHERE {};",
        index.name,
        columns.join(", "),
        from.join(", "),
        joins.join(" AND ")
    )
}

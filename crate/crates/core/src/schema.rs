//! Star schema declaration and the statistics consumed by the cost model.
//!
//! Statistics are declared in a JSON file rather than sampled from a live
//! database. Attributes are always addressed by `(table, attribute)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_PAGE_SIZE: u64 = 8192;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read schema file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid schema: {0}")]
    Validation(String),
}

/// Identity of an attribute: the owning table plus the attribute name.
///
/// Rendered and parsed as `table.attribute`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub table: String,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(table: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self { table: table.into(), attribute: attribute.into() }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.attribute)
    }
}

impl FromStr for AttrRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((t, a)) if !t.is_empty() && !a.is_empty() && !a.contains('.') => Ok(AttrRef::new(t, a)),
            _ => Err(format!("expected `table.attribute`, got `{s}`")),
        }
    }
}

impl Serialize for AttrRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttrRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeStats {
    pub name: String,
    pub distinct_values: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableStats {
    pub name: String,
    pub row_count: u64,
    /// Bytes per row.
    pub row_width: u64,
    pub attributes: Vec<AttributeStats>,
    /// Dimension tables only.
    pub primary_key: Option<String>,
}

impl TableStats {
    pub fn attribute(&self, name: &str) -> Option<&AttributeStats> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attribute(name).is_some()
    }
}

/// Where a fact foreign key points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinTarget {
    pub dimension: String,
    pub primary_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarSchema {
    pub fact: TableStats,
    pub dimensions: Vec<TableStats>,
    /// Fact attribute name to the dimension it references.
    pub join_keys: BTreeMap<String, JoinTarget>,
    pub page_size: u64,
}

/// Number of pages a table occupies: `ceil(row_count * row_width / page_size)`.
pub fn page_count(table: &TableStats, page_size: u64) -> u64 {
    assert!(page_size >= 1, "page size must be positive");
    let bytes = u128::from(table.row_count) * u128::from(table.row_width);
    let pages = bytes.div_ceil(u128::from(page_size));
    u64::try_from(pages).unwrap_or(u64::MAX)
}

impl StarSchema {
    pub fn dimension(&self, name: &str) -> Option<&TableStats> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&TableStats> {
        if self.fact.name == name {
            Some(&self.fact)
        } else {
            self.dimension(name)
        }
    }

    pub fn is_fact(&self, table: &str) -> bool {
        self.fact.name == table
    }

    /// Statistics for a dimension attribute; `None` for fact or unknown attributes.
    pub fn dimension_attribute(&self, attr: &AttrRef) -> Option<&AttributeStats> {
        self.dimension(&attr.table)?.attribute(&attr.attribute)
    }

    /// The fact foreign key joining `dimension`, if declared.
    pub fn join_key_for(&self, dimension: &str) -> Option<(&str, &JoinTarget)> {
        self.join_keys.iter().find(|(_, t)| t.dimension == dimension).map(|(fk, t)| (fk.as_str(), t))
    }

    pub fn pages(&self, table: &TableStats) -> u64 {
        page_count(table, self.page_size)
    }

    pub fn fact_pages(&self) -> u64 {
        page_count(&self.fact, self.page_size)
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| SchemaError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let schema = file.into_schema();
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile::from_schema(self);
        serde_json::to_string_pretty(&file).expect("schema serialization is infallible")
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let invalid = |msg: String| Err(SchemaError::Validation(msg));
        if self.page_size == 0 {
            return invalid("page_size must be positive".into());
        }

        let mut table_names = BTreeSet::new();
        for table in std::iter::once(&self.fact).chain(&self.dimensions) {
            if !is_identifier(&table.name) {
                return invalid(format!("table name `{}` is not an identifier", table.name));
            }
            if !table_names.insert(table.name.as_str()) {
                return invalid(format!("duplicate table name `{}`", table.name));
            }
            if table.row_width == 0 {
                return invalid(format!("table `{}` has zero row_width", table.name));
            }
            let mut attr_names = BTreeSet::new();
            for attr in &table.attributes {
                if !is_identifier(&attr.name) {
                    return invalid(format!(
                        "attribute name `{}` in table `{}` is not an identifier",
                        attr.name, table.name
                    ));
                }
                if !attr_names.insert(attr.name.as_str()) {
                    return invalid(format!("duplicate attribute `{}` in table `{}`", attr.name, table.name));
                }
                if attr.distinct_values == 0 {
                    return invalid(format!("attribute `{}.{}` has zero distinct_values", table.name, attr.name));
                }
            }
        }

        for dim in &self.dimensions {
            match &dim.primary_key {
                None => return invalid(format!("dimension `{}` has no primary_key", dim.name)),
                Some(pk) if !dim.has_attribute(pk) => {
                    return invalid(format!(
                        "primary_key `{pk}` of dimension `{}` is not among its attributes",
                        dim.name
                    ))
                }
                Some(_) => {}
            }
        }

        let mut joined = BTreeSet::new();
        for (fk, target) in &self.join_keys {
            if !self.fact.has_attribute(fk) {
                return invalid(format!("join key `{fk}` is not an attribute of fact `{}`", self.fact.name));
            }
            let Some(dim) = self.dimension(&target.dimension) else {
                return invalid(format!("join key `{fk}` references unknown dimension `{}`", target.dimension));
            };
            if dim.primary_key.as_deref() != Some(target.primary_key.as_str()) {
                return invalid(format!("join key `{fk}` does not target the primary key of `{}`", dim.name));
            }
            if !joined.insert(target.dimension.as_str()) {
                return invalid(format!("dimension `{}` is referenced by more than one join key", target.dimension));
            }
        }
        Ok(())
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<StarSchema, SchemaError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| SchemaError::Io { path: path.display().to_string(), source })?;
    StarSchema::from_json(&text)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// On-disk layout.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    #[serde(default = "default_page_size")]
    page_size: u64,
    fact: FactFile,
    dimensions: Vec<DimensionFile>,
}

fn default_page_size() -> u64 {
    DEFAULT_PAGE_SIZE
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactFile {
    name: String,
    row_count: u64,
    row_width: u64,
    attributes: Vec<AttributeStats>,
    #[serde(default)]
    join_keys: Vec<JoinKeyFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinKeyFile {
    fact_attribute: String,
    dimension: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionFile {
    name: String,
    row_count: u64,
    row_width: u64,
    attributes: Vec<AttributeStats>,
    primary_key: String,
}

impl SchemaFile {
    fn into_schema(self) -> StarSchema {
        let dimensions: Vec<TableStats> = self
            .dimensions
            .into_iter()
            .map(|d| TableStats {
                name: d.name,
                row_count: d.row_count,
                row_width: d.row_width,
                attributes: d.attributes,
                primary_key: Some(d.primary_key),
            })
            .collect();
        // Unknown dimensions get an empty primary key here and are rejected by validate().
        let join_keys = self
            .fact
            .join_keys
            .into_iter()
            .map(|jk| {
                let pk = dimensions
                    .iter()
                    .find(|d| d.name == jk.dimension)
                    .and_then(|d| d.primary_key.clone())
                    .unwrap_or_default();
                (jk.fact_attribute, JoinTarget { dimension: jk.dimension, primary_key: pk })
            })
            .collect();
        StarSchema {
            fact: TableStats {
                name: self.fact.name,
                row_count: self.fact.row_count,
                row_width: self.fact.row_width,
                attributes: self.fact.attributes,
                primary_key: None,
            },
            dimensions,
            join_keys,
            page_size: self.page_size,
        }
    }

    fn from_schema(schema: &StarSchema) -> Self {
        SchemaFile {
            page_size: schema.page_size,
            fact: FactFile {
                name: schema.fact.name.clone(),
                row_count: schema.fact.row_count,
                row_width: schema.fact.row_width,
                attributes: schema.fact.attributes.clone(),
                join_keys: schema
                    .join_keys
                    .iter()
                    .map(|(fk, t)| JoinKeyFile { fact_attribute: fk.clone(), dimension: t.dimension.clone() })
                    .collect(),
            },
            dimensions: schema
                .dimensions
                .iter()
                .map(|d| DimensionFile {
                    name: d.name.clone(),
                    row_count: d.row_count,
                    row_width: d.row_width,
                    attributes: d.attributes.clone(),
                    primary_key: d.primary_key.clone().unwrap_or_default(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SALES: &str = r#"{
        "fact": {
            "name": "sales", "row_count": 100000, "row_width": 100,
            "attributes": [
                {"name": "cust_id", "distinct_values": 1000},
                {"name": "amount", "distinct_values": 5000}
            ],
            "join_keys": [{"fact_attribute": "cust_id", "dimension": "customer"}]
        },
        "dimensions": [{
            "name": "customer", "row_count": 1000, "row_width": 200,
            "primary_key": "id",
            "attributes": [
                {"name": "id", "distinct_values": 1000},
                {"name": "city", "distinct_values": 50}
            ]
        }]
    }"#;

    fn table(rows: u64, width: u64) -> TableStats {
        TableStats { name: "t".into(), row_count: rows, row_width: width, attributes: vec![], primary_key: None }
    }

    #[test]
    fn loads_single_dimension_schema() {
        let s = StarSchema::from_json(SALES).unwrap();
        assert_eq!(s.page_size, 8192);
        assert_eq!(s.fact.row_count, 100_000);
        assert_eq!(s.dimensions.len(), 1);
        let city = s.dimension_attribute(&AttrRef::new("customer", "city")).unwrap();
        assert_eq!(city.distinct_values, 50);
        assert_eq!(s.join_key_for("customer").unwrap().0, "cust_id");
        assert_eq!(s.join_keys["cust_id"].primary_key, "id");
    }

    #[test]
    fn missing_primary_key_attribute_is_rejected() {
        let text = SALES.replace(r#""primary_key": "id""#, r#""primary_key": "cid""#);
        let err = StarSchema::from_json(&text).unwrap_err();
        assert!(matches!(err, SchemaError::Validation(m) if m.contains("cid")));
    }

    #[test]
    fn empty_fact_is_legal() {
        let text = SALES.replace(r#""row_count": 100000"#, r#""row_count": 0"#);
        let s = StarSchema::from_json(&text).unwrap();
        assert_eq!(s.fact_pages(), 0);
    }

    #[test]
    fn dangling_join_key_and_zero_cardinality() {
        let text = SALES.replace(r#""dimension": "customer""#, r#""dimension": "client""#);
        assert!(matches!(
            StarSchema::from_json(&text),
            Err(SchemaError::Validation(m)) if m.contains("client")
        ));
        let text = SALES.replace(r#""distinct_values": 50}"#, r#""distinct_values": 0}"#);
        assert!(matches!(
            StarSchema::from_json(&text),
            Err(SchemaError::Validation(m)) if m.contains("zero distinct_values")
        ));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = SALES.replace(r#""row_width": 200,"#, r#""row_width": 200, "rows": 3,"#);
        match StarSchema::from_json(&text) {
            Err(SchemaError::Parse { message, line, .. }) => {
                assert!(message.contains("rows"), "{message}");
                assert!(line > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn page_count_examples() {
        assert_eq!(page_count(&table(100_000, 100), 8192), 1221);
        assert_eq!(page_count(&table(1000, 200), 8192), 25);
        assert_eq!(page_count(&table(0, 77), 8192), 0);
    }

    #[test]
    fn serialize_round_trip() {
        let s = StarSchema::from_json(SALES).unwrap();
        assert_eq!(StarSchema::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn attr_ref_parsing() {
        assert_eq!("a.b".parse::<AttrRef>().unwrap(), AttrRef::new("a", "b"));
        assert!("ab".parse::<AttrRef>().is_err());
        assert!("a.b.c".parse::<AttrRef>().is_err());
    }

    proptest! {
        #[test]
        fn page_count_monotone(rows in 0u64..1_000_000, width in 1u64..4096, dr in 0u64..1000, dw in 0u64..64) {
            let base = page_count(&table(rows, width), 8192);
            prop_assert!(page_count(&table(rows + dr, width), 8192) >= base);
            prop_assert!(page_count(&table(rows, width + dw), 8192) >= base);
            prop_assert_eq!(base == 0, rows == 0);
        }
    }
}

//! The query-attribute extraction context: one weighted transaction per
//! workload query, one item per indexable attribute.
//!
//! Rows are kept horizontally (sorted item ids, for serialization and the
//! brute-force paths) and vertically (one transaction-id bitset per item,
//! for the miner). Both views are rebuilt together on every new version.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::bitset::BitSet;
use crate::schema::AttrRef;
use crate::workload::{extract_indexable, AnalyticalQuery, WorkloadBatch};

pub type ItemId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("duplicate transaction id `{0}`")]
    DuplicateTransaction(String),
    #[error("added transaction `{0}` collides with a retained transaction")]
    IdCollision(String),
    #[error("transaction `{0}` is both added and removed in the same delta")]
    AddedAndRemoved(String),
    #[error("unknown item id {0}")]
    UnknownItem(ItemId),
    #[error("duplicate dictionary entry `{0}`")]
    DuplicateAttribute(AttrRef),
}

/// Append-only bijection between dense item ids and attribute identities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemDictionary {
    attrs: Vec<AttrRef>,
    ids: BTreeMap<AttrRef, ItemId>,
}

impl ItemDictionary {
    pub fn from_attrs(attrs: Vec<AttrRef>) -> Result<Self, ContextError> {
        let mut d = Self::default();
        for a in attrs {
            if d.ids.contains_key(&a) {
                return Err(ContextError::DuplicateAttribute(a));
            }
            d.intern(a);
        }
        Ok(d)
    }

    pub fn intern(&mut self, attr: AttrRef) -> ItemId {
        if let Some(&id) = self.ids.get(&attr) {
            return id;
        }
        let id = ItemId::try_from(self.attrs.len()).expect("item dictionary overflow");
        self.ids.insert(attr.clone(), id);
        self.attrs.push(attr);
        id
    }

    pub fn id(&self, attr: &AttrRef) -> Option<ItemId> {
        self.ids.get(attr).copied()
    }

    pub fn attr(&self, id: ItemId) -> Option<&AttrRef> {
        self.attrs.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    /// Attributes in id order.
    pub fn attrs(&self) -> &[AttrRef] {
        &self.attrs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub id: String,
    /// Sorted, duplicate-free.
    pub items: Vec<ItemId>,
    pub weight: u64,
    /// Advisory cycle that ingested this transaction.
    pub cycle: u64,
    /// The originating query, when the row came from a workload.
    pub query: Option<Arc<AnalyticalQuery>>,
}

impl Transaction {
    pub fn contains_all(&self, items: &[ItemId]) -> bool {
        items.iter().all(|i| self.items.binary_search(i).is_ok())
    }
}

/// A row waiting to be added: attribute identities not yet mapped to item ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewRow {
    pub id: String,
    pub attrs: BTreeSet<AttrRef>,
    pub weight: u64,
    pub query: Option<Arc<AnalyticalQuery>>,
}

impl NewRow {
    pub fn from_query(query: &AnalyticalQuery) -> Self {
        Self {
            id: query.id.clone(),
            attrs: extract_indexable(query),
            weight: query.weight.max(1),
            query: Some(Arc::new(query.clone())),
        }
    }
}

/// Workload change between two advisory cycles: rows added (d⁺) and ids removed (d⁻).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaBatch {
    pub added: Vec<NewRow>,
    pub removed_ids: BTreeSet<String>,
    /// Stamped onto added transactions.
    pub cycle: u64,
}

impl DeltaBatch {
    pub fn new(added: &WorkloadBatch, removed_ids: BTreeSet<String>) -> Result<Self, ContextError> {
        Self::from_rows(added.queries.iter().map(NewRow::from_query).collect(), removed_ids)
    }

    pub fn from_rows(added: Vec<NewRow>, removed_ids: BTreeSet<String>) -> Result<Self, ContextError> {
        if let Some(r) = added.iter().find(|r| removed_ids.contains(&r.id)) {
            return Err(ContextError::AddedAndRemoved(r.id.clone()));
        }
        Ok(Self { added, removed_ids, cycle: 0 })
    }

    pub fn with_cycle(mut self, cycle: u64) -> Self {
        self.cycle = cycle;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed_ids.is_empty()
    }
}

/// Per-item transaction-id sets over the current row order.
#[derive(Debug, Clone, Default)]
pub struct VerticalIndex {
    pub tidsets: Vec<BitSet>,
    /// `None` when every weight is 1, so supports are plain popcounts.
    pub weights: Option<Vec<u64>>,
    pub rows: usize,
}

impl VerticalIndex {
    fn build(items: usize, transactions: &[Arc<Transaction>]) -> Self {
        let rows = transactions.len();
        let mut tidsets = vec![BitSet::with_capacity(rows); items];
        for (tid, t) in transactions.iter().enumerate() {
            for &i in &t.items {
                tidsets[i as usize].insert(tid);
            }
        }
        let weights =
            transactions.iter().any(|t| t.weight != 1).then(|| transactions.iter().map(|t| t.weight).collect());
        Self { tidsets, weights, rows }
    }

    /// This index with `appended` rows added after the existing ones.
    fn extended(&self, items: usize, appended: &[Arc<Transaction>]) -> Self {
        let rows = self.rows + appended.len();
        let mut tidsets = self.tidsets.clone();
        tidsets.resize(items, BitSet::with_capacity(rows));
        for t in &mut tidsets {
            t.grow(rows);
        }
        for (n, t) in appended.iter().enumerate() {
            for &i in &t.items {
                tidsets[i as usize].insert(self.rows + n);
            }
        }
        let weights = match &self.weights {
            None if appended.iter().all(|t| t.weight == 1) => None,
            old => {
                let mut w = old.clone().unwrap_or_else(|| vec![1; self.rows]);
                w.extend(appended.iter().map(|t| t.weight));
                Some(w)
            }
        };
        Self { tidsets, weights, rows }
    }

    /// Support of `items` counted over rows `from..` only.
    pub fn support_from(&self, items: &[ItemId], from: usize) -> u64 {
        if items.is_empty() {
            return match &self.weights {
                None => self.rows.saturating_sub(from) as u64,
                Some(ws) => ws.iter().skip(from).sum(),
            };
        }
        let first = from / 64;
        (first..self.rows.div_ceil(64))
            .map(|wi| {
                let mut acc = if wi == first { u64::MAX << (from % 64) } else { u64::MAX };
                for &i in items {
                    acc &= self.tidsets[i as usize].words().get(wi).copied().unwrap_or(0);
                }
                match &self.weights {
                    None => u64::from(acc.count_ones()),
                    Some(ws) => BitSet::word_weight(wi, acc, ws),
                }
            })
            .sum()
    }

    pub fn support_of(&self, tids: &BitSet) -> u64 {
        tids.weighted_len(self.weights.as_deref())
    }

    pub fn all_rows(&self) -> BitSet {
        BitSet::from_indices(self.rows, 0..self.rows)
    }
}

/// An immutable version of the transaction database.
#[derive(Debug, Clone, Default)]
pub struct TransactionDatabase {
    dictionary: ItemDictionary,
    transactions: Vec<Arc<Transaction>>,
    total_weight: u64,
    vertical: Arc<VerticalIndex>,
}

impl PartialEq for TransactionDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.dictionary == other.dictionary && self.transactions == other.transactions
    }
}

impl TransactionDatabase {
    /// Assembles a database from already-mapped transactions.
    pub fn from_parts(dictionary: ItemDictionary, transactions: Vec<Transaction>) -> Result<Self, ContextError> {
        let mut seen = HashSet::new();
        for t in &transactions {
            if !seen.insert(t.id.as_str()) {
                return Err(ContextError::DuplicateTransaction(t.id.clone()));
            }
            if let Some(&bad) = t.items.iter().find(|&&i| i as usize >= dictionary.len()) {
                return Err(ContextError::UnknownItem(bad));
            }
        }
        Ok(Self::assemble(dictionary, transactions.into_iter().map(Arc::new).collect()))
    }

    fn assemble(dictionary: ItemDictionary, transactions: Vec<Arc<Transaction>>) -> Self {
        let total_weight = transactions.iter().map(|t| t.weight).sum();
        let vertical = Arc::new(VerticalIndex::build(dictionary.len(), &transactions));
        Self { dictionary, transactions, total_weight, vertical }
    }

    /// Synthetic database over items `items.i0 .. items.i{n-1}`; rows get ids `t0, t1, ...`.
    pub fn from_item_rows(n_items: usize, rows: &[(Vec<ItemId>, u64)]) -> Self {
        let dictionary =
            ItemDictionary::from_attrs((0..n_items).map(|i| AttrRef::new("items", format!("i{i}"))).collect())
                .expect("synthetic names are distinct");
        let transactions = rows
            .iter()
            .enumerate()
            .map(|(n, (items, weight))| {
                let mut items = items.clone();
                items.sort_unstable();
                items.dedup();
                Transaction { id: format!("t{n}"), items, weight: *weight, cycle: 0, query: None }
            })
            .collect();
        Self::from_parts(dictionary, transactions).expect("synthetic rows are consistent")
    }

    pub fn dictionary(&self) -> &ItemDictionary {
        &self.dictionary
    }

    pub fn transactions(&self) -> &[Arc<Transaction>] {
        &self.transactions
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn vertical(&self) -> &VerticalIndex {
        &self.vertical
    }

    /// The originating queries, in row order.
    pub fn queries(&self) -> impl Iterator<Item = &AnalyticalQuery> {
        self.transactions.iter().filter_map(|t| t.query.as_deref())
    }

    /// Whether the bit QA[row][item] is set.
    pub fn bit(&self, row: usize, item: ItemId) -> bool {
        self.transactions[row].items.binary_search(&item).is_ok()
    }

    /// Total weight of the transactions containing every item in `items`.
    pub fn support(&self, items: &[ItemId]) -> Result<u64, ContextError> {
        if let Some(&bad) = items.iter().find(|&&i| i as usize >= self.dictionary.len()) {
            return Err(ContextError::UnknownItem(bad));
        }
        let Some((&first, rest)) = items.split_first() else {
            return Ok(self.total_weight);
        };
        let tids = rest.iter().fold(self.vertical.tidsets[first as usize].clone(), |acc, &i| {
            acc.intersection(&self.vertical.tidsets[i as usize])
        });
        Ok(self.vertical.support_of(&tids))
    }
}

fn map_row(dictionary: &mut ItemDictionary, row: NewRow, cycle: u64) -> Transaction {
    let mut items: Vec<ItemId> = row.attrs.into_iter().map(|a| dictionary.intern(a)).collect();
    items.sort_unstable();
    Transaction { id: row.id, items, weight: row.weight.max(1), cycle, query: row.query }
}

/// Builds the context for a batch, appending unseen attributes to `dictionary`.
pub fn build_context(batch: &WorkloadBatch, dictionary: ItemDictionary) -> Result<TransactionDatabase, ContextError> {
    let delta = DeltaBatch::new(batch, BTreeSet::new())?;
    apply_delta(&TransactionDatabase::assemble(dictionary, Vec::new()), &delta)
}

/// Computes `(D ∪ d⁺) − d⁻`.
///
/// Removed ids that are not present are logged and ignored.
pub fn apply_delta(database: &TransactionDatabase, delta: &DeltaBatch) -> Result<TransactionDatabase, ContextError> {
    let present: HashSet<&str> = database.transactions.iter().map(|t| t.id.as_str()).collect();
    for id in &delta.removed_ids {
        if !present.contains(id.as_str()) {
            log::warn!("removed transaction `{id}` is not in the database");
        }
    }
    let mut added_ids = HashSet::new();
    for row in &delta.added {
        if delta.removed_ids.contains(&row.id) {
            return Err(ContextError::AddedAndRemoved(row.id.clone()));
        }
        if present.contains(row.id.as_str()) {
            return Err(ContextError::IdCollision(row.id.clone()));
        }
        if !added_ids.insert(row.id.as_str()) {
            return Err(ContextError::DuplicateTransaction(row.id.clone()));
        }
    }

    let mut dictionary = database.dictionary.clone();
    let appended: Vec<Arc<Transaction>> =
        delta.added.iter().map(|row| Arc::new(map_row(&mut dictionary, row.clone(), delta.cycle))).collect();
    let removes_any = database.transactions.iter().any(|t| delta.removed_ids.contains(&t.id));
    if !removes_any {
        let vertical = database.vertical.extended(dictionary.len(), &appended);
        let mut transactions = database.transactions.clone();
        transactions.extend(appended);
        let total_weight = transactions.iter().map(|t| t.weight).sum();
        return Ok(TransactionDatabase { dictionary, transactions, total_weight, vertical: Arc::new(vertical) });
    }
    let mut retained: Vec<Arc<Transaction>> =
        database.transactions.iter().filter(|t| !delta.removed_ids.contains(&t.id)).cloned().collect();
    retained.extend(appended);
    Ok(TransactionDatabase::assemble(dictionary, retained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: &str, attrs: &[&str]) -> NewRow {
        NewRow { id: id.into(), attrs: attrs.iter().map(|a| AttrRef::new("d", *a)).collect(), weight: 1, query: None }
    }

    fn abcd() -> TransactionDatabase {
        // {a,b,c},{a,b},{a,c},{b,c,d}
        TransactionDatabase::from_item_rows(
            4,
            &[(vec![0, 1, 2], 1), (vec![0, 1], 1), (vec![0, 2], 1), (vec![1, 2, 3], 1)],
        )
    }

    fn brute_support(db: &TransactionDatabase, items: &[ItemId]) -> u64 {
        db.transactions().iter().filter(|t| t.contains_all(items)).map(|t| t.weight).sum()
    }

    #[test]
    fn builds_dictionary_in_first_seen_order() {
        let delta = DeltaBatch::from_rows(vec![row("q1", &["a"]), row("q2", &["a", "b"])], BTreeSet::new()).unwrap();
        let db = apply_delta(&TransactionDatabase::default(), &delta).unwrap();
        assert_eq!(db.dictionary().id(&AttrRef::new("d", "a")), Some(0));
        assert_eq!(db.dictionary().id(&AttrRef::new("d", "b")), Some(1));
        assert_eq!(db.transactions()[0].items, vec![0]);
        assert_eq!(db.transactions()[1].items, vec![0, 1]);
        assert!(db.bit(1, 1) && !db.bit(0, 1));
    }

    #[test]
    fn empty_batch_and_empty_row() {
        let dict = ItemDictionary::from_attrs(vec![AttrRef::new("d", "x")]).unwrap();
        let db = build_context(&WorkloadBatch::default(), dict.clone()).unwrap();
        assert!(db.is_empty());
        assert_eq!(db.dictionary(), &dict);

        let delta = DeltaBatch::from_rows(vec![row("q", &[])], BTreeSet::new()).unwrap();
        let db = apply_delta(&db, &delta).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.total_weight(), 1);
        assert!(db.transactions()[0].items.is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let delta = DeltaBatch::from_rows(vec![row("q", &["a"]), row("q", &["b"])], BTreeSet::new()).unwrap();
        assert_eq!(
            apply_delta(&TransactionDatabase::default(), &delta),
            Err(ContextError::DuplicateTransaction("q".into()))
        );
        let db = abcd();
        let delta = DeltaBatch::from_rows(vec![row("t1", &["a"])], BTreeSet::new()).unwrap();
        assert_eq!(apply_delta(&db, &delta), Err(ContextError::IdCollision("t1".into())));
        assert!(DeltaBatch::from_rows(vec![row("t9", &[])], BTreeSet::from(["t9".into()])).is_err());
    }

    #[test]
    fn delta_examples() {
        let db = abcd();
        let ids = |db: &TransactionDatabase| db.transactions().iter().map(|t| t.id.clone()).collect::<Vec<_>>();

        let add = DeltaBatch::from_rows(vec![row("t4", &["a"])], BTreeSet::new()).unwrap();
        assert_eq!(ids(&apply_delta(&db, &add).unwrap()), ["t0", "t1", "t2", "t3", "t4"]);

        let rm = DeltaBatch::from_rows(vec![], BTreeSet::from(["t0".into(), "t1".into()])).unwrap();
        assert_eq!(ids(&apply_delta(&db, &rm).unwrap()), ["t2", "t3"]);

        let single = TransactionDatabase::from_item_rows(1, &[(vec![0], 1)]);
        let replace = DeltaBatch::from_rows(vec![row("t1", &["z"])], BTreeSet::from(["t0".into()])).unwrap();
        assert_eq!(ids(&apply_delta(&single, &replace).unwrap()), ["t1"]);

        // Unknown removals are tolerated.
        let ghost = DeltaBatch::from_rows(vec![], BTreeSet::from(["nope".into()])).unwrap();
        assert_eq!(apply_delta(&db, &ghost).unwrap(), db);
    }

    #[test]
    fn support_examples() {
        let db = abcd();
        assert_eq!(db.support(&[0, 1]).unwrap(), 2);
        assert_eq!(db.support(&[]).unwrap(), 4);
        assert_eq!(db.support(&[0, 3]).unwrap(), 0);
        assert_eq!(db.support(&[9]), Err(ContextError::UnknownItem(9)));
        for items in [[0u32, 1], [1, 2], [2, 3]] {
            assert_eq!(db.support(&items).unwrap(), brute_support(&db, &items));
        }
    }

    #[test]
    fn weights_multiply_support() {
        let db = TransactionDatabase::from_item_rows(2, &[(vec![0, 1], 3), (vec![0], 1)]);
        assert_eq!(db.total_weight(), 4);
        assert_eq!(db.support(&[0]).unwrap(), 4);
        assert_eq!(db.support(&[0, 1]).unwrap(), 3);
    }

    fn arb_db() -> impl Strategy<Value = TransactionDatabase> {
        prop::collection::vec((prop::collection::vec(0u32..8, 0..6), 1u64..4), 0..25)
            .prop_map(|rows| TransactionDatabase::from_item_rows(8, &rows))
    }

    proptest! {
        #[test]
        fn support_is_anti_monotone(db in arb_db(), x in prop::collection::btree_set(0u32..8, 0..4), extra in prop::collection::btree_set(0u32..8, 0..4)) {
            let small: Vec<_> = x.iter().copied().collect();
            let big: Vec<_> = x.union(&extra).copied().collect();
            prop_assert!(db.support(&big).unwrap() <= db.support(&small).unwrap());
            prop_assert_eq!(db.support(&big).unwrap(), brute_support(&db, &big));
        }

        #[test]
        fn complementary_deltas_restore_the_database(db in arb_db(), extra in prop::collection::vec(prop::collection::btree_set(0u32..8, 0..4), 0..6)) {
            let rows: Vec<NewRow> = extra.iter().enumerate().map(|(n, items)| NewRow {
                id: format!("new{n}"),
                attrs: items.iter().map(|&i| db.dictionary().attr(i).unwrap().clone()).collect(),
                weight: 1,
                query: None,
            }).collect();
            let ids: BTreeSet<String> = rows.iter().map(|r| r.id.clone()).collect();
            let forward = apply_delta(&db, &DeltaBatch::from_rows(rows, BTreeSet::new()).unwrap()).unwrap();
            let back = apply_delta(&forward, &DeltaBatch::from_rows(vec![], ids).unwrap()).unwrap();
            prop_assert_eq!(back, db);
        }

        #[test]
        fn dictionary_is_append_only(batches in prop::collection::vec(prop::collection::vec(prop::collection::btree_set(0u8..12, 0..4), 0..5), 1..5)) {
            let mut db = TransactionDatabase::default();
            let mut history: Vec<AttrRef> = Vec::new();
            for (b, rows) in batches.iter().enumerate() {
                let added = rows.iter().enumerate().map(|(n, items)| NewRow {
                    id: format!("b{b}r{n}"),
                    attrs: items.iter().map(|i| AttrRef::new("d", format!("a{i}"))).collect(),
                    weight: 1,
                    query: None,
                }).collect();
                let removed = db.transactions().iter().map(|t| t.id.clone()).collect();
                db = apply_delta(&db, &DeltaBatch::from_rows(added, removed).unwrap()).unwrap();
                prop_assert!(db.dictionary().attrs().starts_with(&history));
                history = db.dictionary().attrs().to_vec();
            }
        }
    }
}

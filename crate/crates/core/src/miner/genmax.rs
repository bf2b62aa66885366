//! Backtracking maximal-itemset search.
//!
//! Items are explored in ascending support order. Each node carries the
//! transaction-id set of its itemset; extensions are filtered by tidset
//! intersection. A branch is abandoned as soon as the current itemset plus
//! every remaining extension fits inside a known maximal itemset. Known
//! maximal itemsets are projected per level (only those containing the
//! current prefix are kept), so superset checks touch a shrinking list.

use super::{Itemset, MiningParameters};
use crate::bitset::BitSet;
use crate::context::{ItemId, TransactionDatabase, VerticalIndex};

struct Node {
    item: ItemId,
    tids: BitSet,
    support: u64,
}

struct Search<'a> {
    vertical: &'a VerticalIndex,
    threshold: u64,
    /// Rows from `.0` on must also reach support `.1`.
    tail: Option<(usize, u64)>,
    n_items: usize,
    /// Item masks of every maximal itemset known so far (seeds first).
    known: Vec<BitSet>,
    supports: Vec<u64>,
}

impl<'a> Search<'a> {
    fn new(vertical: &'a VerticalIndex, threshold: u64, n_items: usize) -> Self {
        Self { vertical, threshold, tail: None, n_items, known: Vec::new(), supports: Vec::new() }
    }

    fn support(&self, tids: &BitSet) -> Option<u64> {
        let support = self.vertical.support_of(tids);
        let tail_ok =
            self.tail.is_none_or(|(from, min)| tids.weighted_len_from(from, self.vertical.weights.as_deref()) >= min);
        (support >= self.threshold && tail_ok).then_some(support)
    }

    fn singles(&self, within: Option<&BitSet>) -> Vec<Node> {
        let mut singles: Vec<Node> = self
            .vertical
            .tidsets
            .iter()
            .enumerate()
            .filter(|(item, _)| within.is_none_or(|w| w.contains(*item)))
            .filter_map(|(item, tids)| {
                self.support(tids).map(|support| Node { item: item as ItemId, tids: tids.clone(), support })
            })
            .collect();
        singles.sort_by_key(|node| (node.support, node.item));
        singles
    }

    fn record(&mut self, mask: BitSet, support: u64) -> usize {
        self.known.push(mask);
        self.supports.push(support);
        self.known.len() - 1
    }

    /// `local` holds the indices of known maximal sets containing `head`.
    fn backtrack(&mut self, head: &BitSet, combine: &[Node], local: &mut Vec<usize>) {
        let n = combine.len();
        let mut suffix = vec![BitSet::with_capacity(self.n_items); n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1].clone();
            suffix[i].insert(combine[i].item as usize);
        }

        for (i, x) in combine.iter().enumerate() {
            // head ∪ {x} ∪ tail already covered: so is every later sibling.
            if local.iter().any(|&m| suffix[i].is_subset(&self.known[m])) {
                return;
            }

            let mut next_head = head.clone();
            next_head.insert(x.item as usize);

            let mut next: Vec<Node> = combine[i + 1..]
                .iter()
                .filter_map(|y| {
                    if let Some((from, min)) = self.tail {
                        let weights = self.vertical.weights.as_deref();
                        if x.tids.intersection_weighted_len_from(&y.tids, from, weights) < min {
                            return None;
                        }
                    }
                    let tids = x.tids.intersection(&y.tids);
                    self.support(&tids).map(|support| Node { item: y.item, tids, support })
                })
                .collect();
            next.sort_by_key(|node| (node.support, node.item));

            let mut child_local: Vec<usize> =
                local.iter().copied().filter(|&m| self.known[m].contains(x.item as usize)).collect();

            if next.is_empty() {
                if child_local.is_empty() {
                    let idx = self.record(next_head, x.support);
                    local.push(idx);
                }
            } else {
                let before = self.known.len();
                self.backtrack(&next_head, &next, &mut child_local);
                local.extend(before..self.known.len());
            }
        }
    }
}

/// All maximal frequent itemsets at `max(1, ceil(minsup × total_weight))`.
pub fn mine_maximal(database: &TransactionDatabase, parameters: &MiningParameters) -> Vec<Itemset> {
    mine_maximal_seeded(database, parameters, &[])
}

/// Same result as [`mine_maximal`], with the pruning structure primed by
/// `seeds`. Seeds are re-counted against `database`; infrequent ones are
/// ignored and frequent non-maximal ones are filtered from the output.
pub fn mine_maximal_seeded(
    database: &TransactionDatabase,
    parameters: &MiningParameters,
    seeds: &[Itemset],
) -> Vec<Itemset> {
    let threshold = parameters.absolute_threshold(database.total_weight());
    mine_at(database, threshold, seeds)
}

/// Maximal itemsets with support at least `threshold`.
pub(crate) fn mine_at(database: &TransactionDatabase, threshold: u64, seeds: &[Itemset]) -> Vec<Itemset> {
    if database.total_weight() < threshold {
        return Vec::new();
    }
    let n_items = database.dictionary().len();
    let mut search = Search::new(database.vertical(), threshold, n_items);
    for seed in seeds {
        if seed.items.is_empty() || seed.items.iter().any(|&i| i as usize >= n_items) {
            continue;
        }
        let support = database.support(&seed.items).expect("seed items are in range");
        if support >= threshold {
            search.record(mask(n_items, &seed.items), support);
        }
    }
    search.settle(0);
    let split = search.known.len();
    let singles = search.singles(None);
    let mut local: Vec<usize> = (0..split).collect();
    search.backtrack(&BitSet::with_capacity(n_items), &singles, &mut local);
    search.finish(split)
}

/// Maximal itemsets with support at least `threshold` that also reach
/// `tail_threshold` on the rows from `tail_from` on and lie inside no member
/// of `covered`. Every itemset meeting both thresholds is a subset of a
/// result or of a member of `covered`.
pub(crate) fn mine_uncovered(
    database: &TransactionDatabase,
    threshold: u64,
    (tail_from, tail_threshold): (usize, u64),
    covered: &[Vec<ItemId>],
) -> Vec<Itemset> {
    if database.total_weight() < threshold {
        return Vec::new();
    }
    let n_items = database.dictionary().len();
    let mut search = Search::new(database.vertical(), threshold, n_items);
    search.tail = Some((tail_from, tail_threshold));
    for c in covered {
        search.record(mask(n_items, c), 0);
    }
    let base = search.known.len();
    let singles = search.singles(None);
    let mut local: Vec<usize> = (0..base).collect();
    search.backtrack(&BitSet::with_capacity(n_items), &singles, &mut local);
    search.known.drain(..base);
    search.supports.drain(..base);
    search.finish(0)
}

/// Maximal itemsets at `threshold` when every frequent itemset lies inside a
/// member of `settled`, `found` or `unverified`. Members of `settled` (an
/// antichain) and `found` are frequent with counted supports.
///
/// Unverified members that turn out frequent are maximal candidates as they
/// stand. Each infrequent one is searched within its own items, pruned by
/// everything found so far.
pub(crate) fn mine_covered(
    database: &TransactionDatabase,
    threshold: u64,
    settled: &[Itemset],
    found: &[Itemset],
    unverified: &[Vec<ItemId>],
) -> Vec<Itemset> {
    if database.total_weight() < threshold {
        return Vec::new();
    }
    let vertical = database.vertical();
    let n_items = database.dictionary().len();
    let mut search = Search::new(vertical, threshold, n_items);
    for f in settled.iter().chain(found) {
        search.record(mask(n_items, &f.items), f.support);
    }

    let mut members: Vec<&Vec<ItemId>> =
        unverified.iter().filter(|c| !c.is_empty() && c.iter().all(|&i| (i as usize) < n_items)).collect();
    members.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    members.dedup();

    let mut pending = Vec::new();
    for items in members {
        let support = database.support(items).expect("cover items are in range");
        if support >= threshold {
            search.record(mask(n_items, items), support);
        } else {
            pending.push(mask(n_items, items));
        }
    }
    for within in pending {
        let size = within.len();
        let overlaps: Vec<(usize, usize)> = (0..search.known.len())
            .map(|k| (k, search.known[k].intersection_len(&within)))
            .filter(|&(_, n)| n >= 2)
            .collect();
        // Every proper subset lies in a subset one item smaller; when each of
        // those is covered nothing new can be found inside `within`.
        let mut uncovered = within.clone();
        for &(k, n) in &overlaps {
            if n + 1 == size {
                if let Some(missing) = within.iter().find(|&i| !search.known[k].contains(i)) {
                    uncovered.remove(missing);
                }
            }
        }
        if uncovered.is_empty() {
            continue;
        }
        let mut projected: Vec<BitSet> = overlaps.iter().map(|&(k, _)| search.known[k].intersection(&within)).collect();
        projected.sort_unstable_by(|a, b| a.words().cmp(b.words()));
        projected.dedup();
        let mut inner = Search::new(vertical, threshold, n_items);
        for i in maximal_masks(&projected) {
            inner.record(projected[i].clone(), 0);
        }
        let base = inner.known.len();
        let singles = inner.singles(Some(&within));
        let mut local: Vec<usize> = (0..base).collect();
        inner.backtrack(&BitSet::with_capacity(n_items), &singles, &mut local);
        for (mask, support) in inner.known.into_iter().zip(inner.supports).skip(base) {
            search.record(mask, support);
        }
    }
    search.settle(settled.len());
    search.finish(settled.len())
}

fn mask(n_items: usize, items: &[ItemId]) -> BitSet {
    BitSet::from_indices(n_items, items.iter().map(|&i| i as usize))
}

impl Search<'_> {
    /// Reduces `known[from..]` to its members not contained in another.
    fn settle(&mut self, from: usize) {
        let keep = maximal_masks(&self.known[from..]);
        let known: Vec<BitSet> = keep.iter().map(|&i| self.known[from + i].clone()).collect();
        let supports: Vec<u64> = keep.iter().map(|&i| self.supports[from + i]).collect();
        self.known.truncate(from);
        self.supports.truncate(from);
        self.known.extend(known);
        self.supports.extend(supports);
    }

    /// Known itemsets not contained in another, sorted. `known[..split]` and
    /// `known[split..]` must each be pairwise incomparable already, which
    /// holds for the leaves of a single search.
    fn finish(self, split: usize) -> Vec<Itemset> {
        let (old, new) = self.known.split_at(split);
        let fresh: Vec<usize> =
            (0..new.len()).filter(|&i| !old.iter().any(|o| new[i].is_subset(o))).map(|i| i + split).collect();
        let kept = (0..split).filter(|&i| !fresh.iter().any(|&f| self.known[i].is_subset(&self.known[f])));
        let mut out: Vec<Itemset> = kept
            .chain(fresh.iter().copied())
            .map(|i| Itemset::new(self.known[i].iter().map(|x| x as ItemId).collect(), self.supports[i]))
            .collect();
        out.sort();
        out
    }
}

/// Indices of masks not contained in another; of equal masks only one is kept.
fn maximal_masks(masks: &[BitSet]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(masks[i].len()));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&k| masks[i].is_subset(&masks[k])) {
            kept.push(i);
        }
    }
    kept
}

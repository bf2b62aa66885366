//! Fixed-width bit vectors used for transaction-id sets and item masks.

use smallvec::{smallvec, SmallVec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitSet {
    words: SmallVec<[u64; 2]>,
}

impl BitSet {
    pub fn with_capacity(bits: usize) -> Self {
        Self { words: smallvec![0; bits.div_ceil(64)] }
    }

    pub fn from_indices(bits: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::with_capacity(bits);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Makes room for `bits` bits without changing the contents.
    pub fn grow(&mut self, bits: usize) {
        let words = bits.div_ceil(64);
        if words > self.words.len() {
            self.words.resize(words, 0);
        }
    }

    /// `|self ∩ other|` without allocating.
    pub fn intersection_len(&self, other: &Self) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        let w = i / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (i % 64);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn remove(&mut self, i: usize) {
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1 << (i % 64));
        }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    pub fn union_with(&mut self, other: &Self) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().enumerate().all(|(i, &w)| {
            let o = other.words.get(i).copied().unwrap_or(0);
            w & !o == 0
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// `(self ∩ other).weighted_len_from(start, weights)` without allocating.
    pub fn intersection_weighted_len_from(&self, other: &Self, start: usize, weights: Option<&[u64]>) -> u64 {
        let first = start / 64;
        let pairs = self.words.iter().zip(&other.words).enumerate().skip(first);
        let masked = pairs.map(|(wi, (a, b))| {
            let w = a & b;
            (wi, if wi == first { w & (u64::MAX << (start % 64)) } else { w })
        });
        match weights {
            None => masked.map(|(_, w)| u64::from(w.count_ones())).sum(),
            Some(ws) => masked.map(|(wi, w)| BitSet::word_weight(wi, w, ws)).sum(),
        }
    }

    /// Sum of `weights` over the bits of word `wi`.
    pub fn word_weight(wi: usize, mut w: u64, weights: &[u64]) -> u64 {
        let mut total = 0;
        while w != 0 {
            total += weights[wi * 64 + w.trailing_zeros() as usize];
            w &= w - 1;
        }
        total
    }

    /// [`BitSet::weighted_len`] restricted to members `>= start`.
    pub fn weighted_len_from(&self, start: usize, weights: Option<&[u64]>) -> u64 {
        let first = start / 64;
        match weights {
            None => self
                .words
                .iter()
                .enumerate()
                .skip(first)
                .map(|(wi, &w)| {
                    let w = if wi == first { w & (u64::MAX << (start % 64)) } else { w };
                    u64::from(w.count_ones())
                })
                .sum(),
            Some(ws) => self.iter().filter(|&i| i >= start).map(|i| ws[i]).sum(),
        }
    }

    /// Sum of `weights[i]` over members; plain cardinality when `weights` is `None`.
    #[inline]
    pub fn weighted_len(&self, weights: Option<&[u64]>) -> u64 {
        match weights {
            None => self.words.iter().map(|w| u64::from(w.count_ones())).sum(),
            Some(ws) => self.iter().map(|i| ws[i]).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_counts() {
        let a = BitSet::from_indices(200, [0, 63, 64, 65, 130, 199]);
        assert_eq!(a.weighted_len_from(0, None), 6);
        assert_eq!(a.weighted_len_from(64, None), 4);
        assert_eq!(a.weighted_len_from(65, None), 3);
        assert_eq!(a.weighted_len_from(200, None), 0);
        let w: Vec<u64> = (0..200).collect();
        assert_eq!(a.weighted_len_from(130, Some(&w)), 329);
        let b = BitSet::from_indices(200, [63, 65, 199]);
        assert_eq!(a.intersection_weighted_len_from(&b, 64, None), 2);
        assert_eq!(a.intersection_weighted_len_from(&b, 0, Some(&w)), 63 + 65 + 199);
    }

    #[test]
    fn basic_ops() {
        let a = BitSet::from_indices(130, [0, 5, 64, 129]);
        let b = BitSet::from_indices(130, [5, 129]);
        assert_eq!(a.len(), 4);
        assert!(b.is_subset(&a));
        assert!(!a.is_subset(&b));
        assert_eq!(a.intersection(&b), b);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 5, 64, 129]);
        assert_eq!(a.weighted_len(Some(&vec![2; 130])), 8);
        assert!(BitSet::default().is_subset(&b));
    }
}

//! Fixed-length bit sets used both for sets of sequences (points of a
//! sequence space) and for sets of atoms of a finite algebra.

use serde::{Deserialize, Serialize};
use std::fmt;

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "BitSetRepr", from = "BitSetRepr")]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct BitSetRepr {
    len: usize,
    members: Vec<usize>,
}

impl From<BitSet> for BitSetRepr {
    fn from(b: BitSet) -> Self {
        BitSetRepr {
            len: b.len,
            members: b.iter().collect(),
        }
    }
}

impl From<BitSetRepr> for BitSet {
    fn from(r: BitSetRepr) -> Self {
        let mut b = BitSet::new(r.len);
        for m in r.members {
            if m < r.len {
                b.insert(m);
            }
        }
        b
    }
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet {
            len,
            words: vec![0; len.div_ceil(WORD)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut b = BitSet {
            len,
            words: vec![!0; len.div_ceil(WORD)],
        };
        b.trim();
        b
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, items: I) -> Self {
        let mut b = BitSet::new(len);
        for i in items {
            b.insert(i);
        }
        b
    }

    pub fn singleton(len: usize, i: usize) -> Self {
        Self::from_indices(len, [i])
    }

    fn trim(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Number of positions (not the number of members).
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] &= !(1 << (i % WORD));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn iter(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            idx: 0,
            cur: self.words.first().copied().unwrap_or(0),
        }
    }

    fn check_len(&self, other: &BitSet) {
        assert_eq!(self.len, other.len, "bit set length mismatch");
    }

    pub fn union_with(&mut self, other: &BitSet) {
        self.check_len(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        self.check_len(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        self.check_len(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.union_with(other);
        r
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.intersect_with(other);
        r
    }

    pub fn difference(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.difference_with(other);
        r
    }

    pub fn complement(&self) -> BitSet {
        let mut r = BitSet {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        r.trim();
        r
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.check_len(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &BitSet) -> bool {
        self.check_len(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        !self.is_disjoint(other)
    }

    /// Smallest member of the symmetric difference, if any.
    pub fn first_difference(&self, other: &BitSet) -> Option<usize> {
        self.check_len(other);
        self.words
            .iter()
            .zip(&other.words)
            .enumerate()
            .find(|(_, (a, b))| *a != *b)
            .map(|(wi, (a, b))| wi * WORD + (a ^ b).trailing_zeros() as usize)
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let tz = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * WORD + tz);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_respects_length() {
        let b = BitSet::from_indices(70, [0, 65]);
        let c = b.complement();
        assert_eq!(c.count(), 68);
        assert!(!c.contains(65));
        assert!(c.contains(69));
        assert!(!c.contains(70));
    }

    #[test]
    fn iteration_and_difference() {
        let a = BitSet::from_indices(130, [1, 64, 129]);
        let b = BitSet::from_indices(130, [1, 129]);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 64, 129]);
        assert_eq!(a.first_difference(&b), Some(64));
        assert!(b.is_subset(&a));
        assert_eq!(BitSet::full(130).count(), 130);
    }

    #[test]
    fn serde_roundtrip() {
        let a = BitSet::from_indices(10, [2, 3, 9]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"len":10,"members":[2,3,9]}"#);
        let back: BitSet = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
    }
}

//! Finite permutations of the coordinate indices.
//!
//! A permutation is stored by its mapping on `0..degree`, trimmed so that the
//! last stored index is moved. Above the stored range it acts as the identity,
//! so two permutations that agree on all of ℕ compare equal regardless of the
//! group they were built in.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("mapping {0:?} is not a bijection on 0..{len}", len = .0.len())]
    NotBijective(Vec<usize>),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = PermError;

    fn try_from(v: Vec<usize>) -> Result<Self, PermError> {
        Permutation::from_mapping(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.map
    }
}

impl Permutation {
    pub fn identity() -> Self {
        Permutation { map: Vec::new() }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self, PermError> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &x in &mapping {
            if x >= n || seen[x] {
                return Err(PermError::NotBijective(mapping));
            }
            seen[x] = true;
        }
        let mut p = Permutation { map: mapping };
        p.trim();
        Ok(p)
    }

    /// The transposition `[i,j]`; `[i,i]` is the identity.
    pub fn transposition(i: usize, j: usize) -> Self {
        let n = i.max(j) + 1;
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(i, j);
        let mut p = Permutation { map };
        p.trim();
        p
    }

    /// Product of transpositions, leftmost applied last: `[a][b](k) = [a]([b](k))`.
    pub fn from_transpositions(ts: &[(usize, usize)]) -> Self {
        ts.iter().fold(Permutation::identity(), |acc, &(i, j)| {
            acc.compose(&Permutation::transposition(i, j))
        })
    }

    fn trim(&mut self) {
        while let Some(&last) = self.map.last() {
            if last == self.map.len() - 1 {
                self.map.pop();
            } else {
                break;
            }
        }
    }

    /// Smallest `n` such that the permutation lies in `G_n`.
    pub fn degree(&self) -> usize {
        self.map.len()
    }

    pub fn in_group(&self, n: usize) -> bool {
        self.degree() <= n
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, k: usize) -> usize {
        self.map.get(k).copied().unwrap_or(k)
    }

    /// `self ∘ other`, i.e. `k ↦ self(other(k))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let n = self.degree().max(other.degree());
        let mut p = Permutation {
            map: (0..n).map(|k| self.apply(other.apply(k))).collect(),
        };
        p.trim();
        p
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.degree()];
        for (k, &v) in self.map.iter().enumerate() {
            inv[v] = k;
        }
        Permutation { map: inv }
    }

    /// The mapping on `0..n`, extended by the identity.
    pub fn extended(&self, n: usize) -> Vec<usize> {
        (0..n.max(self.degree())).map(|k| self.apply(k)).collect()
    }

    /// Decomposition into transpositions, in the order accepted by
    /// [`Permutation::from_transpositions`]. The identity yields an empty list.
    pub fn transpositions(&self) -> Vec<(usize, usize)> {
        // peel t = [k, w(k)] off the left: w = t ∘ (t ∘ w), and t ∘ w fixes 0..=k
        let mut work = self.clone();
        let mut out = Vec::new();
        for k in 0..self.degree() {
            let v = work.apply(k);
            if v != k {
                out.push((k, v));
                work = Permutation::transposition(k, v).compose(&work);
            }
        }
        out
    }

    /// All elements of `G_n` (permutations of `0..n`) in lexicographic order of
    /// their extended mapping; the identity comes first.
    pub fn group(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            out.push(Permutation::from_mapping(cur.clone()).expect("bijection"));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("exists");
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "id");
        }
        for (i, j) in self.transpositions() {
            write!(f, "[{i},{j}]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn group_sizes_and_identity_first() {
        for n in 0..=5 {
            let g = Permutation::group(n);
            assert_eq!(g.len(), factorial(n));
            assert!(g[0].is_identity());
        }
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_mapping(vec![0, 0]).is_err());
        assert!(Permutation::from_mapping(vec![2, 0]).is_err());
    }

    #[test]
    fn trimming_makes_equality_extensional() {
        let a = Permutation::from_mapping(vec![1, 0, 2, 3]).unwrap();
        let b = Permutation::transposition(0, 1);
        assert_eq!(a, b);
        assert_eq!(a.degree(), 2);
        assert!(Permutation::transposition(3, 3).is_identity());
    }

    #[test]
    fn composition_order() {
        let a = Permutation::transposition(0, 1);
        let b = Permutation::transposition(1, 2);
        let ab = a.compose(&b);
        // ab(1) = a(b(1)) = a(2) = 2
        assert_eq!(ab.apply(1), 2);
        assert_eq!(ab.apply(2), 0);
        assert_eq!(ab.apply(0), 1);
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_mapping(v).unwrap())
    }

    proptest! {
        #[test]
        fn transposition_decomposition_roundtrips(p in arb_perm(6)) {
            prop_assert_eq!(Permutation::from_transpositions(&p.transpositions()), p);
        }

        #[test]
        fn group_laws(a in arb_perm(5), b in arb_perm(5), c in arb_perm(5)) {
            prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
            prop_assert!(a.compose(&a.inverse()).is_identity());
            prop_assert_eq!(a.compose(&Permutation::identity()), a.clone());
        }

        #[test]
        fn left_multiplication_permutes_the_group(a in arb_perm(4)) {
            let g = Permutation::group(4);
            let mut shifted: Vec<_> = g.iter().map(|t| a.compose(t)).collect();
            shifted.sort();
            let mut sorted = g.clone();
            sorted.sort();
            prop_assert_eq!(shifted, sorted);
        }
    }
}

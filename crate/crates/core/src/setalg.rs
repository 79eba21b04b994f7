//! Concrete set algebras: subsets of `^d U` for a finite base `U` split into
//! `d` disjoint blocks, with cylindrifications, diagonals and coordinate
//! substitutions, plus generated-subalgebra closure.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bitset::BitSet;
use crate::perm::Permutation;
use crate::verify::{Law, VerificationRecord};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{HashSet, VecDeque};
use std::ops::Range;
use std::sync::Arc;
use thiserror::Error;

/// Hard limit on the number of points in a sequence space.
pub const MAX_POINTS: usize = 1 << 24;
/// Default bound on the number of atoms reached during closure.
pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetAlgError {
    #[error("index {index} out of dimension {dimension}")]
    IndexOutOfDimension { index: usize, dimension: usize },
    #[error("permutation {perm} is not in G_{bound}")]
    PermutationOutOfBound { perm: String, bound: usize },
    #[error("substitution bound {n} exceeds dimension {dimension}")]
    BoundExceedsDimension { n: usize, dimension: usize },
    #[error("a base needs at least one block")]
    NoBlocks,
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("sequence space {universe}^{dimension} exceeds {MAX_POINTS} points")]
    SpaceTooLarge { universe: usize, dimension: usize },
    #[error("closure exceeded the cap of {cap} atoms (reached {reached})")]
    CapExceeded { cap: usize, reached: usize },
    #[error("element does not live in this sequence space")]
    ForeignElement,
    #[error("element is not a member of the algebra")]
    NotInAlgebra,
}

/// Block sizes of a partitioned base. Block `i` is `U_i`; base points are
/// numbered consecutively block by block, so `U_0 = {0..|U_0|}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSpec {
    blocks: Vec<usize>,
}

impl BaseSpec {
    pub fn new(blocks: Vec<usize>) -> Result<Self, SetAlgError> {
        if blocks.is_empty() {
            return Err(SetAlgError::NoBlocks);
        }
        if let Some(i) = blocks.iter().position(|&b| b == 0) {
            return Err(SetAlgError::EmptyBlock(i));
        }
        Ok(BaseSpec { blocks })
    }

    pub fn uniform(dimension: usize, size: usize) -> Result<Self, SetAlgError> {
        Self::new(vec![size; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.blocks
    }

    pub fn universe_size(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.blocks[..i].iter().sum();
        start..start + self.blocks[i]
    }

    pub fn block_of(&self, u: usize) -> Option<usize> {
        (0..self.blocks.len()).find(|&i| self.block_range(i).contains(&u))
    }

    pub fn space(&self) -> Result<SeqSpace, SetAlgError> {
        SeqSpace::new(self.universe_size(), self.dimension())
    }

    /// `R = ∏ U_i`: the sequences whose `i`-th entry lies in block `i`.
    pub fn product_r(&self, space: &SeqSpace) -> Result<BitSet, SetAlgError> {
        if space.universe() != self.universe_size() || space.dimension() != self.dimension() {
            return Err(SetAlgError::ForeignElement);
        }
        let factors: Vec<Vec<usize>> = (0..self.dimension())
            .map(|i| self.block_range(i).collect())
            .collect();
        Ok(space.product(&factors))
    }

    /// Number of permutations of `U` that map every block onto itself.
    pub fn block_preserving_count(&self) -> u128 {
        self.blocks
            .iter()
            .map(|&b| (1..=b as u128).product::<u128>())
            .product()
    }

    /// Enumerate block-preserving permutations of `U` (as point maps), at most `limit`.
    pub fn block_preserving_permutations(&self, limit: usize) -> Vec<Vec<usize>> {
        let per_block: Vec<Vec<Permutation>> =
            self.blocks.iter().map(|&b| Permutation::group(b)).collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.blocks.len()];
        loop {
            if out.len() >= limit {
                break;
            }
            let mut map = Vec::with_capacity(self.universe_size());
            for (i, &choice) in idx.iter().enumerate() {
                let r = self.block_range(i);
                let p = &per_block[i][choice];
                map.extend((0..self.blocks[i]).map(|k| r.start + p.apply(k)));
            }
            out.push(map);
            // odometer
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < per_block[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
        out
    }
}

/// `^d U` with `U = {0..universe}`, enumerated lexicographically with
/// coordinate 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqSpace {
    universe: usize,
    dimension: usize,
    len: usize,
    stride: Vec<usize>,
}

impl SeqSpace {
    pub fn new(universe: usize, dimension: usize) -> Result<Self, SetAlgError> {
        if dimension == 0 || universe == 0 {
            return Err(SetAlgError::NoBlocks);
        }
        let mut len: usize = 1;
        for _ in 0..dimension {
            len = len
                .checked_mul(universe)
                .filter(|&l| l <= MAX_POINTS)
                .ok_or(SetAlgError::SpaceTooLarge {
                    universe,
                    dimension,
                })?;
        }
        let stride = (0..dimension)
            .map(|k| universe.pow((dimension - 1 - k) as u32))
            .collect();
        Ok(SeqSpace {
            universe,
            dimension,
            len,
            stride,
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of points, `|U|^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn empty(&self) -> BitSet {
        BitSet::new(self.len)
    }

    pub fn full(&self) -> BitSet {
        BitSet::full(self.len)
    }

    #[inline]
    pub fn coord(&self, p: usize, k: usize) -> usize {
        (p / self.stride[k]) % self.universe
    }

    pub fn coords(&self, p: usize) -> Vec<usize> {
        (0..self.dimension).map(|k| self.coord(p, k)).collect()
    }

    pub fn index(&self, s: &[usize]) -> usize {
        debug_assert_eq!(s.len(), self.dimension);
        s.iter().zip(&self.stride).map(|(&c, &st)| c * st).sum()
    }

    /// `p` with coordinate `k` overwritten by `u`.
    #[inline]
    pub fn with_coord(&self, p: usize, k: usize, u: usize) -> usize {
        p - self.coord(p, k) * self.stride[k] + u * self.stride[k]
    }

    /// All points that differ from `p` at most in coordinate `k`, in order of that coordinate.
    pub fn line(&self, p: usize, k: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.with_coord(p, k, 0);
        (0..self.universe).map(move |u| base + u * self.stride[k])
    }

    pub fn sequences(&self, x: &BitSet) -> Vec<Vec<usize>> {
        x.iter().map(|p| self.coords(p)).collect()
    }

    pub fn from_sequences(&self, seqs: &[Vec<usize>]) -> Result<BitSet, SetAlgError> {
        let mut b = self.empty();
        for s in seqs {
            if s.len() != self.dimension || s.iter().any(|&c| c >= self.universe) {
                return Err(SetAlgError::ForeignElement);
            }
            b.insert(self.index(s));
        }
        Ok(b)
    }

    pub fn product(&self, factors: &[Vec<usize>]) -> BitSet {
        assert_eq!(factors.len(), self.dimension);
        let mut out = self.empty();
        let mut idx = vec![0usize; self.dimension];
        if factors.iter().any(|f| f.is_empty()) {
            return out;
        }
        loop {
            let s: Vec<usize> = idx.iter().zip(factors).map(|(&i, f)| f[i]).collect();
            out.insert(self.index(&s));
            let mut k = self.dimension;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < factors[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    fn check_index(&self, i: usize) -> Result<(), SetAlgError> {
        if i < self.dimension {
            Ok(())
        } else {
            Err(SetAlgError::IndexOutOfDimension {
                index: i,
                dimension: self.dimension,
            })
        }
    }

    fn check_elem(&self, x: &BitSet) -> Result<(), SetAlgError> {
        if x.len() == self.len {
            Ok(())
        } else {
            Err(SetAlgError::ForeignElement)
        }
    }

    /// `c_i X`: sequences agreeing with some member of `X` off coordinate `i`.
    pub fn cyl(&self, i: usize, x: &BitSet) -> Result<BitSet, SetAlgError> {
        self.check_index(i)?;
        self.check_elem(x)?;
        Ok(self.cyl_unchecked(i, x))
    }

    pub(crate) fn cyl_unchecked(&self, i: usize, x: &BitSet) -> BitSet {
        let mut out = self.empty();
        for p in x.iter() {
            let base = self.with_coord(p, i, 0);
            if !out.contains(base) {
                for u in 0..self.universe {
                    out.insert(base + u * self.stride[i]);
                }
            }
        }
        out
    }

    /// `d_ij = {s : s_i = s_j}`.
    pub fn diag(&self, i: usize, j: usize) -> Result<BitSet, SetAlgError> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.diag_unchecked(i, j))
    }

    pub(crate) fn diag_unchecked(&self, i: usize, j: usize) -> BitSet {
        if i == j {
            return self.full();
        }
        BitSet::from_indices(
            self.len,
            (0..self.len).filter(|&p| self.coord(p, i) == self.coord(p, j)),
        )
    }

    /// `s_τ X = {s : s∘τ ∈ X}`.
    pub fn subst(&self, tau: &Permutation, x: &BitSet) -> Result<BitSet, SetAlgError> {
        if tau.degree() > self.dimension {
            return Err(SetAlgError::PermutationOutOfBound {
                perm: tau.to_string(),
                bound: self.dimension,
            });
        }
        self.check_elem(x)?;
        Ok(self.subst_unchecked(tau, x))
    }

    pub(crate) fn subst_unchecked(&self, tau: &Permutation, x: &BitSet) -> BitSet {
        if tau.is_identity() {
            return x.clone();
        }
        // s∘τ = y  ⟺  s = y∘τ⁻¹
        let inv = tau.inverse();
        let mut out = self.empty();
        let mut s = vec![0; self.dimension];
        for y in x.iter() {
            for (k, slot) in s.iter_mut().enumerate() {
                *slot = self.coord(y, inv.apply(k));
            }
            out.insert(self.index(&s));
        }
        out
    }

    /// The replacement `s_{[i|j]} X = {s : s∘[i|j] ∈ X}`, computed directly.
    pub fn replace(&self, i: usize, j: usize, x: &BitSet) -> Result<BitSet, SetAlgError> {
        self.check_index(i)?;
        self.check_index(j)?;
        self.check_elem(x)?;
        Ok(self.replace_unchecked(i, j, x))
    }

    pub(crate) fn replace_unchecked(&self, i: usize, j: usize, x: &BitSet) -> BitSet {
        BitSet::from_indices(
            self.len,
            (0..self.len).filter(|&p| x.contains(self.with_coord(p, i, self.coord(p, j)))),
        )
    }

    /// Image of `X` under the point map induced by a base map `σ: U → U`.
    pub fn map_points(&self, sigma: &[usize], x: &BitSet) -> BitSet {
        let mut out = self.empty();
        let mut s = vec![0; self.dimension];
        for p in x.iter() {
            for (k, slot) in s.iter_mut().enumerate() {
                *slot = sigma[self.coord(p, k)];
            }
            out.insert(self.index(&s));
        }
        out
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R) -> BitSet {
        BitSet::from_indices(self.len, (0..self.len).filter(|_| rng.gen_bool(0.5)))
    }
}

/// The full powerset algebra on a sequence space with substitutions from `G_n`.
#[derive(Debug, Clone)]
pub struct SetAlgebra {
    space: Arc<SeqSpace>,
    n: usize,
}

impl SetAlgebra {
    pub fn new(space: Arc<SeqSpace>, n: usize) -> Result<Self, SetAlgError> {
        if n > space.dimension() {
            return Err(SetAlgError::BoundExceedsDimension {
                n,
                dimension: space.dimension(),
            });
        }
        Ok(SetAlgebra { space, n })
    }

    pub fn space(&self) -> &Arc<SeqSpace> {
        &self.space
    }
}

impl Algebra for SetAlgebra {
    type Elem = BitSet;

    fn dimension(&self) -> usize {
        self.space.dimension()
    }
    fn subst_bound(&self) -> usize {
        self.n
    }
    fn zero(&self) -> BitSet {
        self.space.empty()
    }
    fn one(&self) -> BitSet {
        self.space.full()
    }
    fn join(&self, a: &BitSet, b: &BitSet) -> BitSet {
        a.union(b)
    }
    fn meet(&self, a: &BitSet, b: &BitSet) -> BitSet {
        a.intersection(b)
    }
    fn complement(&self, a: &BitSet) -> BitSet {
        a.complement()
    }
    fn cyl(&self, i: usize, a: &BitSet) -> BitSet {
        self.space.cyl_unchecked(i, a)
    }
    fn diag(&self, i: usize, j: usize) -> BitSet {
        self.space.diag_unchecked(i, j)
    }
    fn subst(&self, p: &Permutation, a: &BitSet) -> BitSet {
        self.space.subst_unchecked(p, a)
    }
    fn replace(&self, i: usize, j: usize, a: &BitSet) -> BitSet {
        self.space.replace_unchecked(i, j, a)
    }
    fn leq(&self, a: &BitSet, b: &BitSet) -> bool {
        a.is_subset(b)
    }
    fn is_zero(&self, a: &BitSet) -> bool {
        a.is_empty()
    }
}

impl FiniteAlgebra for SetAlgebra {
    fn atom_count(&self) -> usize {
        self.space.len()
    }
    fn atom(&self, idx: usize) -> BitSet {
        BitSet::singleton(self.space.len(), idx)
    }
    fn atoms_below(&self, x: &BitSet) -> BitSet {
        x.clone()
    }
    fn describe(&self, x: &BitSet) -> serde_json::Value {
        json!(self.space.sequences(x))
    }
    fn describe_member(&self, x: &BitSet) -> serde_json::Value {
        x.first().map_or(serde_json::Value::Null, |p| json!(self.space.coords(p)))
    }
    fn element_from_atoms(&self, atoms: &BitSet) -> BitSet {
        atoms.clone()
    }
}

/// A finite subalgebra of a set algebra, stored through its atoms.
#[derive(Debug, Clone)]
pub struct GeneratedAlgebra {
    space: Arc<SeqSpace>,
    n: usize,
    generators: Vec<BitSet>,
    atoms: Vec<BitSet>,
    atom_of_point: Vec<u32>,
}

/// The subalgebra generated by `generators` under the Boolean operations,
/// `c_i` (`i < d`), `d_ij` and `s_τ` (`τ ∈ G_n`).
///
/// The closure is computed on the atom partition: starting from the partition
/// cut out by the generators and diagonals, every block's image under each
/// operator refines the partition until no block splits. The operators are
/// additive, so the joins of the final blocks are exactly the generated
/// elements. `cap` bounds the number of blocks.
pub fn generate(
    space: Arc<SeqSpace>,
    n: usize,
    generators: &[BitSet],
    cap: usize,
) -> Result<GeneratedAlgebra, SetAlgError> {
    let d = space.dimension();
    if n > d {
        return Err(SetAlgError::BoundExceedsDimension { n, dimension: d });
    }
    for g in generators {
        space.check_elem(g)?;
    }

    let mut blocks: HashSet<BitSet> = HashSet::new();
    blocks.insert(space.full());
    let mut constants: Vec<BitSet> = generators.to_vec();
    for i in 0..d {
        for j in i + 1..d {
            constants.push(space.diag_unchecked(i, j));
        }
    }
    for c in &constants {
        refine(&mut blocks, c, &mut |_| {});
    }
    if blocks.len() > cap {
        return Err(SetAlgError::CapExceeded {
            cap,
            reached: blocks.len(),
        });
    }

    // adjacent transpositions generate G_n
    let subst_gens: Vec<Permutation> = (1..n).map(|k| Permutation::transposition(k - 1, k)).collect();

    let mut sorted: Vec<BitSet> = blocks.iter().cloned().collect();
    sorted.sort_by_key(|b| b.first());
    let mut queue: VecDeque<BitSet> = sorted.into();
    while let Some(b) = queue.pop_front() {
        if !blocks.contains(&b) {
            continue;
        }
        let images = (0..d)
            .map(|i| space.cyl_unchecked(i, &b))
            .chain(subst_gens.iter().map(|t| space.subst_unchecked(t, &b)));
        for img in images.collect::<Vec<_>>() {
            refine(&mut blocks, &img, &mut |nb| queue.push_back(nb));
            if blocks.len() > cap {
                return Err(SetAlgError::CapExceeded {
                    cap,
                    reached: blocks.len(),
                });
            }
        }
    }

    let mut atoms: Vec<BitSet> = blocks.into_iter().collect();
    atoms.sort_by_key(|b| b.first());
    let mut atom_of_point = vec![0u32; space.len()];
    for (ai, a) in atoms.iter().enumerate() {
        for p in a.iter() {
            atom_of_point[p] = ai as u32;
        }
    }
    Ok(GeneratedAlgebra {
        space,
        n,
        generators: generators.to_vec(),
        atoms,
        atom_of_point,
    })
}

fn refine(blocks: &mut HashSet<BitSet>, by: &BitSet, on_new: &mut impl FnMut(BitSet)) {
    let to_split: Vec<BitSet> = blocks
        .iter()
        .filter(|b| b.intersects(by) && !b.is_subset(by))
        .cloned()
        .collect();
    for b in to_split {
        blocks.remove(&b);
        let inside = b.intersection(by);
        let outside = b.difference(by);
        blocks.insert(inside.clone());
        blocks.insert(outside.clone());
        on_new(inside);
        on_new(outside);
    }
}

impl GeneratedAlgebra {
    pub fn space(&self) -> &Arc<SeqSpace> {
        &self.space
    }

    pub fn generators(&self) -> &[BitSet] {
        &self.generators
    }

    pub fn atoms(&self) -> &[BitSet] {
        &self.atoms
    }

    /// The ambient full set algebra.
    pub fn ambient(&self) -> SetAlgebra {
        SetAlgebra {
            space: self.space.clone(),
            n: self.n,
        }
    }

    /// Atom decomposition of `x`, or `None` when `x` is not a member.
    pub fn decompose(&self, x: &BitSet) -> Option<BitSet> {
        if x.len() != self.space.len() {
            return None;
        }
        let mut hit = BitSet::new(self.atoms.len());
        for p in x.iter() {
            hit.insert(self.atom_of_point[p] as usize);
        }
        let total: usize = hit.iter().map(|a| self.atoms[a].count()).sum();
        (total == x.count()).then_some(hit)
    }

    pub fn contains(&self, x: &BitSet) -> bool {
        self.decompose(x).is_some()
    }

    pub fn atom_index(&self, x: &BitSet) -> Option<usize> {
        let a = self.atom_of_point[x.first()?] as usize;
        (self.atoms[a] == *x).then_some(a)
    }

    pub fn atom_of_point(&self, p: usize) -> usize {
        self.atom_of_point[p] as usize
    }

    /// True iff `x` is a nonzero element with nothing strictly between 0 and `x`.
    pub fn is_atom(&self, x: &BitSet) -> Result<bool, SetAlgError> {
        let below = self.decompose(x).ok_or(SetAlgError::NotInAlgebra)?;
        Ok(below.count() == 1)
    }

    /// log2 of the number of elements.
    pub fn element_count_log2(&self) -> usize {
        self.atoms.len()
    }
}

impl Algebra for GeneratedAlgebra {
    type Elem = BitSet;

    fn dimension(&self) -> usize {
        self.space.dimension()
    }
    fn subst_bound(&self) -> usize {
        self.n
    }
    fn zero(&self) -> BitSet {
        self.space.empty()
    }
    fn one(&self) -> BitSet {
        self.space.full()
    }
    fn join(&self, a: &BitSet, b: &BitSet) -> BitSet {
        a.union(b)
    }
    fn meet(&self, a: &BitSet, b: &BitSet) -> BitSet {
        a.intersection(b)
    }
    fn complement(&self, a: &BitSet) -> BitSet {
        a.complement()
    }
    fn cyl(&self, i: usize, a: &BitSet) -> BitSet {
        self.space.cyl_unchecked(i, a)
    }
    fn diag(&self, i: usize, j: usize) -> BitSet {
        self.space.diag_unchecked(i, j)
    }
    fn subst(&self, p: &Permutation, a: &BitSet) -> BitSet {
        self.space.subst_unchecked(p, a)
    }
    fn replace(&self, i: usize, j: usize, a: &BitSet) -> BitSet {
        self.space.replace_unchecked(i, j, a)
    }
    fn leq(&self, a: &BitSet, b: &BitSet) -> bool {
        a.is_subset(b)
    }
    fn is_zero(&self, a: &BitSet) -> bool {
        a.is_empty()
    }
}

impl FiniteAlgebra for GeneratedAlgebra {
    fn atom_count(&self) -> usize {
        self.atoms.len()
    }
    fn atom(&self, idx: usize) -> BitSet {
        self.atoms[idx].clone()
    }
    fn atoms_below(&self, x: &BitSet) -> BitSet {
        let mut hit = BitSet::new(self.atoms.len());
        for p in x.iter() {
            let a = self.atom_of_point[p] as usize;
            if self.atoms[a].is_subset(x) {
                hit.insert(a);
            }
        }
        hit
    }
    fn describe(&self, x: &BitSet) -> serde_json::Value {
        json!(self.space.sequences(x))
    }
    fn describe_member(&self, x: &BitSet) -> serde_json::Value {
        x.first().map_or(serde_json::Value::Null, |p| json!(self.space.coords(p)))
    }
}

/// Check the operator laws of the full set algebra on the given elements.
///
/// Binary laws run over all pairs when there are at most 128 elements and over
/// cyclically consecutive pairs otherwise.
pub fn operator_laws(alg: &SetAlgebra, elements: &[BitSet]) -> VerificationRecord {
    let sp = alg.space();
    let d = sp.dimension();
    let group = Permutation::group(alg.subst_bound());
    let pairs: Vec<(usize, usize)> = if elements.len() <= 128 {
        (0..elements.len())
            .flat_map(|a| (a + 1..elements.len()).map(move |b| (a, b)))
            .collect()
    } else {
        (0..elements.len())
            .map(|a| (a, (a + 1) % elements.len()))
            .collect()
    };
    let show = |x: &BitSet| json!(sp.sequences(x));
    let mut rec = VerificationRecord::new(format!(
        "operator laws on {} elements of ^{}U, |U|={}",
        elements.len(),
        d,
        sp.universe()
    ));

    for i in 0..d {
        let mut normal = Law::new(format!("cyl[{i}].normal"));
        normal.check(alg.cyl(i, &alg.zero()).is_empty(), || json!(null));
        rec.push(normal);

        let mut incr = Law::new(format!("cyl[{i}].increasing"));
        let mut idem = Law::new(format!("cyl[{i}].idempotent"));
        let mut cylindric = Law::new(format!("cyl[{i}].complemented-closed"));
        for x in elements {
            let cx = alg.cyl(i, x);
            incr.check(x.is_subset(&cx), || show(x));
            idem.check(alg.cyl(i, &cx) == cx, || show(x));
            let ncx = cx.complement();
            cylindric.check(alg.cyl(i, &ncx) == ncx, || show(x));
        }
        rec.push(incr);
        rec.push(idem);
        rec.push(cylindric);

        let mut add = Law::new(format!("cyl[{i}].additive"));
        for &(a, b) in &pairs {
            let (x, y) = (&elements[a], &elements[b]);
            add.check(
                alg.cyl(i, &x.union(y)) == alg.cyl(i, x).union(&alg.cyl(i, y)),
                || json!({"x": show(x), "y": show(y)}),
            );
        }
        rec.push(add);

        for j in i + 1..d {
            let mut comm = Law::new(format!("cyl[{i},{j}].commute"));
            for x in elements {
                comm.check(
                    alg.cyl(i, &alg.cyl(j, x)) == alg.cyl(j, &alg.cyl(i, x)),
                    || show(x),
                );
            }
            rec.push(comm);
        }
    }

    let mut refl = Law::new("diag.reflexive");
    let mut sym = Law::new("diag.symmetric");
    for i in 0..d {
        refl.check(alg.diag(i, i).is_full(), || json!([i, i]));
        for j in 0..d {
            sym.check(alg.diag(i, j) == alg.diag(j, i), || json!([i, j]));
        }
    }
    rec.push(refl);
    rec.push(sym);

    let mut repl = Law::new("replace.derived-equals-concrete");
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            for x in elements {
                let derived = alg.cyl(i, &alg.diag(i, j).intersection(x));
                repl.check(derived == alg.replace(i, j, x), || {
                    json!({"i": i, "j": j, "x": show(x)})
                });
            }
        }
    }
    rec.push(repl);

    for sigma in &group {
        let mut card = Law::new(format!("subst[{sigma}].cardinality"));
        let mut bool_hom = Law::new(format!("subst[{sigma}].boolean"));
        let mut diag = Law::new(format!("subst[{sigma}].diagonal"));
        for x in elements {
            let sx = alg.subst(sigma, x);
            card.check(sx.count() == x.count(), || show(x));
            bool_hom.check(alg.subst(sigma, &x.complement()) == sx.complement(), || {
                show(x)
            });
        }
        for &(a, b) in &pairs {
            let (x, y) = (&elements[a], &elements[b]);
            let (sx, sy) = (alg.subst(sigma, x), alg.subst(sigma, y));
            bool_hom.check(
                alg.subst(sigma, &x.union(y)) == sx.union(&sy)
                    && alg.subst(sigma, &x.intersection(y)) == sx.intersection(&sy),
                || json!({"x": show(x), "y": show(y)}),
            );
        }
        for i in 0..d {
            for j in 0..d {
                let img = alg.subst(sigma, &alg.diag(i, j));
                diag.check(img == alg.diag(sigma.apply(i), sigma.apply(j)), || {
                    json!([i, j])
                });
            }
        }
        rec.push(card);
        rec.push(bool_hom);
        rec.push(diag);

        for tau in &group {
            let comp = sigma.compose(tau);
            let mut law = Law::new(format!("subst[{sigma}]∘subst[{tau}].compose"));
            for x in elements {
                law.check(
                    alg.subst(sigma, &alg.subst(tau, x)) == alg.subst(&comp, x),
                    || show(x),
                );
            }
            rec.push(law);
        }
    }
    rec
}

/// Every block-preserving permutation of `U` (up to `limit` of them) fixes
/// every atom of `alg` setwise.
pub fn permutation_invariance(alg: &GeneratedAlgebra, base: &BaseSpec, limit: usize) -> Law {
    let mut law = Law::new("atoms.block-permutation-invariant");
    for sigma in base.block_preserving_permutations(limit) {
        for (ai, a) in alg.atoms().iter().enumerate() {
            law.check(alg.space().map_points(&sigma, a) == *a, || {
                json!({"atom": ai, "base_map": sigma})
            });
        }
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (BaseSpec, Arc<SeqSpace>) {
        let base = BaseSpec::new(vec![2, 2, 2]).unwrap();
        let sp = Arc::new(base.space().unwrap());
        (base, sp)
    }

    #[test]
    fn cylindrification_examples() {
        let sp = SeqSpace::new(4, 3).unwrap();
        assert!(sp.cyl(0, &sp.empty()).unwrap().is_empty());
        assert_eq!(sp.cyl(0, &sp.full()).unwrap(), sp.full());
        let x = sp.from_sequences(&[vec![0, 1, 2]]).unwrap();
        let c = sp.cyl(1, &x).unwrap();
        let expected: Vec<Vec<usize>> = (0..4).map(|u| vec![0, u, 2]).collect();
        assert_eq!(sp.sequences(&c), expected);
        assert!(matches!(
            sp.cyl(3, &x),
            Err(SetAlgError::IndexOutOfDimension { index: 3, dimension: 3 })
        ));
    }

    #[test]
    fn diagonal_examples() {
        let sp = SeqSpace::new(4, 3).unwrap();
        assert_eq!(sp.diag(0, 0).unwrap(), sp.full());
        assert_eq!(sp.diag(0, 1).unwrap().count(), 16);
        assert_eq!(sp.diag(0, 1).unwrap(), sp.diag(1, 0).unwrap());
        assert!(sp.diag(0, 5).is_err());
    }

    #[test]
    fn substitution_examples() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        assert_eq!(r.count(), 8);
        let t = Permutation::transposition(0, 1);
        assert_eq!(sp.subst(&Permutation::identity(), &r).unwrap(), r);
        let sr = sp.subst(&t, &r).unwrap();
        // U1 × U0 × U2
        let expected = sp.product(&[vec![2, 3], vec![0, 1], vec![4, 5]]);
        assert_eq!(sr, expected);
        assert!(sr.is_disjoint(&r));
        assert_eq!(sp.subst(&t, &sr).unwrap(), r);
        assert!(sp.subst(&Permutation::transposition(0, 3), &r).is_err());
    }

    #[test]
    fn cylinder_of_r_is_a_product() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(
            sp.cyl(0, &r).unwrap(),
            sp.product(&[all, vec![2, 3], vec![4, 5]])
        );
    }

    #[test]
    fn generated_algebra_of_r() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp.clone(), 2, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).unwrap();
        let sr = sp.subst(&Permutation::transposition(0, 1), &r).unwrap();
        assert!(a.is_atom(&r).unwrap());
        assert!(a.is_atom(&sr).unwrap());
        assert!(!a.is_atom(&sp.empty()).unwrap());
        assert!(!a.is_atom(&r.union(&sr)).unwrap());
        // atoms partition the unit
        let mut cover = sp.empty();
        for x in a.atoms() {
            assert!(cover.is_disjoint(x));
            cover.union_with(x);
        }
        assert!(cover.is_full());
        assert!(matches!(
            a.is_atom(&BitSet::singleton(sp.len(), r.first().unwrap())),
            Err(SetAlgError::NotInAlgebra)
        ));
    }

    #[test]
    fn diagonal_only_algebra_excludes_r() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp.clone(), 2, &[], DEFAULT_CLOSURE_CAP).unwrap();
        assert!(!a.contains(&r));
        assert!(a.contains(&sp.diag(0, 1).unwrap()));
        // the full space as generator adds nothing
        let b = generate(sp, 1, &[a.one()], DEFAULT_CLOSURE_CAP).unwrap();
        assert_eq!(b.atoms().len(), a.atoms().len());
    }

    #[test]
    fn closure_cap_is_an_error() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        assert!(matches!(
            generate(sp, 2, &[r], 10),
            Err(SetAlgError::CapExceeded { cap: 10, .. })
        ));
    }

    #[test]
    fn generation_is_idempotent_and_monotone() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp.clone(), 2, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).unwrap();
        let again = generate(sp.clone(), 2, a.atoms(), DEFAULT_CLOSURE_CAP).unwrap();
        assert_eq!(again.atoms(), a.atoms());
        let diag_only = generate(sp, 2, &[], DEFAULT_CLOSURE_CAP).unwrap();
        for x in diag_only.atoms() {
            assert!(a.contains(x));
        }
    }

    #[test]
    fn block_permutations_fix_generated_atoms() {
        let (base, sp) = tiny();
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, 2, &[r], DEFAULT_CLOSURE_CAP).unwrap();
        assert_eq!(base.block_preserving_count(), 8);
        let law = permutation_invariance(&a, &base, usize::MAX).finish();
        assert!(law.passed());
        assert_eq!(law.checked, 8 * a.atoms().len() as u64);
    }

    #[test]
    fn operator_laws_exhaustive_on_small_space() {
        // d=2, |U|=2: 4 points, all 16 subsets
        let sp = Arc::new(SeqSpace::new(2, 2).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        let all: Vec<BitSet> = (0..16u32)
            .map(|m| BitSet::from_indices(4, (0..4).filter(|b| m >> b & 1 == 1)))
            .collect();
        let rec = operator_laws(&alg, &all);
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
    }

    #[test]
    fn replacement_matches_definition() {
        // s_{[1|0]} X = {s : s∘[1|0] ∈ X}, brute force at d=3, |U|=4
        let sp = SeqSpace::new(4, 3).unwrap();
        let x = sp.from_sequences(&[vec![0, 0, 1], vec![2, 2, 3], vec![1, 3, 3]]).unwrap();
        let got = sp.replace(1, 0, &x).unwrap();
        let expected = BitSet::from_indices(
            sp.len(),
            (0..sp.len()).filter(|&p| {
                let mut s = sp.coords(p);
                s[1] = s[0];
                x.contains(sp.index(&s))
            }),
        );
        assert_eq!(got, expected);
        assert_eq!(got.count(), 8);
    }
}

//! Splitting an atom of a finite BAO into several copies with the same
//! cylindrifications, and the maps that relate split algebras to concrete
//! set algebras and to each other.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bao::{
    verify_hom, AtomicSubalgebra, BaoError, BaoTables, FiniteBAO, Homomorphism, OpSet, VerifyMode,
};
use crate::bitset::BitSet;
use crate::perm::{factorial, Permutation};
use crate::setalg::{GeneratedAlgebra, SeqSpace, SetAlgError};
use crate::verify::{Law, VerificationRecord};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("the element to split is not an atom of the base algebra")]
    NotAnAtom,
    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),
    #[error("s_{first}R and s_{second}R coincide")]
    OrbitOverlap { first: String, second: String },
    #[error("R lies below d({i},{j}); splitting it would break the diagonal laws")]
    MeetsDiagonal { i: usize, j: usize },
    #[error("substitution bound {n} exceeds the base algebra's bound {base_n}")]
    SubstBound { n: usize, base_n: usize },
    #[error("{p} equivalence blocks cannot be merged into {m} pieces")]
    TooManyBlocks { p: usize, m: usize },
    #[error("block {coord} has {size} points, fewer than the {q} parts requested")]
    BlockTooSmall { coord: usize, size: usize, q: usize },
    #[error("a partition needs at least one part")]
    ZeroParts,
    #[error("invalid labeling: {0}")]
    Labeling(String),
    #[error("invalid part map: {0}")]
    Chi(String),
    #[error("incompatible algebras: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Bao(#[from] BaoError),
    #[error(transparent)]
    SetAlg(#[from] SetAlgError),
}

/// An atom of a split algebra: either an atom of the base algebra outside the
/// orbit of `R`, or one of the named atoms `s_τR_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitAtom {
    Old { base_atom: usize },
    Named { tau: Permutation, part: usize },
}

fn named_label(tau: &Permutation, what: &str, j: usize) -> String {
    if tau.is_identity() {
        format!("{what}_{j}")
    } else {
        format!("s{tau}{what}_{j}")
    }
}

/// `split(A′, R, m, n)`: the atom `R` of `A′` and its `G_n`-images replaced by
/// `m + 1` named atoms each.
#[derive(Debug, Clone)]
pub struct SplitAlgebra {
    base: FiniteBAO,
    r_atom: usize,
    m: usize,
    n: usize,
    group: Vec<Permutation>,
    /// Base atom of `s_τR`, per position in `group`.
    orbit: Vec<usize>,
    /// Base atom → position of its permutation in `group`, for orbit atoms.
    orbit_pos: Vec<Option<usize>>,
    old_index: Vec<Option<usize>>,
    atoms: Vec<SplitAtom>,
    named_start: usize,
    bao: FiniteBAO,
}

/// Split atom `r_atom` of `base` into `m + 1` parts, with substitutions from `G_n`.
pub fn split_bao(base: &FiniteBAO, r_atom: usize, m: usize, n: usize) -> Result<SplitAlgebra, SplitError> {
    let d = base.dimension();
    let na = base.atom_count();
    if r_atom >= na {
        return Err(SplitError::AtomOutOfRange(r_atom));
    }
    if n > base.subst_bound() {
        return Err(SplitError::SubstBound {
            n,
            base_n: base.subst_bound(),
        });
    }
    for i in 0..d {
        for j in i + 1..d {
            if base.diag_atoms(i, j).contains(r_atom) {
                return Err(SplitError::MeetsDiagonal { i, j });
            }
        }
    }
    let group = Permutation::group(n);
    let mut orbit = Vec::with_capacity(group.len());
    let mut orbit_pos: Vec<Option<usize>> = vec![None; na];
    for (g, tau) in group.iter().enumerate() {
        let a = base.subst_atom(tau, r_atom).expect("τ ∈ G_n");
        if let Some(prev) = orbit_pos[a] {
            return Err(SplitError::OrbitOverlap {
                first: group[prev].to_string(),
                second: tau.to_string(),
            });
        }
        orbit_pos[a] = Some(g);
        orbit.push(a);
    }

    let mut atoms = Vec::new();
    let mut old_index = vec![None; na];
    for a in 0..na {
        if orbit_pos[a].is_none() {
            old_index[a] = Some(atoms.len());
            atoms.push(SplitAtom::Old { base_atom: a });
        }
    }
    let named_start = atoms.len();
    for tau in &group {
        for j in 0..=m {
            atoms.push(SplitAtom::Named {
                tau: tau.clone(),
                part: j,
            });
        }
    }

    let mut s = SplitAlgebra {
        base: base.clone(),
        r_atom,
        m,
        n,
        group,
        orbit,
        orbit_pos,
        old_index,
        atoms,
        named_start,
        bao: base.clone(), // replaced below
    };
    s.bao = s.build_tables()?;
    Ok(s)
}

/// [`split_bao`] on a concrete generated algebra, splitting the element `r`.
pub fn split(a: &GeneratedAlgebra, r: &BitSet, m: usize, n: usize) -> Result<SplitAlgebra, SplitError> {
    if !a.is_atom(r)? {
        return Err(SplitError::NotAnAtom);
    }
    let r_atom = a.atom_index(r).ok_or(SplitError::NotAnAtom)?;
    let base = FiniteBAO::from_concrete(a)?;
    split_bao(&base, r_atom, m, n)
}

impl SplitAlgebra {
    fn build_tables(&self) -> Result<FiniteBAO, SplitError> {
        let d = self.base.dimension();
        let list = |x: &BitSet| -> Vec<usize> { x.iter().collect() };
        let mut cyl = Vec::with_capacity(d);
        for i in 0..d {
            let row = self
                .atoms
                .iter()
                .map(|at| match at {
                    SplitAtom::Old { base_atom } => list(&self.embed_old(self.base.cyl_atom(i, *base_atom))),
                    SplitAtom::Named { tau, .. } => {
                        let g = self.position(tau).expect("τ ∈ G_n");
                        list(&self.embed_old(self.base.cyl_atom(i, self.orbit[g])))
                    }
                })
                .collect();
            cyl.push(row);
        }
        let diag = (0..d)
            .map(|i| (0..d).map(|j| list(&self.embed_old(self.base.diag_atoms(i, j)))).collect())
            .collect();
        let subst = self
            .group
            .iter()
            .map(|sigma| {
                let row = self
                    .atoms
                    .iter()
                    .map(|at| match at {
                        SplitAtom::Old { base_atom } => {
                            let img = self.base.subst_atom(sigma, *base_atom).expect("σ ∈ G_n");
                            self.old_index[img].expect("old atoms map to old atoms")
                        }
                        SplitAtom::Named { tau, part } => self.named_atom(&sigma.compose(tau), *part),
                    })
                    .collect();
                (sigma.clone(), row)
            })
            .collect();
        let labels = self
            .atoms
            .iter()
            .map(|at| match at {
                SplitAtom::Old { base_atom } => self.base.labels()[*base_atom].clone(),
                SplitAtom::Named { tau, part } => named_label(tau, "R", *part),
            })
            .collect();
        Ok(FiniteBAO::from_tables(BaoTables {
            dimension: d,
            n: self.n,
            labels,
            cyl,
            subst,
            diag,
        })?)
    }

    fn position(&self, tau: &Permutation) -> Option<usize> {
        self.group.iter().position(|p| p == tau)
    }

    pub fn bao(&self) -> &FiniteBAO {
        &self.bao
    }

    pub fn base(&self) -> &FiniteBAO {
        &self.base
    }

    pub fn r_atom(&self) -> usize {
        self.r_atom
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn group(&self) -> &[Permutation] {
        &self.group
    }

    pub fn atoms(&self) -> &[SplitAtom] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Base atom of `s_τR`.
    pub fn orbit_atom(&self, tau: &Permutation) -> Option<usize> {
        self.position(tau).map(|g| self.orbit[g])
    }

    /// Split atom index of the old atom `a`, if `a` is outside the orbit of `R`.
    pub fn old_atom(&self, base_atom: usize) -> Option<usize> {
        self.old_index.get(base_atom).copied().flatten()
    }

    /// Split atom index of `s_τR_j`. Panics when `τ ∉ G_n` or `j > m`.
    pub fn named_atom(&self, tau: &Permutation, j: usize) -> usize {
        assert!(j <= self.m, "part {j} out of range");
        let g = self.position(tau).expect("τ ∈ G_n");
        self.named_start + g * (self.m + 1) + j
    }

    /// The part `R_j` as an element.
    pub fn part(&self, j: usize) -> BitSet {
        self.bao.atom(self.named_atom(&Permutation::identity(), j))
    }

    /// `R` as an element of the split algebra.
    pub fn r_element(&self) -> BitSet {
        self.embed_old(&BitSet::singleton(self.base.atom_count(), self.r_atom))
    }

    /// Image of a base element (a set of base atoms).
    pub fn embed_old(&self, x: &BitSet) -> BitSet {
        let mut out = BitSet::new(self.atoms.len());
        for a in x.iter() {
            match (self.old_index[a], self.orbit_pos[a]) {
                (Some(k), _) => out.insert(k),
                (None, Some(g)) => {
                    for j in 0..=self.m {
                        out.insert(self.named_start + g * (self.m + 1) + j);
                    }
                }
                (None, None) => unreachable!("every base atom is old or in the orbit"),
            }
        }
        out
    }

    /// `embed_old` as a homomorphism from the base algebra.
    pub fn embed_old_hom(&self) -> Homomorphism<&FiniteBAO, &FiniteBAO> {
        let images = (0..self.base.atom_count())
            .map(|a| self.embed_old(&BitSet::singleton(self.base.atom_count(), a)))
            .collect();
        Homomorphism::new("embed_old", &self.base, &self.bao, images, OpSet::full(self.n).with_replace())
            .expect("shapes agree")
    }

    /// Write `x` as an old element plus named atoms; complete `τ`-rows re-fuse into `s_τR`.
    pub fn decompose(&self, x: &BitSet) -> Decomposition {
        let mut old = BitSet::new(self.base.atom_count());
        let mut named = Vec::new();
        for (a, k) in self.old_index.iter().enumerate() {
            if let Some(k) = k {
                if x.contains(*k) {
                    old.insert(a);
                }
            }
        }
        for (g, tau) in self.group.iter().enumerate() {
            let row: Vec<usize> = (0..=self.m)
                .filter(|&j| x.contains(self.named_start + g * (self.m + 1) + j))
                .collect();
            if row.len() == self.m + 1 {
                old.insert(self.orbit[g]);
            } else {
                named.extend(row.into_iter().map(|j| (tau.clone(), j)));
            }
        }
        Decomposition { old, named }
    }

    pub fn recompose(&self, dec: &Decomposition) -> BitSet {
        let mut out = self.embed_old(&dec.old);
        for (tau, j) in &dec.named {
            out.insert(self.named_atom(tau, *j));
        }
        out
    }

    /// The split invariants: parts sum to `R`, each named atom has the
    /// cylindrifications of its orbit atom, substitutions act on parts by
    /// composition, and `embed_old` is an embedding.
    pub fn invariants(&self) -> VerificationRecord {
        let b = &self.bao;
        let d = b.dimension();
        let mut rec = VerificationRecord::new(format!("split invariants (m={}, n={})", self.m, self.n));
        let r = self.r_element();
        let sum = (0..=self.m).fold(b.zero(), |acc, j| acc.union(&self.part(j)));
        rec.assert("parts_sum_to_r", sum == r, || json!({ "sum": b.describe(&sum) }));

        let mut cyl = Law::new("cyl_parts_match_r");
        for i in 0..d {
            for tau in &self.group {
                let whole = b.cyl(i, &b.subst(tau, &r));
                for j in 0..=self.m {
                    let part = b.cyl(i, &b.subst(tau, &self.part(j)));
                    cyl.check(part == whole, || json!({ "i": i, "tau": tau.to_string(), "j": j }));
                }
            }
        }
        rec.push(cyl);

        let mut act = Law::new("subst_on_parts");
        for sigma in &self.group {
            for tau in &self.group {
                for j in 0..=self.m {
                    let lhs = b.subst(sigma, &b.atom(self.named_atom(tau, j)));
                    let rhs = b.atom(self.named_atom(&sigma.compose(tau), j));
                    act.check(lhs == rhs, || {
                        json!({ "sigma": sigma.to_string(), "tau": tau.to_string(), "j": j })
                    });
                }
            }
        }
        rec.push(act);

        let mut distinct = Law::new("named_atoms_distinct");
        let mut seen = HashMap::new();
        for tau in &self.group {
            for j in 0..=self.m {
                let k = self.named_atom(tau, j);
                let prev = seen.insert(k, (tau.clone(), j));
                distinct.check(prev.is_none(), || json!({ "tau": tau.to_string(), "j": j }));
            }
        }
        rec.push(distinct);

        let mut emb = verify_hom(&self.embed_old_hom(), VerifyMode::Exhaustive);
        for c in &mut emb.checks {
            c.law = format!("embed_old.{}", c.law);
        }
        rec.extend(emb);
        rec
    }
}

/// `x = embed_old(old) + Σ named`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub old: BitSet,
    pub named: Vec<(Permutation, usize)>,
}

/// The map from atoms of one split to atoms of another split of the same base
/// with reordered atoms; `base_map[a]` is the new index of base atom `a`.
pub fn split_isomorphism<'a>(
    s1: &'a SplitAlgebra,
    s2: &'a SplitAlgebra,
    base_map: &[usize],
) -> Result<Homomorphism<&'a FiniteBAO, &'a FiniteBAO>, SplitError> {
    if s1.m != s2.m || s1.n != s2.n || base_map.get(s1.r_atom) != Some(&s2.r_atom) {
        return Err(SplitError::Incompatible("different split parameters".into()));
    }
    let images = s1
        .atoms
        .iter()
        .map(|at| match at {
            SplitAtom::Old { base_atom } => s2
                .old_atom(base_map[*base_atom])
                .map(|k| s2.bao.atom(k))
                .ok_or_else(|| SplitError::Incompatible("old atom lands in the orbit".into())),
            SplitAtom::Named { tau, part } => Ok(s2.bao.atom(s2.named_atom(tau, *part))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Homomorphism::new(
        "split isomorphism",
        &s1.bao,
        &s2.bao,
        images,
        OpSet::full(s1.n).with_replace(),
    )?)
}

// ---------------------------------------------------------------------------
// the equivalence on parts and the small subalgebra

/// Parts `R_0..R_m` grouped by which generators contain their substitution images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivPartition {
    /// Blocks of part indices, ordered by smallest member.
    pub blocks: Vec<Vec<usize>>,
    pub generators: usize,
    pub k: usize,
    pub n: usize,
    /// `2^{k·n!}`, saturating.
    pub bound: u128,
    pub warnings: Vec<String>,
}

impl EquivPartition {
    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    pub fn within_bound(&self) -> bool {
        (self.p() as u128) <= self.bound
    }

    pub fn block_of(&self, j: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&j))
            .expect("blocks cover the parts")
    }
}

pub fn block_bound(k: usize, n: usize) -> u128 {
    let e = k.saturating_mul(factorial(n));
    if e >= 127 {
        u128::MAX
    } else {
        1u128 << e
    }
}

/// The equivalence on `m + 1` parts given, per generator, the set of named
/// atoms `(τ, j)` below it, indexed `τ_pos · (m + 1) + j` with `τ_pos`
/// ranging over `group_len` positions.
pub fn partition_parts(m: usize, group_len: usize, named_sets: &[BitSet], k: usize, n: usize) -> EquivPartition {
    let mut by_sig: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for j in 0..=m {
        let sig: Vec<bool> = named_sets
            .iter()
            .flat_map(|g| (0..group_len).map(move |t| g.contains(t * (m + 1) + j)))
            .collect();
        by_sig.entry(sig).or_default().push(j);
    }
    let mut blocks: Vec<Vec<usize>> = by_sig.into_values().collect();
    blocks.sort_by_key(|b| b[0]);
    let mut warnings = Vec::new();
    if named_sets.len() > k {
        warnings.push(format!(
            "{} generators exceed k = {k}; the block bound is not guaranteed",
            named_sets.len()
        ));
    }
    EquivPartition {
        blocks,
        generators: named_sets.len(),
        k,
        n,
        bound: block_bound(k, n),
        warnings,
    }
}

/// `R_i ≡ R_j` iff for every generator `g` and `τ ∈ G_n`, `s_τR_i ≤ g ⟺ s_τR_j ≤ g`.
pub fn equiv_blocks(s: &SplitAlgebra, generators: &[BitSet], k: usize) -> EquivPartition {
    let len = s.group.len() * (s.m + 1);
    let named: Vec<BitSet> = generators
        .iter()
        .map(|g| BitSet::from_indices(len, (0..len).filter(|&x| g.contains(s.named_start + x))))
        .collect();
    partition_parts(s.m, s.group.len(), &named, k, s.n)
}

/// What a small-subalgebra atom stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallAtom {
    /// An old atom of the split algebra.
    Old { split_atom: usize },
    /// `s_τ y_c`, the join of `s_τR_j` over block `c`.
    Class { tau: Permutation, class: usize },
}

/// The subalgebra `B` of elements that contain, with any `s_τR_i`, every
/// `s_τR_j` with `R_j ≡ R_i`.
#[derive(Debug, Clone)]
pub struct SmallSubalgebra {
    pub bao: FiniteBAO,
    pub kinds: Vec<SmallAtom>,
    /// Each atom of `B` as an element of the split algebra.
    pub inclusion: Vec<BitSet>,
    pub partition: EquivPartition,
    pub closure: VerificationRecord,
}

pub fn small_subalgebra(s: &SplitAlgebra, part: &EquivPartition) -> Result<SmallSubalgebra, SplitError> {
    let na = s.atom_count();
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    let mut kinds = Vec::new();
    for (k, at) in s.atoms.iter().enumerate() {
        if let SplitAtom::Old { .. } = at {
            parts.push(BitSet::singleton(na, k));
            labels.push(s.bao.labels()[k].clone());
            kinds.push(SmallAtom::Old { split_atom: k });
        }
    }
    for tau in &s.group {
        for (c, block) in part.blocks.iter().enumerate() {
            parts.push(BitSet::from_indices(na, block.iter().map(|&j| s.named_atom(tau, j))));
            labels.push(named_label(tau, "y", c));
            kinds.push(SmallAtom::Class {
                tau: tau.clone(),
                class: c,
            });
        }
    }
    let view = AtomicSubalgebra::new(&s.bao, parts, labels)?;
    let closure = view.closure_laws();
    let (bao, inclusion) = view.to_bao()?;
    Ok(SmallSubalgebra {
        bao,
        kinds,
        inclusion,
        partition: part.clone(),
        closure,
    })
}

impl SmallSubalgebra {
    pub fn inclusion_hom<'a>(&'a self, s: &'a SplitAlgebra) -> Homomorphism<&'a FiniteBAO, &'a FiniteBAO> {
        Homomorphism::new(
            "B into split",
            &self.bao,
            &s.bao,
            self.inclusion.clone(),
            OpSet::full(s.n).with_replace(),
        )
        .expect("shapes agree")
    }

    /// Whether a split element belongs to `B`.
    pub fn contains(&self, x: &BitSet) -> bool {
        self.inclusion
            .iter()
            .all(|p| p.is_subset(x) || p.is_disjoint(x))
    }

    /// The `B`-element equal to a split element in `B`.
    pub fn restrict(&self, x: &BitSet) -> Option<BitSet> {
        self.contains(x).then(|| {
            BitSet::from_indices(
                self.inclusion.len(),
                (0..self.inclusion.len()).filter(|&k| self.inclusion[k].is_subset(x)),
            )
        })
    }

    /// `B`-atom index of `s_τ y_c`.
    pub fn class_atom(&self, tau: &Permutation, class: usize) -> Option<usize> {
        self.kinds
            .iter()
            .position(|k| matches!(k, SmallAtom::Class { tau: t, class: c } if t == tau && *c == class))
    }

    /// The image in `B` of a base element.
    pub fn embed_base(&self, s: &SplitAlgebra, x: &BitSet) -> BitSet {
        self.restrict(&s.embed_old(x)).expect("base elements lie in B")
    }
}

// ---------------------------------------------------------------------------
// real partitions

/// A partition of a product set into `q` pieces with full cylindrifications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealPartition {
    pub q: usize,
    /// Sorted factor sets of the target product.
    pub factors: Vec<Vec<usize>>,
    /// The representative `s`: the lexicographically least member.
    pub representative: Vec<usize>,
    /// `labelings[i][k]`: the label of the `k`-th point of factor `i`.
    pub labelings: Vec<Vec<usize>>,
    pub target: BitSet,
    pub pieces: Vec<BitSet>,
    pub record: VerificationRecord,
}

/// Partition `∏ factors` into pieces `{z : Σ f_i(z_i) ≡ j (mod q)}`.
///
/// Without explicit labelings each `f_i` numbers the sorted factor mod `q`,
/// so the representative's letters get label 0.
pub fn real_partition(
    space: &SeqSpace,
    factors: &[Vec<usize>],
    q: usize,
    labelings: Option<Vec<Vec<usize>>>,
) -> Result<RealPartition, SplitError> {
    if q == 0 {
        return Err(SplitError::ZeroParts);
    }
    let d = space.dimension();
    if factors.len() != d {
        return Err(SplitError::Labeling(format!("{} factors for dimension {d}", factors.len())));
    }
    let factors: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| {
            let mut f = f.clone();
            f.sort_unstable();
            f.dedup();
            f
        })
        .collect();
    for (i, f) in factors.iter().enumerate() {
        if f.len() < q {
            return Err(SplitError::BlockTooSmall {
                coord: i,
                size: f.len(),
                q,
            });
        }
        if f.iter().any(|&u| u >= space.universe()) {
            return Err(SplitError::Labeling(format!("factor {i} leaves the universe")));
        }
    }
    let labelings = match labelings {
        None => factors.iter().map(|f| (0..f.len()).map(|k| k % q).collect()).collect(),
        Some(ls) => {
            if ls.len() != d {
                return Err(SplitError::Labeling("one labeling per coordinate".into()));
            }
            for (i, (l, f)) in ls.iter().zip(&factors).enumerate() {
                if l.len() != f.len() || l.iter().any(|&v| v >= q) {
                    return Err(SplitError::Labeling(format!("labeling {i} has the wrong shape")));
                }
                if (0..q).any(|v| !l.contains(&v)) {
                    return Err(SplitError::Labeling(format!("labeling {i} is not onto Z_{q}")));
                }
                if l[0] != 0 {
                    return Err(SplitError::Labeling(format!(
                        "labeling {i} does not send the representative's letter to 0"
                    )));
                }
            }
            ls
        }
    };
    let representative: Vec<usize> = factors.iter().map(|f| f[0]).collect();
    let label_of: Vec<HashMap<usize, usize>> = factors
        .iter()
        .zip(&labelings)
        .map(|(f, l)| f.iter().copied().zip(l.iter().copied()).collect())
        .collect();
    let target = space.product(&factors);
    let mut pieces = vec![space.empty(); q];
    for p in target.iter() {
        let sum: usize = (0..d).map(|i| label_of[i][&space.coord(p, i)]).sum();
        pieces[sum % q].insert(p);
    }

    let mut record = VerificationRecord::new(format!("real partition into {q}"));
    let mut disjoint = Law::new("pieces_disjoint");
    let mut union = space.empty();
    for (j, piece) in pieces.iter().enumerate() {
        disjoint.check(union.is_disjoint(piece), || json!({ "piece": j }));
        union.union_with(piece);
    }
    record.push(disjoint);
    record.assert("pieces_cover_target", union == target, || {
        json!({ "missing": target.difference(&union).count() })
    });
    let mut cyl = Law::new("cyl_piece_equals_cyl_target");
    for i in 0..d {
        let whole = space.cyl(i, &target)?;
        for (j, piece) in pieces.iter().enumerate() {
            cyl.check(space.cyl(i, piece)? == whole, || json!({ "i": i, "piece": j }));
        }
    }
    record.push(cyl);
    Ok(RealPartition {
        q,
        factors,
        representative,
        labelings,
        target,
        pieces,
        record,
    })
}

// ---------------------------------------------------------------------------
// embeddings

/// The representation of `B` in the concrete algebra `A″` generated by the
/// pieces of a real partition of `R` into `m` parts.
///
/// `s_τ y_c` goes to `s_τ R′_c`, where `R′_c` is piece `c` for `c < p − 1` and
/// the join of pieces `p − 1 .. m − 1` for the last class; old atoms go to
/// their point sets in `A′`.
pub fn embed_small<'a>(
    s: &SplitAlgebra,
    b: &'a SmallSubalgebra,
    a_prime: &GeneratedAlgebra,
    rp: &RealPartition,
    a2: &'a GeneratedAlgebra,
) -> Result<Homomorphism<&'a FiniteBAO, &'a GeneratedAlgebra>, SplitError> {
    let p = b.partition.p();
    if rp.q != s.m {
        return Err(SplitError::Incompatible(format!(
            "partition has {} pieces, expected m = {}",
            rp.q, s.m
        )));
    }
    if p > s.m {
        return Err(SplitError::TooManyBlocks { p, m: s.m });
    }
    if a_prime.atoms().get(s.r_atom) != Some(&rp.target) {
        return Err(SplitError::Incompatible("partition target is not R".into()));
    }
    if a2.space() != a_prime.space() {
        return Err(SplitError::Incompatible("A″ lives on another space".into()));
    }
    let space = a2.space();
    let merged: Vec<BitSet> = (0..p)
        .map(|c| {
            if c + 1 < p {
                rp.pieces[c].clone()
            } else {
                rp.pieces[c..].iter().fold(space.empty(), |acc, x| acc.union(x))
            }
        })
        .collect();
    let images = b
        .kinds
        .iter()
        .map(|k| match k {
            SmallAtom::Old { split_atom } => match &s.atoms[*split_atom] {
                SplitAtom::Old { base_atom } => Ok(a_prime.atoms()[*base_atom].clone()),
                SplitAtom::Named { .. } => unreachable!("old B-atoms come from old split atoms"),
            },
            SmallAtom::Class { tau, class } => Ok(space.subst(tau, &merged[*class])?),
        })
        .collect::<Result<Vec<_>, SplitError>>()?;
    Ok(Homomorphism::new(
        "B into A″",
        &b.bao,
        a2,
        images,
        OpSet::full(s.n).with_replace(),
    )?)
}

/// `embed_small` is the identity on base elements: checked atom by atom.
pub fn identity_on_base(
    s: &SplitAlgebra,
    b: &SmallSubalgebra,
    a_prime: &GeneratedAlgebra,
    h: &Homomorphism<&FiniteBAO, &GeneratedAlgebra>,
) -> Law {
    let mut law = Law::new("identity_on_base");
    let na = s.base.atom_count();
    for a in 0..na {
        let x = b.embed_base(s, &BitSet::singleton(na, a));
        law.check(h.apply(&x) == a_prime.atoms()[a], || json!({ "base_atom": a }));
    }
    law
}

/// Balanced contiguous ranges: part `j` of `m₁ + 1` goes to a block of the `m₂ + 1` parts.
pub fn default_chi(m1: usize, m2: usize) -> Vec<Vec<usize>> {
    let (a, b) = (m1 + 1, m2 + 1);
    (0..a).map(|j| (j * b / a..(j + 1) * b / a).collect()).collect()
}

/// The embedding of `split(A′,R,m₁,n₁)` into the `G_{n₁}`-reduct of `split(A′,R,m₂,n₂)`.
pub fn embed_split<'a>(
    s1: &'a SplitAlgebra,
    s2: &'a SplitAlgebra,
    chi: Option<Vec<Vec<usize>>>,
) -> Result<Homomorphism<&'a FiniteBAO, &'a FiniteBAO>, SplitError> {
    if s1.base != s2.base || s1.r_atom != s2.r_atom {
        return Err(SplitError::Incompatible("splits of different base algebras".into()));
    }
    if s1.m >= s2.m || s1.n > s2.n {
        return Err(SplitError::Incompatible(format!(
            "need m₁ < m₂ and n₁ ≤ n₂, got ({}, {}) and ({}, {})",
            s1.m, s1.n, s2.m, s2.n
        )));
    }
    let chi = chi.unwrap_or_else(|| default_chi(s1.m, s2.m));
    if chi.len() != s1.m + 1 {
        return Err(SplitError::Chi(format!("{} images for {} parts", chi.len(), s1.m + 1)));
    }
    let mut seen = vec![false; s2.m + 1];
    for (j, img) in chi.iter().enumerate() {
        if img.is_empty() {
            return Err(SplitError::Chi(format!("part {j} has an empty image")));
        }
        for &i in img {
            if i > s2.m || seen[i] {
                return Err(SplitError::Chi(format!("part {i} of the target is reused or out of range")));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|&x| !x) {
        return Err(SplitError::Chi("images do not cover the target parts".into()));
    }
    let images = s1
        .atoms
        .iter()
        .map(|at| match at {
            SplitAtom::Old { base_atom } => {
                s2.embed_old(&BitSet::singleton(s2.base.atom_count(), *base_atom))
            }
            SplitAtom::Named { tau, part } => BitSet::from_indices(
                s2.atom_count(),
                chi[*part].iter().map(|&i| s2.named_atom(tau, i)),
            ),
        })
        .collect();
    Ok(Homomorphism::new(
        format!("split(m={},n={}) into split(m={},n={})", s1.m, s1.n, s2.m, s2.n),
        &s1.bao,
        &s2.bao,
        images,
        OpSet::full(s1.n).with_replace(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{generate, BaseSpec, DEFAULT_CLOSURE_CAP};
    use crate::terms::{check_quasi_equation, disjoint_from_diagonal_quasi_equation, Strategy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn build(blocks: Vec<usize>, n: usize) -> (BaseSpec, GeneratedAlgebra, BitSet) {
        let base = BaseSpec::new(blocks).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, n, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).unwrap();
        (base, a, r)
    }

    #[test]
    fn tiny_atom_count_matches_formula() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        assert_eq!(s.atom_count(), a.atoms().len() - 2 + 2 * 3);
        let rec = verify_bao(s.bao());
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
        let inv = s.invariants();
        assert!(inv.passed(), "{:?}", inv.failures().collect::<Vec<_>>());
        assert_eq!(inv.get("cyl_parts_match_r").unwrap().checked, 18);
    }

    use crate::bao::verify_bao;

    #[test]
    fn one_part_is_isomorphic_to_base() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 0, 2).unwrap();
        assert_eq!(s.atom_count(), a.atoms().len());
        let h = s.embed_old_hom();
        let rec = verify_hom(&h, VerifyMode::Exhaustive);
        assert!(rec.passed());
        // a bijection on atoms
        assert!(h.atom_images().iter().all(|x| x.count() == 1));
    }

    #[test]
    fn rejects_non_atoms_and_diagonal_atoms() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let big = r.union(&a.space().subst(&Permutation::transposition(0, 1), &r).unwrap());
        assert!(matches!(split(&a, &big, 2, 2), Err(SplitError::NotAnAtom)));
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let diag_atom = b.diag_atoms(0, 1).first().unwrap();
        assert!(matches!(
            split_bao(&b, diag_atom, 2, 2),
            Err(SplitError::MeetsDiagonal { .. }) | Err(SplitError::OrbitOverlap { .. })
        ));
        assert!(matches!(split_bao(&b, 0, 2, 3), Err(SplitError::SubstBound { .. })));
    }

    #[test]
    fn decomposition_examples() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let na = a.atoms().len();
        let some_old = BitSet::from_indices(na, [0, 3]);
        let x = s.embed_old(&some_old);
        let dec = s.decompose(&x);
        assert_eq!(dec.old, some_old);
        assert!(dec.named.is_empty());
        let r0 = s.part(0);
        let dec = s.decompose(&r0);
        assert!(dec.old.is_empty());
        assert_eq!(dec.named, vec![(Permutation::identity(), 0)]);
        let dec = s.decompose(&s.r_element());
        assert_eq!(dec.old, BitSet::singleton(na, s.r_atom()));
        assert!(dec.named.is_empty());
    }

    #[test]
    fn decomposition_recomposes_random_elements() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = BitSet::from_indices(s.atom_count(), (0..s.atom_count()).filter(|_| rng.gen_bool(0.5)));
            assert_eq!(s.recompose(&s.decompose(&x)), x);
        }
    }

    #[test]
    fn tau_vanishes_and_quasi_equation_persists() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let q = disjoint_from_diagonal_quasi_equation(i, j, 3).unwrap();
                assert!(check_quasi_equation(&q, s.bao(), Strategy::Exhaustive, 0).unwrap().holds());
            }
        }
    }

    #[test]
    fn uniqueness_under_atom_reordering() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let base = FiniteBAO::from_concrete(&a).unwrap();
        let ri = a.atom_index(&r).unwrap();
        let na = base.atom_count();
        let mut order: Vec<usize> = (0..na).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in (1..na).rev() {
            order.swap(k, rng.gen_range(0..=k));
        }
        let shuffled = base.reordered(&order).unwrap();
        let mut base_map = vec![0; na];
        for (new, &old) in order.iter().enumerate() {
            base_map[old] = new;
        }
        let s1 = split_bao(&base, ri, 2, 2).unwrap();
        let s2 = split_bao(&shuffled, base_map[ri], 2, 2).unwrap();
        let iso = split_isomorphism(&s1, &s2, &base_map).unwrap();
        assert!(verify_hom(&iso, VerifyMode::Exhaustive).passed());
        assert!(iso.atom_images().iter().all(|x| x.count() == 1));
        assert_eq!(s1.atom_count(), s2.atom_count());
    }

    #[test]
    fn equiv_examples() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 3, 1).unwrap();
        let p = equiv_blocks(&s, &[], 1);
        assert_eq!(p.blocks, vec![vec![0, 1, 2, 3]]);
        let p = equiv_blocks(&s, &[s.part(0)], 1);
        assert_eq!(p.blocks, vec![vec![0], vec![1, 2, 3]]);
        assert_eq!(p.bound, 2);
        assert!(p.warnings.is_empty());
        let p = equiv_blocks(&s, &[s.part(0), s.part(1)], 1);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn block_bound_on_random_generators() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let g: Vec<BitSet> = (0..2)
                .map(|_| BitSet::from_indices(s.atom_count(), (0..s.atom_count()).filter(|_| rng.gen_bool(0.5))))
                .collect();
            let p = equiv_blocks(&s, &g, 2);
            assert!(p.p() as u128 <= 16);
            assert!(p.within_bound());
        }
    }

    #[test]
    fn small_subalgebra_examples() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        // a single block: B is the base algebra
        let one = equiv_blocks(&s, &[], 1);
        let b = small_subalgebra(&s, &one).unwrap();
        assert!(b.closure.passed());
        assert_eq!(b.bao.atom_count(), a.atoms().len());
        // with a generator
        let part = equiv_blocks(&s, &[s.part(0)], 1);
        let b = small_subalgebra(&s, &part).unwrap();
        assert!(b.closure.passed(), "{:?}", b.closure.failures().collect::<Vec<_>>());
        assert!(verify_bao(&b.bao).passed());
        assert!(b.contains(&s.part(0)));
        assert!(!b.contains(&s.part(1)));
        assert!(b.contains(&s.bao().diag(0, 1)));
        let inc = b.inclusion_hom(&s);
        assert!(verify_hom(&inc, VerifyMode::Exhaustive).passed());
        // y_c has the cylindrifications of R
        for c in 0..part.p() {
            let y = b.bao.atom(b.class_atom(&Permutation::identity(), c).unwrap());
            for i in 0..3 {
                assert_eq!(inc.apply(&b.bao.cyl(i, &y)), s.bao().cyl(i, &s.r_element()));
            }
        }
    }

    #[test]
    fn real_partition_examples() {
        let base = BaseSpec::new(vec![2, 2, 2]).unwrap();
        let sp = base.space().unwrap();
        let factors: Vec<Vec<usize>> = (0..3).map(|i| base.block_range(i).collect()).collect();
        let one = real_partition(&sp, &factors, 1, None).unwrap();
        assert_eq!(one.pieces.len(), 1);
        assert_eq!(one.pieces[0], one.target);
        let two = real_partition(&sp, &factors, 2, None).unwrap();
        assert!(two.record.passed());
        assert_eq!(two.pieces.iter().map(BitSet::count).collect::<Vec<_>>(), vec![4, 4]);
        assert_eq!(two.representative, vec![0, 2, 4]);
        assert!(two.pieces[0].contains(sp.index(&[0, 2, 4])));
        assert!(matches!(
            real_partition(&sp, &factors, 3, None),
            Err(SplitError::BlockTooSmall { q: 3, size: 2, .. })
        ));
        assert!(matches!(
            real_partition(&sp, &factors, 2, Some(vec![vec![1, 0], vec![0, 1], vec![0, 1]])),
            Err(SplitError::Labeling(_))
        ));
    }

    #[test]
    fn real_partition_cyl_condition_brute_force() {
        // oracle: for each piece and coordinate, every point of c_i(target) has
        // a piece member on its i-line
        let base = BaseSpec::new(vec![3, 3, 3]).unwrap();
        let sp = base.space().unwrap();
        let factors: Vec<Vec<usize>> = (0..3).map(|i| base.block_range(i).collect()).collect();
        let rp = real_partition(&sp, &factors, 3, None).unwrap();
        assert!(rp.record.passed());
        for piece in &rp.pieces {
            for i in 0..3 {
                for p in rp.target.iter() {
                    assert!(sp.line(p, i).any(|x| piece.contains(x)));
                }
            }
        }
    }

    #[test]
    fn embed_small_at_tiny_parameters() {
        let (base, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let part = equiv_blocks(&s, &[s.part(0)], 1);
        let b = small_subalgebra(&s, &part).unwrap();
        let factors: Vec<Vec<usize>> = (0..3).map(|i| base.block_range(i).collect()).collect();
        let rp = real_partition(a.space(), &factors, 2, None).unwrap();
        let a2 = generate(a.space().clone(), 2, &rp.pieces, DEFAULT_CLOSURE_CAP).unwrap();
        let h = embed_small(&s, &b, &a, &rp, &a2).unwrap();
        let rec = verify_hom(&h, VerifyMode::Exhaustive);
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
        assert!(identity_on_base(&s, &b, &a, &h).finish().passed());
        // s_τ y_0 ↦ s_τ R″_0
        let t = Permutation::transposition(0, 1);
        let y = b.bao.atom(b.class_atom(&t, 0).unwrap());
        assert_eq!(h.apply(&y), a.space().subst(&t, &rp.pieces[0]).unwrap());
    }

    #[test]
    fn embed_small_rejects_too_many_blocks() {
        let (base, a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let part = equiv_blocks(&s, &[s.part(0).union(&s.part(1)), s.part(0)], 2);
        assert_eq!(part.p(), 3);
        let b = small_subalgebra(&s, &part).unwrap();
        let factors: Vec<Vec<usize>> = (0..3).map(|i| base.block_range(i).collect()).collect();
        let rp = real_partition(a.space(), &factors, 2, None).unwrap();
        let a2 = generate(a.space().clone(), 2, &rp.pieces, DEFAULT_CLOSURE_CAP).unwrap();
        assert!(matches!(
            embed_small(&s, &b, &a, &rp, &a2),
            Err(SplitError::TooManyBlocks { p: 3, m: 2 })
        ));
    }

    #[test]
    fn default_chi_is_balanced() {
        assert_eq!(default_chi(2, 4), vec![vec![0], vec![1, 2], vec![3, 4]]);
        assert_eq!(default_chi(0, 3), vec![vec![0, 1, 2, 3]]);
        for (m1, m2) in [(1, 2), (2, 8), (3, 4)] {
            let chi = default_chi(m1, m2);
            let all: Vec<usize> = chi.iter().flatten().copied().collect();
            assert_eq!(all, (0..=m2).collect::<Vec<_>>());
            assert!(chi.iter().all(|c| !c.is_empty()));
        }
    }

    #[test]
    fn split_embeddings_chain() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s1 = split(&a, &r, 2, 1).unwrap();
        let s2 = split(&a, &r, 4, 2).unwrap();
        let s3 = split(&a, &r, 8, 2).unwrap();
        let h12 = embed_split(&s1, &s2, None).unwrap();
        let h23 = embed_split(&s2, &s3, None).unwrap();
        assert!(verify_hom(&h12, VerifyMode::Exhaustive).passed());
        assert!(verify_hom(&h23, VerifyMode::Exhaustive).passed());
        let h13 = h12.then(&h23).unwrap();
        let rec = verify_hom(&h13, VerifyMode::Exhaustive);
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
        // base elements are fixed, named atoms spread over χ
        let na = a.atoms().len();
        let x = BitSet::from_indices(na, [0, 1]);
        assert_eq!(h12.apply(&s1.embed_old(&x)), s2.embed_old(&x));
        let id = Permutation::identity();
        let img = h12.apply(&s1.part(1));
        assert_eq!(img, BitSet::from_indices(s2.atom_count(), [s2.named_atom(&id, 1), s2.named_atom(&id, 2)]));
        // nonzero below s_τR stays nonzero
        for j in 0..=2 {
            assert!(!h12.apply(&s1.part(j)).is_empty());
        }
    }

    #[test]
    fn embed_split_rejects_bad_chi() {
        let (_, a, r) = build(vec![2, 2, 2], 2);
        let s1 = split(&a, &r, 2, 1).unwrap();
        let s2 = split(&a, &r, 4, 2).unwrap();
        for chi in [
            vec![vec![0], vec![1, 2], vec![]],
            vec![vec![0], vec![1, 2], vec![2, 3, 4]],
            vec![vec![0], vec![1, 2], vec![3]],
            vec![vec![0, 1, 2, 3, 4]],
        ] {
            assert!(matches!(embed_split(&s1, &s2, Some(chi)), Err(SplitError::Chi(_))));
        }
        assert!(matches!(embed_split(&s2, &s1, None), Err(SplitError::Incompatible(_))));
    }

    #[test]
    fn left_translation_permutes_the_group() {
        for n in 1..=3 {
            let g = Permutation::group(n);
            for sigma in &g {
                let mut t: Vec<_> = g.iter().map(|tau| sigma.compose(tau)).collect();
                t.sort();
                let mut sorted = g.clone();
                sorted.sort();
                assert_eq!(t, sorted);
            }
        }
    }
}

//! Finite atomic Boolean algebras with operators, given by their action on
//! atoms, and homomorphisms between finite algebras.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bitset::BitSet;
use crate::perm::Permutation;
use crate::verify::{Law, VerificationRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaoError {
    #[error("malformed operator table: {0}")]
    Malformed(String),
    #[error("source algebra is not atomic: {0}")]
    NonAtomic(String),
    #[error("atom image count {got} does not match source atom count {expected}")]
    ImageCount { expected: usize, got: usize },
    #[error("dimension mismatch: source {source_dim}, target {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("substitution bound {requested} exceeds what source ({source_n}) or target ({target_n}) supports")]
    SubstBound {
        requested: usize,
        source_n: usize,
        target_n: usize,
    },
}

/// Serialized form of a [`FiniteBAO`]: every table lists atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaoTables {
    pub dimension: usize,
    pub n: usize,
    pub labels: Vec<String>,
    /// `cyl[i][a]`: atoms below `c_i a`.
    pub cyl: Vec<Vec<Vec<usize>>>,
    /// One entry per element of `G_n`: the permutation and the atom it sends each atom to.
    pub subst: Vec<(Permutation, Vec<usize>)>,
    /// `diag[i][j]`: atoms below `d_ij`.
    pub diag: Vec<Vec<Vec<usize>>>,
}

/// A finite atomic BAO in the quasipolyadic-equality signature. Elements are
/// arbitrary sets of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BaoTables", into = "BaoTables")]
pub struct FiniteBAO {
    dimension: usize,
    n: usize,
    labels: Vec<String>,
    cyl: Vec<Vec<BitSet>>,
    group: Vec<Permutation>,
    group_index: HashMap<Permutation, usize>,
    subst: Vec<Vec<usize>>,
    diag: Vec<BitSet>,
}

impl TryFrom<BaoTables> for FiniteBAO {
    type Error = BaoError;

    fn try_from(t: BaoTables) -> Result<Self, BaoError> {
        FiniteBAO::from_tables(t)
    }
}

impl From<FiniteBAO> for BaoTables {
    fn from(b: FiniteBAO) -> BaoTables {
        b.tables()
    }
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, BaoError> {
    Err(BaoError::Malformed(msg.into()))
}

impl FiniteBAO {
    /// Build from tables. Only shapes are checked here; use [`verify_bao`] for the laws.
    pub fn from_tables(t: BaoTables) -> Result<Self, BaoError> {
        let atoms = t.labels.len();
        let d = t.dimension;
        let set = |v: &[usize], what: &str| -> Result<BitSet, BaoError> {
            if let Some(&bad) = v.iter().find(|&&a| a >= atoms) {
                return malformed(format!("{what} mentions atom {bad} of {atoms}"));
            }
            Ok(BitSet::from_indices(atoms, v.iter().copied()))
        };
        if t.n > d {
            return malformed(format!("substitution bound {} exceeds dimension {d}", t.n));
        }
        if t.cyl.len() != d || t.cyl.iter().any(|row| row.len() != atoms) {
            return malformed("cyl table must be dimension × atoms");
        }
        let cyl = t
            .cyl
            .iter()
            .map(|row| row.iter().map(|v| set(v, "cyl")).collect())
            .collect::<Result<Vec<Vec<BitSet>>, _>>()?;
        if t.diag.len() != d || t.diag.iter().any(|row| row.len() != d) {
            return malformed("diag table must be dimension × dimension");
        }
        let mut diag = Vec::with_capacity(d * d);
        for row in &t.diag {
            for v in row {
                diag.push(set(v, "diag")?);
            }
        }
        let group = Permutation::group(t.n);
        let mut by_perm: HashMap<Permutation, Vec<usize>> = HashMap::new();
        for (p, img) in t.subst {
            if img.len() != atoms || img.iter().any(|&a| a >= atoms) {
                return malformed(format!("subst row for {p} has wrong shape"));
            }
            by_perm.insert(p, img);
        }
        let mut subst = Vec::with_capacity(group.len());
        for p in &group {
            match by_perm.remove(p) {
                Some(img) => subst.push(img),
                None => return malformed(format!("subst table lacks {p}")),
            }
        }
        if let Some(p) = by_perm.keys().next() {
            return malformed(format!("subst table has {p} outside G_{}", t.n));
        }
        let group_index = group.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(FiniteBAO {
            dimension: d,
            n: t.n,
            labels: t.labels,
            cyl,
            group,
            group_index,
            subst,
            diag,
        })
    }

    pub fn tables(&self) -> BaoTables {
        let d = self.dimension;
        BaoTables {
            dimension: d,
            n: self.n,
            labels: self.labels.clone(),
            cyl: self
                .cyl
                .iter()
                .map(|row| row.iter().map(|s| s.iter().collect()).collect())
                .collect(),
            subst: self
                .group
                .iter()
                .cloned()
                .zip(self.subst.iter().cloned())
                .collect(),
            diag: (0..d)
                .map(|i| (0..d).map(|j| self.diag[i * d + j].iter().collect()).collect())
                .collect(),
        }
    }

    /// Read the operator action off any finite atomic algebra.
    pub fn from_concrete<A: FiniteAlgebra + ?Sized>(alg: &A) -> Result<Self, BaoError> {
        let atoms = alg.atom_count();
        let d = alg.dimension();
        let n = alg.subst_bound();
        let decompose = |x: &A::Elem, what: &dyn Fn() -> String| -> Result<BitSet, BaoError> {
            let below = alg.atoms_below(x);
            if alg.element_from_atoms(&below) != *x {
                return Err(BaoError::NonAtomic(what()));
            }
            Ok(below)
        };
        let atom_elems: Vec<A::Elem> = (0..atoms).map(|a| alg.atom(a)).collect();
        let mut cyl = Vec::with_capacity(d);
        for i in 0..d {
            let row = atom_elems
                .iter()
                .enumerate()
                .map(|(a, e)| decompose(&alg.cyl(i, e), &|| format!("c{i} of atom {a}")))
                .collect::<Result<Vec<_>, _>>()?;
            cyl.push(row);
        }
        let mut diag = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                diag.push(decompose(&alg.diag(i, j), &|| format!("d({i},{j})"))?);
            }
        }
        let group = Permutation::group(n);
        let mut subst = Vec::with_capacity(group.len());
        for p in &group {
            let mut row = Vec::with_capacity(atoms);
            for (a, e) in atom_elems.iter().enumerate() {
                let img = decompose(&alg.subst(p, e), &|| format!("s{p} of atom {a}"))?;
                if img.count() != 1 {
                    return Err(BaoError::NonAtomic(format!(
                        "s{p} sends atom {a} to {} atoms",
                        img.count()
                    )));
                }
                row.push(img.first().expect("one atom"));
            }
            subst.push(row);
        }
        let group_index = group.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(FiniteBAO {
            dimension: d,
            n,
            labels: (0..atoms).map(|a| format!("a{a}")).collect(),
            cyl,
            group,
            group_index,
            subst,
            diag,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, BaoError> {
        if labels.len() != self.labels.len() {
            return malformed("label count differs from atom count");
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn group(&self) -> &[Permutation] {
        &self.group
    }

    pub fn group_position(&self, p: &Permutation) -> Option<usize> {
        self.group_index.get(p).copied()
    }

    /// `c_i` of a single atom.
    pub fn cyl_atom(&self, i: usize, a: usize) -> &BitSet {
        &self.cyl[i][a]
    }

    /// `s_τ` of a single atom; `None` when `τ ∉ G_n`.
    pub fn subst_atom(&self, p: &Permutation, a: usize) -> Option<usize> {
        self.group_position(p).map(|g| self.subst[g][a])
    }

    pub fn diag_atoms(&self, i: usize, j: usize) -> &BitSet {
        &self.diag[i * self.dimension + j]
    }

    /// The same algebra with atoms listed in a new order: new atom `k` is old atom `order[k]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self, BaoError> {
        let atoms = self.labels.len();
        if order.len() != atoms || Permutation::from_mapping(order.to_vec()).is_err() {
            return malformed("reordering is not a permutation of the atoms");
        }
        let mut new_of_old = vec![0; atoms];
        for (k, &o) in order.iter().enumerate() {
            new_of_old[o] = k;
        }
        let remap = |s: &BitSet| BitSet::from_indices(atoms, s.iter().map(|a| new_of_old[a]));
        Ok(FiniteBAO {
            dimension: self.dimension,
            n: self.n,
            labels: order.iter().map(|&o| self.labels[o].clone()).collect(),
            cyl: self
                .cyl
                .iter()
                .map(|row| order.iter().map(|&o| remap(&row[o])).collect())
                .collect(),
            group: self.group.clone(),
            group_index: self.group_index.clone(),
            subst: self
                .subst
                .iter()
                .map(|row| order.iter().map(|&o| new_of_old[row[o]]).collect())
                .collect(),
            diag: self.diag.iter().map(remap).collect(),
        })
    }

    /// Overwrite one entry of the `c_i` table.
    pub fn set_cyl_atom(&mut self, i: usize, a: usize, image: BitSet) {
        self.cyl[i][a] = image;
    }

    /// Overwrite one entry of the `s_τ` table. Panics when `τ ∉ G_n`.
    pub fn set_subst_atom(&mut self, p: &Permutation, a: usize, image: usize) {
        let g = self.group_position(p).expect("permutation in G_n");
        self.subst[g][a] = image;
    }
}

impl Algebra for FiniteBAO {
    type Elem = BitSet;

    fn dimension(&self) -> usize {
        self.dimension
    }
    fn subst_bound(&self) -> usize {
        self.n
    }
    fn zero(&self) -> BitSet {
        BitSet::new(self.labels.len())
    }
    fn one(&self) -> BitSet {
        BitSet::full(self.labels.len())
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
        let mut out = self.zero();
        for x in a.iter() {
            out.union_with(&self.cyl[i][x]);
        }
        out
    }
    fn diag(&self, i: usize, j: usize) -> BitSet {
        self.diag_atoms(i, j).clone()
    }
    fn subst(&self, p: &Permutation, a: &BitSet) -> BitSet {
        let g = self
            .group_position(p)
            .unwrap_or_else(|| panic!("{p} is not in G_{}", self.n));
        BitSet::from_indices(self.labels.len(), a.iter().map(|x| self.subst[g][x]))
    }
    fn leq(&self, a: &BitSet, b: &BitSet) -> bool {
        a.is_subset(b)
    }
    fn is_zero(&self, a: &BitSet) -> bool {
        a.is_empty()
    }
}

impl FiniteAlgebra for FiniteBAO {
    fn atom_count(&self) -> usize {
        self.labels.len()
    }
    fn atom(&self, idx: usize) -> BitSet {
        BitSet::singleton(self.labels.len(), idx)
    }
    fn atoms_below(&self, x: &BitSet) -> BitSet {
        x.clone()
    }
    fn describe(&self, x: &BitSet) -> Value {
        json!(x.iter().map(|a| self.labels[a].as_str()).collect::<Vec<_>>())
    }
    fn element_from_atoms(&self, atoms: &BitSet) -> BitSet {
        atoms.clone()
    }
}

/// Check the BAO laws atom by atom. All operators are join-extensions of their
/// atom tables, so normality and additivity hold by construction and the
/// laws below, checked on atoms, hold for all elements.
pub fn verify_bao(b: &FiniteBAO) -> VerificationRecord {
    let d = b.dimension;
    let atoms = b.atom_count();
    let mut rec = VerificationRecord::new("finite BAO laws");
    let lbl = |a: usize| b.labels[a].clone();

    let mut normal = Law::new("cyl.normal");
    let mut incr = Law::new("cyl.increasing");
    let mut idem = Law::new("cyl.idempotent");
    let mut classes = Law::new("cyl.classes");
    let mut comm = Law::new("cyl.commute");
    for i in 0..d {
        normal.check(b.cyl(i, &b.zero()).is_empty(), || json!({ "i": i }));
        for a in 0..atoms {
            let ca = &b.cyl[i][a];
            incr.check(ca.contains(a), || json!({ "i": i, "atom": lbl(a) }));
            idem.check(b.cyl(i, ca) == *ca, || json!({ "i": i, "atom": lbl(a) }));
            for x in ca.iter() {
                classes.check(b.cyl[i][x] == *ca, || {
                    json!({ "i": i, "atom": lbl(a), "member": lbl(x) })
                });
            }
            for j in i + 1..d {
                comm.check(b.cyl(i, &b.cyl[j][a]) == b.cyl(j, ca), || {
                    json!({ "i": i, "j": j, "atom": lbl(a) })
                });
            }
        }
    }
    for l in [normal, incr, idem, classes, comm] {
        rec.push(l);
    }

    let one = b.one();
    let mut refl = Law::new("diag.reflexive");
    let mut sym = Law::new("diag.symmetric");
    let mut through = Law::new("diag.through_third");
    let mut full = Law::new("diag.cyl_full");
    let mut func = Law::new("diag.replacement_functional");
    for i in 0..d {
        refl.check(*b.diag_atoms(i, i) == one, || json!({ "i": i }));
        for j in 0..d {
            if i == j {
                continue;
            }
            let dij = b.diag_atoms(i, j);
            sym.check(dij == b.diag_atoms(j, i), || json!({ "i": i, "j": j }));
            full.check(b.cyl(i, dij) == one, || json!({ "i": i, "j": j }));
            for k in (0..d).filter(|&k| k != i && k != j) {
                let via = b.cyl(k, &b.diag_atoms(i, k).intersection(b.diag_atoms(k, j)));
                through.check(via == *dij, || json!({ "i": i, "j": j, "k": k }));
            }
            // c_i(d_ij · x) · c_i(d_ij · −x) ≤ −d_ij, checked for x an atom
            let per_atom: Vec<BitSet> = (0..atoms)
                .map(|a| b.cyl(i, &dij.intersection(&b.atom(a))))
                .collect();
            for a in 0..atoms {
                let others = (0..atoms)
                    .filter(|&x| x != a)
                    .fold(b.zero(), |acc, x| acc.union(&per_atom[x]));
                let both = per_atom[a].intersection(&others);
                func.check(both.is_disjoint(dij), || {
                    json!({ "i": i, "j": j, "atom": lbl(a) })
                });
            }
        }
    }
    for l in [refl, sym, through, full, func] {
        rec.push(l);
    }

    let mut bij = Law::new("subst.bijection");
    let mut ident = Law::new("subst.identity");
    let mut compose = Law::new("subst.compose");
    let mut sdiag = Law::new("subst.diagonal");
    let mut scyl = Law::new("subst.cyl");
    for (g, p) in b.group.iter().enumerate() {
        let row = &b.subst[g];
        let mut seen = vec![false; atoms];
        for &x in row {
            seen[x] = true;
        }
        bij.check(seen.iter().all(|&s| s), || json!({ "perm": p.to_string() }));
        if p.is_identity() {
            for a in 0..atoms {
                ident.check(row[a] == a, || json!({ "atom": lbl(a) }));
            }
        }
        for (h, q) in b.group.iter().enumerate() {
            let pq = b.group_index[&p.compose(q)];
            for a in 0..atoms {
                compose.check(b.subst[pq][a] == row[b.subst[h][a]], || {
                    json!({ "sigma": p.to_string(), "tau": q.to_string(), "atom": lbl(a) })
                });
            }
        }
        for i in 0..d {
            for j in 0..d {
                let img = b.subst(p, b.diag_atoms(i, j));
                sdiag.check(img == *b.diag_atoms(p.apply(i), p.apply(j)), || {
                    json!({ "perm": p.to_string(), "i": i, "j": j })
                });
            }
            for a in 0..atoms {
                let lhs = b.subst(p, &b.cyl[i][a]);
                let rhs = b.cyl(p.apply(i), &b.atom(row[a]));
                scyl.check(lhs == rhs, || {
                    json!({ "perm": p.to_string(), "i": i, "atom": lbl(a) })
                });
            }
        }
    }
    for l in [bij, ident, compose, sdiag, scyl] {
        rec.push(l);
    }
    rec
}

/// A subalgebra of a finite atomic algebra described by a partition of the
/// parent's atoms: each subalgebra atom is a set of parent atoms, and the
/// elements are the joins of subalgebra atoms.
#[derive(Debug, Clone)]
pub struct AtomicSubalgebra<A> {
    parent: A,
    parts: Vec<BitSet>,
    labels: Vec<String>,
}

impl<A: FiniteAlgebra> AtomicSubalgebra<A> {
    pub fn new(parent: A, parts: Vec<BitSet>, labels: Vec<String>) -> Result<Self, BaoError> {
        let n = parent.atom_count();
        if labels.len() != parts.len() {
            return malformed("label count differs from part count");
        }
        if parts.iter().any(|p| p.len() != n || p.is_empty()) {
            return malformed("parts must be nonempty sets of parent atoms");
        }
        Ok(AtomicSubalgebra {
            parent,
            parts,
            labels,
        })
    }

    pub fn parent(&self) -> &A {
        &self.parent
    }

    pub fn parts(&self) -> &[BitSet] {
        &self.parts
    }

    /// Whether `x` is a join of parts.
    pub fn contains(&self, x: &A::Elem) -> bool {
        let below = self.parent.atoms_below(x);
        if self.parent.element_from_atoms(&below) != *x {
            return false;
        }
        self.parts
            .iter()
            .all(|p| p.is_subset(&below) || p.is_disjoint(&below))
    }

    /// Check that the parts partition the parent's atoms and that every
    /// operator sends each part (and each diagonal) to a join of parts.
    pub fn closure_laws(&self) -> VerificationRecord {
        let mut rec = VerificationRecord::new("subalgebra closure");
        let n = self.parent.atom_count();
        let mut partition = Law::new("boolean.partition");
        let mut seen = BitSet::new(n);
        for (k, p) in self.parts.iter().enumerate() {
            partition.check(seen.is_disjoint(p), || json!({ "part": self.labels[k] }));
            seen.union_with(p);
        }
        partition.check(seen.is_full(), || json!({ "uncovered": seen.complement().iter().collect::<Vec<_>>() }));
        rec.push(partition);

        let d = self.parent.dimension();
        let mut diag = Law::new("closed.diag");
        for i in 0..d {
            for j in 0..d {
                diag.check(self.contains(&self.parent.diag(i, j)), || json!({ "i": i, "j": j }));
            }
        }
        rec.push(diag);
        let elems: Vec<A::Elem> = (0..self.parts.len()).map(|k| self.atom(k)).collect();
        let mut cyl = Law::new("closed.cyl");
        for i in 0..d {
            for (k, e) in elems.iter().enumerate() {
                cyl.check(self.contains(&self.parent.cyl(i, e)), || {
                    json!({ "i": i, "part": self.labels[k] })
                });
            }
        }
        rec.push(cyl);
        let mut subst = Law::new("closed.subst");
        for p in Permutation::group(self.parent.subst_bound()) {
            for (k, e) in elems.iter().enumerate() {
                subst.check(self.contains(&self.parent.subst(&p, e)), || {
                    json!({ "perm": p.to_string(), "part": self.labels[k] })
                });
            }
        }
        rec.push(subst);
        rec
    }

    /// The subalgebra as a standalone [`FiniteBAO`], with the inclusion's atom images.
    pub fn to_bao(&self) -> Result<(FiniteBAO, Vec<A::Elem>), BaoError> {
        let bao = FiniteBAO::from_concrete(self)?.with_labels(self.labels.clone())?;
        let images = (0..self.parts.len()).map(|k| self.atom(k)).collect();
        Ok((bao, images))
    }
}

impl<A: FiniteAlgebra> Algebra for AtomicSubalgebra<A> {
    type Elem = A::Elem;

    fn dimension(&self) -> usize {
        self.parent.dimension()
    }
    fn subst_bound(&self) -> usize {
        self.parent.subst_bound()
    }
    fn zero(&self) -> A::Elem {
        self.parent.zero()
    }
    fn one(&self) -> A::Elem {
        self.parent.one()
    }
    fn join(&self, a: &A::Elem, b: &A::Elem) -> A::Elem {
        self.parent.join(a, b)
    }
    fn meet(&self, a: &A::Elem, b: &A::Elem) -> A::Elem {
        self.parent.meet(a, b)
    }
    fn complement(&self, a: &A::Elem) -> A::Elem {
        self.parent.complement(a)
    }
    fn cyl(&self, i: usize, a: &A::Elem) -> A::Elem {
        self.parent.cyl(i, a)
    }
    fn diag(&self, i: usize, j: usize) -> A::Elem {
        self.parent.diag(i, j)
    }
    fn subst(&self, p: &Permutation, a: &A::Elem) -> A::Elem {
        self.parent.subst(p, a)
    }
    fn replace(&self, i: usize, j: usize, a: &A::Elem) -> A::Elem {
        self.parent.replace(i, j, a)
    }
}

impl<A: FiniteAlgebra> FiniteAlgebra for AtomicSubalgebra<A> {
    fn atom_count(&self) -> usize {
        self.parts.len()
    }
    fn atom(&self, idx: usize) -> A::Elem {
        self.parent.element_from_atoms(&self.parts[idx])
    }
    fn atoms_below(&self, x: &A::Elem) -> BitSet {
        let below = self.parent.atoms_below(x);
        BitSet::from_indices(
            self.parts.len(),
            (0..self.parts.len()).filter(|&k| self.parts[k].is_subset(&below)),
        )
    }
    fn describe(&self, x: &A::Elem) -> Value {
        let below = self.atoms_below(x);
        json!(below.iter().map(|k| self.labels[k].as_str()).collect::<Vec<_>>())
    }
}

/// The operations a homomorphism is declared to preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSet {
    pub boolean: bool,
    pub injective: bool,
    pub cyl: bool,
    pub diag: bool,
    /// Preserve `s_σ` for `σ ∈ G_k` with this `k`.
    pub subst: Option<usize>,
    /// Preserve the replacements `s_{[i|j]}`, taken in each algebra's own sense.
    pub replace: bool,
}

impl OpSet {
    /// Booleans, `c_i`, `d_ij`, `s_σ` (`σ ∈ G_n`), injectivity.
    pub fn full(n: usize) -> Self {
        OpSet {
            boolean: true,
            injective: true,
            cyl: true,
            diag: true,
            subst: Some(n),
            replace: false,
        }
    }

    /// Booleans, `c_i`, `d_ij`, injectivity.
    pub fn cylindric() -> Self {
        OpSet {
            subst: None,
            ..OpSet::full(0)
        }
    }

    pub fn with_replace(self) -> Self {
        OpSet {
            replace: true,
            ..self
        }
    }

    pub fn without_diag(self) -> Self {
        OpSet { diag: false, ..self }
    }

    fn meet(self, o: OpSet) -> OpSet {
        OpSet {
            boolean: self.boolean && o.boolean,
            injective: self.injective && o.injective,
            cyl: self.cyl && o.cyl,
            diag: self.diag && o.diag,
            subst: self.subst.zip(o.subst).map(|(a, b)| a.min(b)),
            replace: self.replace && o.replace,
        }
    }
}

/// A map from a finite atomic algebra, given by the images of its atoms and
/// extended to all elements by joins.
#[derive(Debug, Clone)]
pub struct Homomorphism<S: FiniteAlgebra, T: Algebra> {
    pub name: String,
    pub source: S,
    pub target: T,
    images: Vec<T::Elem>,
    pub ops: OpSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Every atom, every operator index; exact for join-extension maps.
    Exhaustive,
    /// Seeded random elements of the source.
    Sampled { count: u64, seed: u64 },
}

impl<S: FiniteAlgebra, T: FiniteAlgebra> Homomorphism<S, T> {
    pub fn new(
        name: impl Into<String>,
        source: S,
        target: T,
        images: Vec<T::Elem>,
        ops: OpSet,
    ) -> Result<Self, BaoError> {
        if images.len() != source.atom_count() {
            return Err(BaoError::ImageCount {
                expected: source.atom_count(),
                got: images.len(),
            });
        }
        if source.dimension() != target.dimension() {
            return Err(BaoError::DimensionMismatch {
                source_dim: source.dimension(),
                target_dim: target.dimension(),
            });
        }
        if let Some(k) = ops.subst {
            if k > source.subst_bound() || k > target.subst_bound() {
                return Err(BaoError::SubstBound {
                    requested: k,
                    source_n: source.subst_bound(),
                    target_n: target.subst_bound(),
                });
            }
        }
        Ok(Homomorphism {
            name: name.into(),
            source,
            target,
            images,
            ops,
        })
    }

    pub fn atom_images(&self) -> &[T::Elem] {
        &self.images
    }

    pub fn image_of_atom(&self, a: usize) -> &T::Elem {
        &self.images[a]
    }

    /// The join-extension of the atom map.
    pub fn apply(&self, x: &S::Elem) -> T::Elem {
        self.apply_atoms(&self.source.atoms_below(x))
    }

    pub fn apply_atoms(&self, atoms: &BitSet) -> T::Elem {
        atoms
            .iter()
            .fold(self.target.zero(), |acc, a| self.target.join(&acc, &self.images[a]))
    }

    /// `other ∘ self`.
    pub fn then<U>(&self, other: &Homomorphism<T, U>) -> Result<Homomorphism<S, U>, BaoError>
    where
        S: Clone,
        U: FiniteAlgebra + Clone,
    {
        let images = self.images.iter().map(|e| other.apply(e)).collect();
        Homomorphism::new(
            format!("{} ; {}", self.name, other.name),
            self.source.clone(),
            other.target.clone(),
            images,
            self.ops.meet(other.ops),
        )
    }
}

impl<A: FiniteAlgebra + Clone> Homomorphism<A, A> {
    pub fn identity(alg: A, ops: OpSet) -> Result<Self, BaoError> {
        let images = (0..alg.atom_count()).map(|a| alg.atom(a)).collect();
        Homomorphism::new("identity", alg.clone(), alg, images, ops)
    }
}

/// Check every declared operation of `h`.
///
/// In exhaustive mode the checks run on atoms: for a join-extension map,
/// Boolean preservation is equivalent to the atom images being pairwise
/// disjoint and covering the unit, injectivity to every atom image being
/// nonzero, and preservation of an additive unary operator to agreement on
/// atoms. Diagonals are constants and are compared directly.
pub fn verify_hom<S: FiniteAlgebra, T: FiniteAlgebra>(
    h: &Homomorphism<S, T>,
    mode: VerifyMode,
) -> VerificationRecord {
    match mode {
        VerifyMode::Exhaustive => verify_atoms(h),
        VerifyMode::Sampled { count, seed } => verify_sampled(h, count, seed),
    }
}

fn diag_laws<S: FiniteAlgebra, T: FiniteAlgebra>(h: &Homomorphism<S, T>, rec: &mut VerificationRecord) {
    let (src, tgt) = (&h.source, &h.target);
    let d = src.dimension();
    let mut law = Law::new("diag");
    for i in 0..d {
        for j in i + 1..d {
            let got = h.apply(&src.diag(i, j));
            let want = tgt.diag(i, j);
            law.check(got == want, || {
                let extra = tgt.meet(&got, &tgt.complement(&want));
                let missing = tgt.meet(&want, &tgt.complement(&got));
                json!({
                    "i": i,
                    "j": j,
                    "in_image_not_diagonal": tgt.describe_member(&extra),
                    "in_diagonal_not_image": tgt.describe_member(&missing),
                })
            });
        }
    }
    rec.push(law);
}

fn verify_atoms<S: FiniteAlgebra, T: FiniteAlgebra>(h: &Homomorphism<S, T>) -> VerificationRecord {
    let (src, tgt) = (&h.source, &h.target);
    let d = src.dimension();
    let atoms = src.atom_count();
    let mut rec = VerificationRecord::new(h.name.clone());
    let src_atoms: Vec<S::Elem> = (0..atoms).map(|a| src.atom(a)).collect();
    let desc = |a: usize| src.describe(&src_atoms[a]);

    if h.ops.boolean {
        let mut disjoint = Law::new("boolean.disjoint");
        let mut union = tgt.zero();
        for a in 0..atoms {
            let ha = &h.images[a];
            disjoint.check(tgt.is_zero(&tgt.meet(&union, ha)), || {
                let clash = (0..a)
                    .find(|&b| !tgt.is_zero(&tgt.meet(&h.images[b], ha)))
                    .expect("an earlier image overlaps");
                json!({ "atoms": [desc(clash), desc(a)] })
            });
            union = tgt.join(&union, ha);
        }
        rec.push(disjoint);
        let mut unit = Law::new("boolean.unit");
        unit.check(union == tgt.one(), || {
            json!({ "uncovered": tgt.describe_member(&tgt.complement(&union)) })
        });
        rec.push(unit);
    }
    if h.ops.injective {
        let mut inj = Law::new("injective");
        for a in 0..atoms {
            inj.check(!tgt.is_zero(&h.images[a]), || json!({ "atom": desc(a) }));
        }
        rec.push(inj);
    }
    if h.ops.cyl {
        let mut law = Law::new("cyl");
        for i in 0..d {
            for a in 0..atoms {
                let lhs = h.apply(&src.cyl(i, &src_atoms[a]));
                let rhs = tgt.cyl(i, &h.images[a]);
                law.check(lhs == rhs, || json!({ "i": i, "atom": desc(a) }));
            }
        }
        rec.push(law);
    }
    if h.ops.diag {
        diag_laws(h, &mut rec);
    }
    if let Some(k) = h.ops.subst {
        let mut law = Law::new("subst");
        for p in Permutation::group(k) {
            for a in 0..atoms {
                let lhs = h.apply(&src.subst(&p, &src_atoms[a]));
                let rhs = tgt.subst(&p, &h.images[a]);
                law.check(lhs == rhs, || json!({ "perm": p.to_string(), "atom": desc(a) }));
            }
        }
        rec.push(law);
    }
    if h.ops.replace {
        let mut law = Law::new("replace");
        for i in 0..d {
            for j in (0..d).filter(|&j| j != i) {
                for a in 0..atoms {
                    let lhs = h.apply(&src.replace(i, j, &src_atoms[a]));
                    let rhs = tgt.replace(i, j, &h.images[a]);
                    law.check(lhs == rhs, || json!({ "i": i, "j": j, "atom": desc(a) }));
                }
            }
        }
        rec.push(law);
    }
    rec
}

fn verify_sampled<S: FiniteAlgebra, T: FiniteAlgebra>(
    h: &Homomorphism<S, T>,
    count: u64,
    seed: u64,
) -> VerificationRecord {
    let (src, tgt) = (&h.source, &h.target);
    let d = src.dimension();
    let atoms = src.atom_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = VerificationRecord::new(format!("{} (sampled, seed {seed})", h.name));
    let random = |rng: &mut ChaCha8Rng| {
        let m = BitSet::from_indices(atoms, (0..atoms).filter(|_| rng.gen_bool(0.5)));
        src.element_from_atoms(&m)
    };
    let group = h.ops.subst.map(Permutation::group).unwrap_or_default();
    let mut laws: Vec<Law> = Vec::new();
    let (mut join, mut meet, mut comp, mut inj, mut cyl, mut subst, mut repl) = (
        Law::new("boolean.join"),
        Law::new("boolean.meet"),
        Law::new("boolean.complement"),
        Law::new("injective"),
        Law::new("cyl"),
        Law::new("subst"),
        Law::new("replace"),
    );
    for _ in 0..count {
        let x = random(&mut rng);
        let y = random(&mut rng);
        let (hx, hy) = (h.apply(&x), h.apply(&y));
        let wit = || json!({ "x": src.describe(&x), "y": src.describe(&y) });
        if h.ops.boolean {
            join.check(h.apply(&src.join(&x, &y)) == tgt.join(&hx, &hy), wit);
            meet.check(h.apply(&src.meet(&x, &y)) == tgt.meet(&hx, &hy), wit);
            comp.check(h.apply(&src.complement(&x)) == tgt.complement(&hx), wit);
        }
        if h.ops.injective {
            inj.check(x == y || hx != hy, wit);
        }
        if h.ops.cyl {
            let i = rng.gen_range(0..d);
            cyl.check(h.apply(&src.cyl(i, &x)) == tgt.cyl(i, &hx), || {
                json!({ "i": i, "x": src.describe(&x) })
            });
        }
        if !group.is_empty() {
            let p = &group[rng.gen_range(0..group.len())];
            subst.check(h.apply(&src.subst(p, &x)) == tgt.subst(p, &hx), || {
                json!({ "perm": p.to_string(), "x": src.describe(&x) })
            });
        }
        if h.ops.replace && d > 1 {
            let i = rng.gen_range(0..d);
            let j = (i + rng.gen_range(1..d)) % d;
            repl.check(h.apply(&src.replace(i, j, &x)) == tgt.replace(i, j, &hx), || {
                json!({ "i": i, "j": j, "x": src.describe(&x) })
            });
        }
    }
    if h.ops.boolean {
        laws.extend([join, meet, comp]);
    }
    if h.ops.injective {
        laws.push(inj);
    }
    if h.ops.cyl {
        laws.push(cyl);
    }
    if h.ops.subst.is_some() {
        laws.push(subst);
    }
    if h.ops.replace {
        laws.push(repl);
    }
    for l in laws {
        rec.push(l);
    }
    if h.ops.diag {
        diag_laws(h, &mut rec);
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{generate, BaseSpec, SeqSpace, SetAlgebra, DEFAULT_CLOSURE_CAP};
    use crate::terms::{eval_term, parse_term};
    use std::sync::Arc;

    fn tiny_a() -> (BaseSpec, crate::setalg::GeneratedAlgebra, BitSet) {
        let base = BaseSpec::new(vec![2, 2, 2]).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, 2, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).unwrap();
        (base, a, r)
    }

    #[test]
    fn one_point_space_is_degenerate() {
        let sp = Arc::new(SeqSpace::new(1, 1).unwrap());
        let alg = SetAlgebra::new(sp, 1).unwrap();
        let b = FiniteBAO::from_concrete(&alg).unwrap();
        assert_eq!(b.atom_count(), 1);
        assert_eq!(b.cyl(0, &b.one()), b.one());
        assert!(verify_bao(&b).passed());
    }

    #[test]
    fn concrete_tables_swap_r_and_its_transpose() {
        let (_, a, r) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let sp = a.space();
        let t = Permutation::transposition(0, 1);
        let ri = a.atom_index(&r).unwrap();
        let tri = a.atom_index(&sp.subst(&t, &r).unwrap()).unwrap();
        assert_ne!(ri, tri);
        assert_eq!(b.subst_atom(&t, ri), Some(tri));
        assert_eq!(b.subst_atom(&t, tri), Some(ri));
        let rec = verify_bao(&b);
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
    }

    #[test]
    fn evaluation_commutes_with_from_concrete() {
        let (_, a, r) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let ri = a.atom_index(&r).unwrap();
        let rb = b.atom(ri);
        for text in [
            "c1(c2(x0)) * c0(d(0,1) * c1(c2(x0))) * -d(0,1)",
            "s[0,1](c0(x0)) + -c2(x0 * d(1,2))",
            "c0(d(0,1) * c1(c2(x0))) * c1(d(1,0) * c1(c2(x0))) * -d(0,1) * -d(0,2) * -d(1,2)",
        ] {
            let t = parse_term(text, 3, 2).unwrap();
            let concrete = eval_term(&t, std::slice::from_ref(&r), &a).unwrap();
            let abstract_ = eval_term(&t, std::slice::from_ref(&rb), &b).unwrap();
            assert_eq!(a.element_from_atoms(&abstract_), concrete, "{text}");
        }
        // every atom, every operator
        for x in 0..b.atom_count() {
            for i in 0..3 {
                let c = a.cyl(i, &a.atom(x));
                assert_eq!(a.element_from_atoms(b.cyl_atom(i, x)), c);
            }
        }
    }

    #[test]
    fn broken_involution_is_caught() {
        let (_, a, r) = tiny_a();
        let mut b = FiniteBAO::from_concrete(&a).unwrap();
        let ri = a.atom_index(&r).unwrap();
        let t = Permutation::transposition(0, 1);
        b.set_subst_atom(&t, ri, ri);
        let rec = verify_bao(&b);
        let law = rec.get("subst.compose").unwrap();
        assert!(!law.passed());
        assert!(law.witness.is_some());
        assert!(!rec.get("subst.bijection").unwrap().passed());
    }

    #[test]
    fn missing_self_in_cylinder_is_caught() {
        let (_, a, _) = tiny_a();
        let mut b = FiniteBAO::from_concrete(&a).unwrap();
        let mut img = b.cyl_atom(1, 0).clone();
        img.remove(0);
        b.set_cyl_atom(1, 0, img);
        let rec = verify_bao(&b);
        let law = rec.get("cyl.increasing").unwrap();
        assert!(!law.passed());
        assert_eq!(law.witness.as_ref().unwrap()["atom"], "a0");
    }

    #[test]
    fn tables_roundtrip_through_json() {
        let (_, a, _) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        let back: FiniteBAO = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        let mut t = b.tables();
        t.subst.pop();
        assert!(matches!(FiniteBAO::from_tables(t), Err(BaoError::Malformed(_))));
    }

    #[test]
    fn identity_and_concrete_representation_pass() {
        let (_, a, _) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let id = Homomorphism::identity(&b, OpSet::full(2).with_replace()).unwrap();
        assert!(verify_hom(&id, VerifyMode::Exhaustive).passed());
        assert!(verify_hom(&id, VerifyMode::Sampled { count: 50, seed: 1 }).passed());
        // atoms back to their point sets: the identity representation of A′
        let amb = a.ambient();
        let rep = Homomorphism::new("atoms to sets", &b, &amb, a.atoms().to_vec(), OpSet::full(2).with_replace())
            .unwrap();
        let rec = verify_hom(&rep, VerifyMode::Exhaustive);
        assert!(rec.passed(), "{:?}", rec.failures().collect::<Vec<_>>());
        let composed = id.then(&rep).unwrap();
        assert!(verify_hom(&composed, VerifyMode::Exhaustive).passed());
    }

    #[test]
    fn boolean_only_map_breaks_cylindrification() {
        let (_, a, _) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let amb = a.ambient();
        // rotate the atom images: still a Boolean embedding, not a cyl-homomorphism
        let k = a.atoms().len();
        let imgs: Vec<BitSet> = (0..k).map(|x| a.atoms()[(x + 1) % k].clone()).collect();
        let h = Homomorphism::new("rotated", &b, &amb, imgs, OpSet::full(2)).unwrap();
        let rec = verify_hom(&h, VerifyMode::Exhaustive);
        assert!(rec.get("boolean.disjoint").unwrap().passed());
        assert!(rec.get("injective").unwrap().passed());
        assert!(!rec.get("cyl").unwrap().passed());
        let sampled = verify_hom(&h, VerifyMode::Sampled { count: 40, seed: 2 });
        assert!(!sampled.passed());
    }

    #[test]
    fn reordering_gives_isomorphic_copy() {
        let (_, a, _) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let k = b.atom_count();
        let order: Vec<usize> = (0..k).rev().collect();
        let c = b.reordered(&order).unwrap();
        assert!(verify_bao(&c).passed());
        // old atom o ↦ new atom k-1-o
        let imgs = (0..k).map(|o| c.atom(k - 1 - o)).collect();
        let iso = Homomorphism::new("reorder", &b, &c, imgs, OpSet::full(2)).unwrap();
        assert!(verify_hom(&iso, VerifyMode::Exhaustive).passed());
    }

    #[test]
    fn image_count_is_checked() {
        let (_, a, _) = tiny_a();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        assert!(matches!(
            Homomorphism::new("short", &b, &b, vec![], OpSet::full(2)),
            Err(BaoError::ImageCount { .. })
        ));
        assert!(matches!(
            Homomorphism::new("big", &b, &b, (0..b.atom_count()).map(|x| b.atom(x)).collect(), OpSet::full(3)),
            Err(BaoError::SubstBound { .. })
        ));
    }
}

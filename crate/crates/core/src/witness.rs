//! The witness term `τ_m`, the refutation of purported representations of a
//! split algebra, and a bounded search for representations of finite BAOs.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bao::{verify_hom, FiniteBAO, Homomorphism, OpSet, VerifyMode};
use crate::bitset::BitSet;
use crate::perm::Permutation;
use crate::setalg::{SeqSpace, SetAlgError, SetAlgebra};
use crate::splitting::SplitAlgebra;
use crate::terms::{derived_subst, eval_term, Term, TermError};
use crate::verify::{Law, VerificationRecord};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("the witness term needs m >= 1")]
    MTooSmall,
    #[error("the witness term for m = {m} needs dimension at least {needed}, got {dimension}")]
    DimensionTooSmall { m: usize, needed: usize, dimension: usize },
    #[error("search budget of {budget} nodes exhausted at base size {size}")]
    BudgetExceeded { budget: u64, size: usize },
    #[error("search supports at most {SEARCH_ATOM_LIMIT} atoms, got {0}")]
    TooManyAtoms(usize),
    #[error("target dimension {target} differs from the split algebra's {source_dim}")]
    TargetMismatch { source_dim: usize, target: usize },
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    SetAlg(#[from] SetAlgError),
}

/// `τ_m(x) = ∏_{i≤m} s_i^0 c_1…c_m x · ∏_{i<j≤m} −d_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessTerm {
    pub m: usize,
    pub term: Term,
}

pub fn tau(m: usize, dimension: usize) -> Result<WitnessTerm, WitnessError> {
    if m == 0 {
        return Err(WitnessError::MTooSmall);
    }
    if dimension < m + 1 {
        return Err(WitnessError::DimensionTooSmall {
            m,
            needed: m + 1,
            dimension,
        });
    }
    let body = (1..=m).rev().fold(Term::Var(0), |acc, i| Term::cyl(i, acc));
    let mut factors = Vec::new();
    for i in 0..=m {
        factors.push(derived_subst(0, i, body.clone(), dimension)?);
    }
    for i in 0..=m {
        for j in i + 1..=m {
            factors.push(Term::complement(Term::diag(i, j)));
        }
    }
    Ok(WitnessTerm {
        m,
        term: Term::product(factors),
    })
}

/// The single factor `s_i^0 c_1…c_m x`.
fn tau_factor(m: usize, i: usize, dimension: usize) -> Result<Term, WitnessError> {
    let body = (1..=m).rev().fold(Term::Var(0), |acc, k| Term::cyl(k, acc));
    Ok(derived_subst(0, i, body, dimension)?)
}

pub fn eval_tau<A: Algebra + ?Sized>(alg: &A, r: &A::Elem, m: usize) -> Result<A::Elem, WitnessError> {
    let t = tau(m, alg.dimension())?;
    Ok(eval_term(&t.term, std::slice::from_ref(r), alg)?)
}

/// Whether `τ_m(r) = 0` in `alg`.
pub fn verify_tau_zero<A: Algebra + ?Sized>(alg: &A, r: &A::Elem, m: usize) -> Result<bool, WitnessError> {
    Ok(alg.is_zero(&eval_tau(alg, r, m)?))
}

/// One member of `τ_m(r)`, rendered by the algebra, when it is nonzero.
pub fn tau_point<A: FiniteAlgebra + ?Sized>(alg: &A, r: &A::Elem, m: usize) -> Result<Option<Value>, WitnessError> {
    let v = eval_tau(alg, r, m)?;
    Ok((!alg.is_zero(&v)).then(|| alg.describe_member(&v)))
}

// ---------------------------------------------------------------------------
// refutation

/// A concrete failure of a candidate map to preserve an operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomViolation {
    /// `h(R) = ∅` although `R ≠ 0`.
    RCollapsed,
    /// `point ∈ h(c_0 R_part)` but `point ∉ c_0 h(R_part)`.
    CylinderMissing { part: usize, point: Vec<usize> },
    /// `point ∈ h(R_i) ∩ h(R_j)` although `R_i · R_j = 0`.
    PartsOverlap { parts: [usize; 2], point: Vec<usize> },
}

/// A point `z` of `τ_m(h(R))` in the target, contradicting `h(τ_m(R)) = h(0) = ∅`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefutationCertificate {
    pub s: Vec<usize>,
    pub w: Vec<usize>,
    pub z: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Refutation {
    Violation(HomViolation),
    Certificate(RefutationCertificate),
}

fn check_target<T>(s: &SplitAlgebra, h: &Homomorphism<&FiniteBAO, T>) -> Result<(), WitnessError>
where
    T: FiniteAlgebra<Elem = BitSet>,
{
    let d = s.bao().dimension();
    if h.target.dimension() != d {
        return Err(WitnessError::TargetMismatch {
            source_dim: d,
            target: h.target.dimension(),
        });
    }
    if d < s.m() + 1 || s.m() == 0 {
        tau(s.m(), d)?;
    }
    Ok(())
}

/// Run the extraction argument on a candidate representation `h` of the split
/// algebra into a concrete set algebra: either locate where `h` fails to be a
/// homomorphism, or assemble a point of `τ_m(h(R))`.
pub fn refute_representation(
    s: &SplitAlgebra,
    h: &Homomorphism<&FiniteBAO, &SetAlgebra>,
) -> Result<Refutation, WitnessError> {
    check_target(s, h)?;
    let sp = h.target.space();
    let m = s.m();
    let hr = h.apply(&s.r_element());
    let Some(p) = hr.first() else {
        return Ok(Refutation::Violation(HomViolation::RCollapsed));
    };
    let base = sp.coords(p);
    let parts: Vec<BitSet> = (0..=m).map(|j| h.apply(&s.part(j))).collect();
    let mut w = Vec::with_capacity(m + 1);
    for (i, hri) in parts.iter().enumerate() {
        match (0..sp.universe()).find(|&u| hri.contains(sp.with_coord(p, 0, u))) {
            Some(u) => w.push(u),
            None => {
                return Ok(Refutation::Violation(HomViolation::CylinderMissing {
                    part: i,
                    point: base,
                }))
            }
        }
    }
    for i in 0..=m {
        for j in i + 1..=m {
            if w[i] == w[j] {
                return Ok(Refutation::Violation(HomViolation::PartsOverlap {
                    parts: [i, j],
                    point: sp.coords(sp.with_coord(p, 0, w[i])),
                }));
            }
        }
    }
    let mut z = base.clone();
    z[..=m].copy_from_slice(&w);
    Ok(Refutation::Certificate(RefutationCertificate { s: base, w, z }))
}

/// Re-check a refutation from scratch against `s` and `h`.
pub fn verify_refutation(
    s: &SplitAlgebra,
    h: &Homomorphism<&FiniteBAO, &SetAlgebra>,
    r: &Refutation,
) -> Result<VerificationRecord, WitnessError> {
    check_target(s, h)?;
    let sp = h.target.space();
    let tgt = h.target;
    let b = s.bao();
    let d = b.dimension();
    let m = s.m();
    let mut rec = VerificationRecord::new("refutation");
    let in_space = |v: &[usize]| v.len() == d && v.iter().all(|&u| u < sp.universe());
    match r {
        Refutation::Violation(HomViolation::RCollapsed) => {
            rec.assert("source_r_nonzero", !b.is_zero(&s.r_element()), || json!(null));
            rec.assert("image_r_empty", h.apply(&s.r_element()).is_empty(), || json!(null));
        }
        Refutation::Violation(HomViolation::CylinderMissing { part, point }) => {
            rec.assert("point_in_space", in_space(point), || json!(point));
            if in_space(point) && *part <= m {
                let p = sp.index(point);
                let ri = s.part(*part);
                let lhs = h.apply(&b.cyl(0, &ri));
                let rhs = tgt.cyl(0, &h.apply(&ri));
                rec.assert("in_image_of_cylinder", lhs.contains(p), || json!(point));
                rec.assert("not_in_cylinder_of_image", !rhs.contains(p), || json!(point));
            }
        }
        Refutation::Violation(HomViolation::PartsOverlap { parts: [i, j], point }) => {
            rec.assert("point_in_space", in_space(point), || json!(point));
            if in_space(point) && *i <= m && *j <= m {
                let p = sp.index(point);
                let (ri, rj) = (s.part(*i), s.part(*j));
                rec.assert("source_parts_disjoint", i != j && b.is_zero(&b.meet(&ri, &rj)), || {
                    json!([i, j])
                });
                rec.assert(
                    "point_in_both_images",
                    h.apply(&ri).contains(p) && h.apply(&rj).contains(p),
                    || json!(point),
                );
            }
        }
        Refutation::Certificate(c) => {
            rec.assert("source_tau_zero", verify_tau_zero(b, &s.r_element(), m)?, || json!(null));
            let shape_ok = in_space(&c.s) && in_space(&c.z) && c.w.len() == m + 1;
            rec.assert("shapes", shape_ok, || json!({ "s": c.s, "w": c.w, "z": c.z }));
            if !shape_ok {
                return Ok(rec);
            }
            let mut distinct = Law::new("w_pairwise_distinct");
            for i in 0..=m {
                for j in i + 1..=m {
                    distinct.check(c.w[i] != c.w[j], || json!([i, j]));
                }
            }
            rec.push(distinct);
            let assembled = c.z[..=m] == c.w[..] && c.z[m + 1..] == c.s[m + 1..];
            rec.assert("z_assembled_from_w_and_s", assembled, || json!(c.z));
            let hr = h.apply(&s.r_element());
            rec.assert("s_in_image_of_r", hr.contains(sp.index(&c.s)), || json!(c.s));
            let mut hits = Law::new("s_0_w_i_in_image_of_part");
            for (i, &wi) in c.w.iter().enumerate() {
                let moved = sp.with_coord(sp.index(&c.s), 0, wi);
                hits.check(h.apply(&s.part(i)).contains(moved), || json!({ "i": i }));
            }
            rec.push(hits);
            let zp = sp.index(&c.z);
            let mut factors = Law::new("z_in_each_factor");
            for i in 0..=m {
                let f = eval_term(&tau_factor(m, i, d)?, std::slice::from_ref(&hr), tgt)?;
                factors.check(f.contains(zp), || json!({ "factor": i }));
            }
            rec.push(factors);
            let mut off = Law::new("z_off_diagonals");
            for i in 0..=m {
                for j in i + 1..=m {
                    off.check(!tgt.diag(i, j).contains(zp), || json!([i, j]));
                }
            }
            rec.push(off);
            let whole = eval_tau(tgt, &hr, m)?;
            rec.assert("z_in_tau_of_image", whole.contains(zp), || json!(c.z));
        }
    }
    Ok(rec)
}

/// Kinds of synthetic candidate representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// Every point labelled by a uniformly random atom.
    RandomLabeling,
    /// A random labelling with distinct `w_i` planted on one `0`-line.
    Planted,
    /// Independent random images per atom, possibly overlapping.
    Overlapping,
}

/// Atom images of a synthetic candidate from `s` into `sp`, with `h(R) ≠ ∅`.
pub fn synthetic_candidate<R: Rng>(
    s: &SplitAlgebra,
    sp: &SeqSpace,
    kind: CandidateKind,
    rng: &mut R,
) -> Vec<BitSet> {
    let atoms = s.atom_count();
    let parts: Vec<usize> = (0..=s.m())
        .map(|j| s.named_atom(&Permutation::identity(), j))
        .collect();
    let labeling = |rng: &mut R| -> Vec<usize> { (0..sp.len()).map(|_| rng.gen_range(0..atoms)).collect() };
    let to_images = |lab: &[usize]| -> Vec<BitSet> {
        let mut out = vec![sp.empty(); atoms];
        for (p, &a) in lab.iter().enumerate() {
            out[a].insert(p);
        }
        out
    };
    match kind {
        CandidateKind::RandomLabeling => loop {
            let lab = labeling(rng);
            if lab.iter().any(|a| parts.contains(a)) {
                return to_images(&lab);
            }
        },
        CandidateKind::Planted => {
            let others: Vec<usize> = (0..atoms).filter(|a| !parts.contains(a)).collect();
            let mut lab: Vec<usize> = (0..sp.len()).map(|_| *others.choose(rng).expect("old atoms")).collect();
            let p = rng.gen_range(0..sp.len());
            let mut letters: Vec<usize> = (0..sp.universe()).collect();
            letters.shuffle(rng);
            for (j, &a) in parts.iter().enumerate() {
                lab[sp.with_coord(p, 0, letters[j % letters.len()])] = a;
            }
            to_images(&lab)
        }
        CandidateKind::Overlapping => loop {
            let density = rng.gen_range(0.02..0.3);
            let imgs: Vec<BitSet> = (0..atoms)
                .map(|_| BitSet::from_indices(sp.len(), (0..sp.len()).filter(|_| rng.gen_bool(density))))
                .collect();
            if parts.iter().any(|&a| !imgs[a].is_empty()) {
                return imgs;
            }
        },
    }
}

// ---------------------------------------------------------------------------
// representation search

/// Atom images of a representation on `^d W`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub base_size: usize,
    pub images: Vec<BitSet>,
}

impl Representation {
    pub fn target(&self, dimension: usize, n: usize) -> Result<SetAlgebra, WitnessError> {
        let sp = Arc::new(SeqSpace::new(self.base_size, dimension)?);
        Ok(SetAlgebra::new(sp, n)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeOutcome {
    /// Some cylinder class has more atoms than a line has points.
    Capacity { class_size: usize },
    Exhausted,
    Found,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub size: usize,
    pub nodes: u64,
    pub outcome: SizeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found {
        representation: Representation,
        record: VerificationRecord,
        sizes: Vec<SizeReport>,
    },
    ExhaustedNone {
        sizes: Vec<SizeReport>,
    },
}

impl SearchOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found { .. })
    }

    pub fn sizes(&self) -> &[SizeReport] {
        match self {
            SearchOutcome::Found { sizes, .. } | SearchOutcome::ExhaustedNone { sizes } => sizes,
        }
    }
}

/// Largest atom count the labelling search handles.
pub const SEARCH_ATOM_LIMIT: usize = 128;

type Dom = u128;

struct Csp<'a> {
    sp: SeqSpace,
    atoms: usize,
    full: Dom,
    /// `class[i][a]`: atoms of `c_i a`.
    class: Vec<Vec<Dom>>,
    /// Substitution moves: for each `σ`, the point map `t ↦ t∘σ` and atom map `S_{σ⁻¹}`.
    moves: Vec<(Vec<usize>, Vec<usize>)>,
    use_cyl: bool,
    surjective: bool,
    nodes: u64,
    budget: u64,
    spent: &'a mut u64,
}

fn bits(x: &BitSet) -> Dom {
    x.iter().fold(0, |acc, a| acc | (1u128 << a))
}

impl Csp<'_> {
    fn assign(&self, dom: &mut [Dom], t: usize, a: usize) -> bool {
        let mut queue = vec![(t, a)];
        while let Some((t, a)) = queue.pop() {
            let bit = 1u128 << a;
            if dom[t] & bit == 0 {
                return false;
            }
            dom[t] = bit;
            if self.use_cyl {
                for i in 0..self.sp.dimension() {
                    let c = self.class[i][a];
                    for u in self.sp.line(t, i) {
                        if u == t {
                            continue;
                        }
                        let before = dom[u];
                        let after = before & c;
                        if after == 0 {
                            return false;
                        }
                        if after != before {
                            dom[u] = after;
                            if after.count_ones() == 1 {
                                queue.push((u, after.trailing_zeros() as usize));
                            }
                        }
                    }
                }
            }
            for (pts, amap) in &self.moves {
                let u = pts[t];
                let b = amap[a];
                let before = dom[u];
                if before & (1u128 << b) == 0 {
                    return false;
                }
                if before != 1u128 << b {
                    dom[u] = 1u128 << b;
                    queue.push((u, b));
                }
            }
        }
        true
    }

    /// Line coverage and surjectivity; forces atoms with a single possible position.
    fn settle(&self, dom: &mut [Dom]) -> bool {
        loop {
            let mut forced = None;
            if self.use_cyl {
                'lines: for i in 0..self.sp.dimension() {
                    for start in 0..self.sp.len() {
                        if self.sp.coord(start, i) != 0 {
                            continue;
                        }
                        let line: Vec<usize> = self.sp.line(start, i).collect();
                        let mut union = 0;
                        let mut need = 0;
                        for &u in &line {
                            union |= dom[u];
                            if dom[u].count_ones() == 1 {
                                need |= self.class[i][dom[u].trailing_zeros() as usize];
                            }
                        }
                        if need & !union != 0 {
                            return false;
                        }
                        let mut rest = need;
                        while rest != 0 {
                            let b = rest.trailing_zeros() as usize;
                            rest &= rest - 1;
                            let bit = 1u128 << b;
                            let mut where_ = line.iter().filter(|&&u| dom[u] & bit != 0);
                            let first = *where_.next().expect("covered");
                            if where_.next().is_none() && dom[first] != bit {
                                forced = Some((first, b));
                                break 'lines;
                            }
                        }
                    }
                }
            }
            match forced {
                Some((t, b)) => {
                    if !self.assign(dom, t, b) {
                        return false;
                    }
                }
                None => break,
            }
        }
        if self.surjective {
            let union = dom.iter().fold(0, |acc, d| acc | d);
            if union != self.full {
                return false;
            }
        }
        true
    }

    fn solve(&mut self, dom: &mut [Dom]) -> Result<Option<Vec<usize>>, ()> {
        if !self.settle(dom) {
            return Ok(None);
        }
        let pick = (0..dom.len())
            .filter(|&t| dom[t].count_ones() > 1)
            .min_by_key(|&t| dom[t].count_ones());
        let Some(t) = pick else {
            return Ok(Some(dom.iter().map(|d| d.trailing_zeros() as usize).collect()));
        };
        let mut rest = dom[t];
        while rest != 0 {
            let a = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            self.nodes += 1;
            *self.spent += 1;
            if *self.spent > self.budget {
                return Err(());
            }
            let mut next = dom.to_vec();
            if self.assign(&mut next, t, a) {
                if let Some(sol) = self.solve(&mut next)? {
                    return Ok(Some(sol));
                }
            }
        }
        Ok(None)
    }
}

/// Restricted growth strings of length `d` over at most `size` letters.
fn patterns(d: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for p in out {
            let top = p.iter().max().map_or(0, |&x| x + 1);
            for v in 0..=top.min(size - 1) {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Search for a representation of `a` on `^d W` for `|W| = 1..=max_base`,
/// preserving the operations in `ops`, as a labelling of the points of `^d W`
/// by atoms. Each size is searched completely (up to relabelling of base
/// points) unless the total node budget runs out.
pub fn search_representation(
    a: &FiniteBAO,
    ops: OpSet,
    max_base: usize,
    budget: u64,
) -> Result<SearchOutcome, WitnessError> {
    let atoms = a.atom_count();
    let d = a.dimension();
    let widest = if ops.cyl {
        (0..d)
            .flat_map(|i| (0..atoms).map(move |x| a.cyl_atom(i, x).count()))
            .max()
            .unwrap_or(0)
    } else {
        0
    };
    let needs_search = !ops.cyl || widest <= max_base;
    if needs_search && atoms > SEARCH_ATOM_LIMIT {
        return Err(WitnessError::TooManyAtoms(atoms));
    }
    let full: Dom = if atoms >= 128 { u128::MAX } else { (1u128 << atoms) - 1 };
    let class: Vec<Vec<Dom>> = if atoms > SEARCH_ATOM_LIMIT {
        Vec::new()
    } else {
        (0..d)
            .map(|i| (0..atoms).map(|x| bits(a.cyl_atom(i, x))).collect())
            .collect()
    };
    let group = ops.subst.map(Permutation::group).unwrap_or_default();
    let mut sizes = Vec::new();
    let mut spent = 0u64;

    for size in 1..=max_base {
        if ops.cyl && widest > size {
            sizes.push(SizeReport {
                size,
                nodes: 0,
                outcome: SizeOutcome::Capacity { class_size: widest },
            });
            continue;
        }
        let sp = SeqSpace::new(size, d)?;
        let moves = group
            .iter()
            .filter(|p| !p.is_identity())
            .map(|p| {
                let pts = (0..sp.len())
                    .map(|t| {
                        let s = sp.coords(t);
                        let moved: Vec<usize> = (0..d).map(|k| s[p.apply(k)]).collect();
                        sp.index(&moved)
                    })
                    .collect();
                let inv = p.inverse();
                let amap = (0..atoms).map(|x| a.subst_atom(&inv, x).expect("σ ∈ G_n")).collect();
                (pts, amap)
            })
            .collect();
        let mut dom: Vec<Dom> = vec![full; sp.len()];
        if ops.diag {
            for t in 0..sp.len() {
                let s = sp.coords(t);
                for i in 0..d {
                    for j in i + 1..d {
                        let dij = bits(a.diag_atoms(i, j));
                        dom[t] &= if s[i] == s[j] { dij } else { full & !dij };
                    }
                }
            }
        }
        let mut csp = Csp {
            sp,
            atoms,
            full,
            class: class.clone(),
            moves,
            use_cyl: ops.cyl,
            surjective: ops.injective,
            nodes: 0,
            budget,
            spent: &mut spent,
        };
        // anchor: the atom with the fewest candidate points sits at a canonical point
        let mut found = None;
        if ops.injective && atoms > 0 {
            let counts: Vec<usize> = (0..atoms)
                .map(|x| dom.iter().filter(|&&dm| dm & (1u128 << x) != 0).count())
                .collect();
            let anchor = (0..atoms).min_by_key(|&x| counts[x]).expect("atoms exist");
            for pat in patterns(d, size) {
                let t = csp.sp.index(&pat);
                if dom[t] & (1u128 << anchor) == 0 {
                    continue;
                }
                let mut start = dom.clone();
                csp.nodes += 1;
                *csp.spent += 1;
                if *csp.spent > budget {
                    return Err(WitnessError::BudgetExceeded { budget, size });
                }
                if !csp.assign(&mut start, t, anchor) {
                    continue;
                }
                match csp.solve(&mut start) {
                    Ok(Some(sol)) => {
                        found = Some(sol);
                        break;
                    }
                    Ok(None) => {}
                    Err(()) => return Err(WitnessError::BudgetExceeded { budget, size }),
                }
            }
        } else {
            match csp.solve(&mut dom) {
                Ok(sol) => found = sol,
                Err(()) => return Err(WitnessError::BudgetExceeded { budget, size }),
            }
        }
        let nodes = csp.nodes;
        let csp_atoms = csp.atoms;
        let sp_len = csp.sp.len();
        match found {
            Some(labels) => {
                sizes.push(SizeReport {
                    size,
                    nodes,
                    outcome: SizeOutcome::Found,
                });
                let mut images = vec![BitSet::new(sp_len); csp_atoms];
                for (t, &l) in labels.iter().enumerate() {
                    images[l].insert(t);
                }
                let representation = Representation {
                    base_size: size,
                    images,
                };
                let target = representation.target(d, a.subst_bound())?;
                let h = Homomorphism::new("found representation", a, &target, representation.images.clone(), ops)
                    .expect("shapes agree");
                let record = verify_hom(&h, VerifyMode::Exhaustive);
                return Ok(SearchOutcome::Found {
                    representation,
                    record,
                    sizes,
                });
            }
            None => sizes.push(SizeReport {
                size,
                nodes,
                outcome: SizeOutcome::Exhausted,
            }),
        }
    }
    Ok(SearchOutcome::ExhaustedNone { sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{generate, BaseSpec, GeneratedAlgebra, DEFAULT_CLOSURE_CAP};
    use crate::splitting::split;
    use crate::terms::{parse_term, print_term};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(blocks: Vec<usize>, n: usize) -> (GeneratedAlgebra, BitSet) {
        let base = BaseSpec::new(blocks).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, n, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).unwrap();
        (a, r)
    }

    #[test]
    fn tau_shape_and_guards() {
        assert_eq!(tau(0, 3), Err(WitnessError::MTooSmall));
        assert!(matches!(tau(3, 3), Err(WitnessError::DimensionTooSmall { needed: 4, .. })));
        let t = tau(2, 3).unwrap();
        let text = print_term(&t.term);
        assert_eq!(
            text,
            "c1(c2(x0)) * c0(d(0,1) * c1(c2(x0))) * c0(d(0,2) * c1(c2(x0))) * -d(0,1) * -d(0,2) * -d(1,2)"
        );
        assert_eq!(parse_term(&text, 3, 2).unwrap(), t.term);
    }

    #[test]
    fn tau_matches_brute_force_on_small_sets() {
        // oracle: z ∈ τ(X) iff z_0..z_m distinct and for each i ≤ m some x ∈ X
        // has x_0 = z_i and agrees with z above m
        let sp = Arc::new(SeqSpace::new(3, 3).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = sp.random_element(&mut rng);
            let got = eval_tau(&alg, &x, 2).unwrap();
            for p in 0..sp.len() {
                let z = sp.coords(p);
                let distinct = z[0] != z[1] && z[0] != z[2] && z[1] != z[2];
                let all = (0..3).all(|i| x.iter().any(|q| sp.coord(q, 0) == z[i]));
                assert_eq!(got.contains(p), distinct && all);
            }
        }
    }

    #[test]
    fn tau_vanishes_on_base_and_split() {
        let (a, r) = build(vec![2, 2, 2], 2);
        assert!(verify_tau_zero(&a, &r, 2).unwrap());
        let s = split(&a, &r, 2, 2).unwrap();
        assert!(verify_tau_zero(s.bao(), &s.r_element(), 2).unwrap());
    }

    #[test]
    fn tau_control_with_enlarged_block() {
        let base = BaseSpec::new(vec![3, 2, 2]).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        assert!(!verify_tau_zero(&alg, &r, 2).unwrap());
        let pt = tau_point(&alg, &r, 2).unwrap().unwrap();
        let z: Vec<usize> = serde_json::from_value(pt).unwrap();
        assert!(z.iter().all(|&u| u < 3));
        assert!(z[0] != z[1] && z[1] != z[2] && z[0] != z[2]);
    }

    fn refute_all(kind: CandidateKind, seed: u64) -> (usize, usize) {
        let (a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut certs, mut viols) = (0, 0);
        for k in 0..20 {
            let size = 3 + k % 4;
            let sp = Arc::new(SeqSpace::new(size, 3).unwrap());
            let tgt = SetAlgebra::new(sp.clone(), 2).unwrap();
            let imgs = synthetic_candidate(&s, &sp, kind, &mut rng);
            let h = Homomorphism::new("candidate", s.bao(), &tgt, imgs, OpSet::cylindric()).unwrap();
            let r = refute_representation(&s, &h).unwrap();
            let rec = verify_refutation(&s, &h, &r).unwrap();
            assert!(rec.passed(), "{r:?} {:?}", rec.failures().collect::<Vec<_>>());
            match r {
                Refutation::Certificate(c) => {
                    certs += 1;
                    assert_eq!(c.w.len(), 3);
                }
                Refutation::Violation(_) => viols += 1,
            }
        }
        (certs, viols)
    }

    #[test]
    fn planted_candidates_yield_certificates() {
        let (certs, _) = refute_all(CandidateKind::Planted, 1);
        assert_eq!(certs, 20);
    }

    #[test]
    fn random_candidates_are_refuted() {
        let (c1, v1) = refute_all(CandidateKind::RandomLabeling, 2);
        let (c2, v2) = refute_all(CandidateKind::Overlapping, 3);
        assert_eq!(c1 + v1 + c2 + v2, 40);
        assert!(v1 + v2 > 0);
    }

    #[test]
    fn collapsed_and_cylinder_violations() {
        let (a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let sp = Arc::new(SeqSpace::new(3, 3).unwrap());
        let tgt = SetAlgebra::new(sp.clone(), 2).unwrap();
        // everything on one old atom: R collapses
        let mut imgs = vec![sp.empty(); s.atom_count()];
        imgs[0] = sp.full();
        let h = Homomorphism::new("collapse", s.bao(), &tgt, imgs, OpSet::cylindric()).unwrap();
        let r1 = refute_representation(&s, &h).unwrap();
        assert_eq!(r1, Refutation::Violation(HomViolation::RCollapsed));
        assert!(verify_refutation(&s, &h, &r1).unwrap().passed());
        // R_0 at a single point, nothing else on its 0-line for R_1
        let mut imgs = vec![sp.empty(); s.atom_count()];
        imgs[0] = sp.full();
        let p = sp.index(&[0, 0, 0]);
        imgs[0].remove(p);
        let r0 = s.named_atom(&Permutation::identity(), 0);
        imgs[r0].insert(p);
        let h = Homomorphism::new("thin", s.bao(), &tgt, imgs, OpSet::cylindric()).unwrap();
        let r2 = refute_representation(&s, &h).unwrap();
        assert!(matches!(r2, Refutation::Violation(HomViolation::CylinderMissing { part: 1, .. })));
        assert!(verify_refutation(&s, &h, &r2).unwrap().passed());
        // a bogus certificate does not verify
        let bogus = Refutation::Certificate(RefutationCertificate {
            s: vec![0, 0, 0],
            w: vec![0, 1, 2],
            z: vec![0, 1, 2],
        });
        assert!(!verify_refutation(&s, &h, &bogus).unwrap().passed());
    }

    #[test]
    fn rgs_patterns() {
        assert_eq!(patterns(3, 6).len(), 5);
        assert_eq!(patterns(3, 2).len(), 4);
        assert_eq!(patterns(2, 1), vec![vec![0, 0]]);
    }

    #[test]
    fn search_on_two_point_powerset() {
        // the full powerset of ^2{0,1} is represented on two points
        let sp = Arc::new(SeqSpace::new(2, 2).unwrap());
        let alg = SetAlgebra::new(sp, 2).unwrap();
        let b = FiniteBAO::from_concrete(&alg).unwrap();
        let out = search_representation(&b, OpSet::full(2), 3, 10_000).unwrap();
        match out {
            SearchOutcome::Found { representation, record, sizes } => {
                assert_eq!(representation.base_size, 2);
                assert!(record.passed());
                assert_eq!(sizes[0].outcome, SizeOutcome::Capacity { class_size: 2 });
            }
            other => panic!("expected a representation, got {other:?}"),
        }
    }

    #[test]
    fn split_cylindric_reduct_has_no_small_representation() {
        let (a, r) = build(vec![2, 2, 2], 2);
        let s = split(&a, &r, 2, 2).unwrap();
        let out = search_representation(s.bao(), OpSet::cylindric(), 4, 1_000_000).unwrap();
        assert!(!out.is_found());
        assert_eq!(out.sizes().len(), 4);
    }

    #[test]
    fn capacity_refutes_large_algebras_without_search() {
        let (a, r) = build(vec![3, 3, 3, 3], 2);
        let s = split(&a, &r, 3, 2).unwrap();
        assert!(s.atom_count() > SEARCH_ATOM_LIMIT);
        let out = search_representation(s.bao(), OpSet::cylindric(), 4, 10).unwrap();
        assert!(!out.is_found());
        let b = FiniteBAO::from_concrete(&a).unwrap();
        assert!(matches!(
            search_representation(&b, OpSet::full(2), 12, 10),
            Err(WitnessError::TooManyAtoms(_))
        ));
    }

    #[test]
    fn budget_is_reported() {
        let sp = Arc::new(SeqSpace::new(2, 2).unwrap());
        let alg = SetAlgebra::new(sp, 2).unwrap();
        let b = FiniteBAO::from_concrete(&alg).unwrap();
        assert!(matches!(
            search_representation(&b, OpSet::full(2), 3, 0),
            Err(WitnessError::BudgetExceeded { budget: 0, .. })
        ));
    }
}

#[cfg(test)]
mod prototype_search {
    use super::*;
    use crate::setalg::{generate, BaseSpec, DEFAULT_CLOSURE_CAP};

    #[test]
    fn prototype_is_found_on_full_base() {
        let base = BaseSpec::new(vec![2, 2, 2]).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, 2, &[r], DEFAULT_CLOSURE_CAP).unwrap();
        let b = FiniteBAO::from_concrete(&a).unwrap();
        let out = search_representation(&b, OpSet::full(2), 6, 5_000_000).unwrap();
        let SearchOutcome::Found { representation, record, sizes } = out else {
            panic!("no representation found");
        };
        assert_eq!(representation.base_size, 6);
        assert!(record.passed());
        assert_eq!(sizes[4].outcome, SizeOutcome::Exhausted);
    }
}

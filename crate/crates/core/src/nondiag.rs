//! A representation of a split algebra that preserves everything except the
//! diagonal constants, over an enlarged base.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bao::{verify_hom, FiniteBAO, Homomorphism, OpSet, VerifyMode};
use crate::bitset::BitSet;
use crate::setalg::{BaseSpec, GeneratedAlgebra, SeqSpace, SetAlgError, SetAlgebra};
use crate::splitting::{real_partition, RealPartition, SplitAlgebra, SplitAtom, SplitError};
use crate::verify::{Law, VerificationRecord};
use serde::Serialize;
use serde_json::{json, Value};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NondiagError {
    #[error("block 0 must have exactly m = {m} points, got {got}")]
    FirstBlock { m: usize, got: usize },
    #[error("block {block} has {got} points, need at least m + 1 = {need}")]
    ShortBlock { block: usize, got: usize, need: usize },
    #[error("new point {point} is not sent into block 0")]
    RetractionTarget { point: usize },
    #[error("the split algebra does not come from this base")]
    Mismatch,
    #[error(transparent)]
    SetAlg(#[from] SetAlgError),
    #[error(transparent)]
    Split(#[from] SplitError),
}

/// `W = U ∪ {new points}` with the new points joining block 0, and a
/// retraction `t: W → U` that fixes `U` and maps the new points into `U_0`.
#[derive(Debug, Clone)]
pub struct EnlargedBase {
    pub original: BaseSpec,
    pub m: usize,
    pub extra: usize,
    /// `t` on all of `W`; points `0..|U|` are fixed.
    pub t: Vec<usize>,
    /// The blocks `W_i` as point lists.
    pub factors: Vec<Vec<usize>>,
    pub u_space: Arc<SeqSpace>,
    pub w_space: Arc<SeqSpace>,
    /// `g(s) = t∘s` as a map from points of `^dW` to points of `^dU`.
    g: Vec<usize>,
}

impl EnlargedBase {
    /// New points are sent round-robin onto `U_0`.
    pub fn new(original: BaseSpec, m: usize, extra: usize) -> Result<Self, NondiagError> {
        let u0: Vec<usize> = original.block_range(0).collect();
        let t_new = (0..extra).map(|k| u0[k % u0.len().max(1)]).collect();
        Self::with_retraction(original, m, t_new)
    }

    /// `t_new[k]` is the image of the `k`-th new point.
    pub fn with_retraction(original: BaseSpec, m: usize, t_new: Vec<usize>) -> Result<Self, NondiagError> {
        let d = original.dimension();
        let u0 = original.block_range(0);
        if u0.len() != m {
            return Err(NondiagError::FirstBlock { m, got: u0.len() });
        }
        for i in 1..d {
            let got = original.block_range(i).len();
            if got < m + 1 {
                return Err(NondiagError::ShortBlock { block: i, got, need: m + 1 });
            }
        }
        let u = original.universe_size();
        let extra = t_new.len();
        if let Some(k) = t_new.iter().position(|p| !u0.contains(p)) {
            return Err(NondiagError::RetractionTarget { point: u + k });
        }
        let t: Vec<usize> = (0..u).chain(t_new).collect();
        let mut factors: Vec<Vec<usize>> = (0..d).map(|i| original.block_range(i).collect()).collect();
        factors[0].extend(u..u + extra);
        let u_space = Arc::new(original.space()?);
        let w_space = Arc::new(SeqSpace::new(u + extra, d)?);
        let g = (0..w_space.len())
            .map(|p| {
                let s: Vec<usize> = w_space.coords(p).into_iter().map(|x| t[x]).collect();
                u_space.index(&s)
            })
            .collect();
        Ok(EnlargedBase {
            original,
            m,
            extra,
            t,
            factors,
            u_space,
            w_space,
            g,
        })
    }

    pub fn is_proper(&self) -> bool {
        self.extra > 0
    }

    /// `{s ∈ ^dW : t∘s ∈ x}`.
    pub fn lift(&self, x: &BitSet) -> BitSet {
        BitSet::from_indices(self.w_space.len(), (0..self.w_space.len()).filter(|&p| x.contains(self.g[p])))
    }

    pub fn invariants(&self) -> VerificationRecord {
        let u = self.original.universe_size();
        let mut rec = VerificationRecord::new("enlarged base");
        rec.assert("t_fixes_u", (0..u).all(|x| self.t[x] == x), || json!(null));
        let u0: Vec<usize> = self.original.block_range(0).collect();
        let mut img: Vec<usize> = self.factors[0].iter().map(|&x| self.t[x]).collect();
        img.sort_unstable();
        img.dedup();
        rec.assert("t_maps_w0_onto_u0", img == u0, || json!(img));
        let mut sizes = Law::new("blocks_have_m_plus_1_points");
        for (i, f) in self.factors.iter().enumerate() {
            sizes.check(f.len() > self.m, || json!({ "block": i, "size": f.len() }));
        }
        rec.push(sizes);
        rec
    }
}

/// `h̄` together with the partition of `∏ W_i` it uses.
#[derive(Debug, Clone)]
pub struct NondiagRepresentation {
    pub target: SetAlgebra,
    pub images: Vec<BitSet>,
    pub partition: RealPartition,
}

impl NondiagRepresentation {
    pub fn hom<'a>(&'a self, s: &'a SplitAlgebra) -> Homomorphism<&'a FiniteBAO, &'a SetAlgebra> {
        let ops = OpSet::full(s.n()).with_replace();
        Homomorphism::new("diagonal-free representation", s.bao(), &self.target, self.images.clone(), ops)
            .expect("one image per atom")
    }
}

/// Send old atoms to their lifts and `s_σ R_j` to `s_σ S_j`, where `(S_j)` is a
/// real partition of `∏ W_i` into `m + 1` pieces.
///
/// `a_prime` must be the concrete algebra `s` was split from.
pub fn nondiag_representation(
    s: &SplitAlgebra,
    a_prime: &GeneratedAlgebra,
    eb: &EnlargedBase,
) -> Result<NondiagRepresentation, NondiagError> {
    if a_prime.space().as_ref() != eb.u_space.as_ref() || a_prime.atom_count() != s.base().atom_count() {
        return Err(NondiagError::Mismatch);
    }
    let target = SetAlgebra::new(eb.w_space.clone(), s.n())?;
    let partition = real_partition(&eb.w_space, &eb.factors, s.m() + 1, None)?;
    let images = s
        .atoms()
        .iter()
        .map(|at| match at {
            SplitAtom::Old { base_atom } => eb.lift(&a_prime.atom(*base_atom)),
            SplitAtom::Named { tau, part } => target.subst(tau, &partition.pieces[*part]),
        })
        .collect();
    Ok(NondiagRepresentation {
        target,
        images,
        partition,
    })
}

/// Which operations `h̄` preserves, and where the diagonals go wrong.
#[derive(Debug, Clone, Serialize)]
pub struct NondiagSummary {
    pub preserved: Vec<String>,
    pub failed: Vec<String>,
    pub diagonal_witness: Option<Value>,
    pub diagonal_failure_expected: bool,
}

pub fn summarize(record: &VerificationRecord, eb: &EnlargedBase) -> NondiagSummary {
    let preserved = record.checks.iter().filter(|c| c.passed()).map(|c| c.law.clone()).collect();
    let failed = record.checks.iter().filter(|c| !c.passed()).map(|c| c.law.clone()).collect();
    let diagonal_witness = record.get("diag").and_then(|c| c.witness.clone());
    NondiagSummary {
        preserved,
        failed,
        diagonal_witness,
        diagonal_failure_expected: eb.is_proper(),
    }
}

/// Exhaustive check of `h̄` against every operation including the diagonals.
pub fn verify_nondiag(rep: &NondiagRepresentation, s: &SplitAlgebra) -> VerificationRecord {
    let mut rec = verify_hom(&rep.hom(s), VerifyMode::Exhaustive);
    rec.extend(rep.partition.record.clone());
    rec
}

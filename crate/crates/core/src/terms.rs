//! Terms over the quasipolyadic-equality signature: a text syntax, a printer
//! that round-trips through it, and evaluation against any [`Algebra`].
//!
//! Grammar (whitespace insignificant, `*` binds tighter than `+`):
//!
//! ```text
//! term := var | "0" | "1" | "d(" i "," j ")" | "-" term
//!       | "c" i "(" term ")" | "s[" i "," j "]" ("[" i "," j "]")* "(" term ")"
//!       | term "+" term | term "*" term | "(" term ")"
//! var  := "x" nat
//! ```
//!
//! A transposition list `s[a,b][c,d](t)` denotes `s_τ` for `τ = [a,b]∘[c,d]`.

use crate::algebra::{Algebra, FiniteAlgebra};
use crate::bitset::BitSet;
use crate::perm::Permutation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(usize),
    Zero,
    One,
    Diag(usize, usize),
    Join(Box<Term>, Box<Term>),
    Meet(Box<Term>, Box<Term>),
    Complement(Box<Term>),
    Cyl(usize, Box<Term>),
    Subst(Permutation, Box<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("index {index} out of dimension {dimension}")]
    IndexOutOfDimension { index: usize, dimension: usize },
    #[error("permutation {perm} is not in G_{bound}")]
    PermutationNotInGroup { perm: String, bound: usize },
    #[error("variable x{0} has no assigned value")]
    UnassignedVariable(usize),
    #[error("term uses indices up to {needed} but the algebra has dimension {dimension}")]
    DimensionMismatch { needed: usize, dimension: usize },
    #[error("exhaustive check needs {needed} assignments, above the cap of {cap}")]
    CapExceeded { needed: String, cap: u64 },
}

impl Term {
    pub fn var(i: usize) -> Term {
        Term::Var(i)
    }

    pub fn diag(i: usize, j: usize) -> Term {
        Term::Diag(i, j)
    }

    pub fn join(a: Term, b: Term) -> Term {
        Term::Join(Box::new(a), Box::new(b))
    }

    pub fn meet(a: Term, b: Term) -> Term {
        Term::Meet(Box::new(a), Box::new(b))
    }

    pub fn complement(a: Term) -> Term {
        Term::Complement(Box::new(a))
    }

    pub fn cyl(i: usize, a: Term) -> Term {
        Term::Cyl(i, Box::new(a))
    }

    pub fn subst(p: Permutation, a: Term) -> Term {
        Term::Subst(p, Box::new(a))
    }

    /// Left-nested product; the empty product is `1`.
    pub fn product<I: IntoIterator<Item = Term>>(factors: I) -> Term {
        factors
            .into_iter()
            .reduce(Term::meet)
            .unwrap_or(Term::One)
    }

    /// Left-nested sum; the empty sum is `0`.
    pub fn sum<I: IntoIterator<Item = Term>>(terms: I) -> Term {
        terms.into_iter().reduce(Term::join).unwrap_or(Term::Zero)
    }

    fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Zero | Term::One | Term::Diag(..) => vec![],
            Term::Join(a, b) | Term::Meet(a, b) => vec![a, b],
            Term::Complement(a) | Term::Cyl(_, a) | Term::Subst(_, a) => vec![a],
        }
    }

    /// One more than the largest variable index (0 for closed terms).
    pub fn var_count(&self) -> usize {
        match self {
            Term::Var(v) => v + 1,
            _ => self
                .children()
                .into_iter()
                .map(Term::var_count)
                .max()
                .unwrap_or(0),
        }
    }

    pub fn mentions(&self, v: usize) -> bool {
        match self {
            Term::Var(w) => *w == v,
            _ => self.children().into_iter().any(|c| c.mentions(v)),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.var_count() == 0
    }

    /// Largest coordinate index used, plus one.
    pub fn index_bound(&self) -> usize {
        let own = match self {
            Term::Diag(i, j) => i.max(j) + 1,
            Term::Cyl(i, _) => i + 1,
            Term::Subst(p, _) => p.degree(),
            _ => 0,
        };
        self.children()
            .into_iter()
            .map(Term::index_bound)
            .fold(own, usize::max)
    }

    /// Sufficient syntactic condition for `x_v ↦ t` to preserve finite joins:
    /// built from `x_v` and closed terms by `+`, meets with a closed factor,
    /// `c_i` and `s_τ`.
    pub fn is_additive_in(&self, v: usize) -> bool {
        if !self.mentions(v) {
            return true;
        }
        match self {
            Term::Var(_) => true,
            Term::Join(a, b) => a.is_additive_in(v) && b.is_additive_in(v),
            Term::Meet(a, b) => {
                (!a.mentions(v) && b.is_additive_in(v)) || (!b.mentions(v) && a.is_additive_in(v))
            }
            Term::Cyl(_, a) | Term::Subst(_, a) => a.is_additive_in(v),
            Term::Complement(_) => false,
            Term::Zero | Term::One | Term::Diag(..) => true,
        }
    }

    /// Check indices against a dimension and substitution bound.
    pub fn validate(&self, dimension: usize, n: usize) -> Result<(), TermError> {
        match self {
            Term::Diag(i, j) => check_index(*i.max(j), dimension)?,
            Term::Cyl(i, _) => check_index(*i, dimension)?,
            Term::Subst(p, _)
                if !p.in_group(n) => {
                    return Err(TermError::PermutationNotInGroup {
                        perm: p.to_string(),
                        bound: n,
                    });
                }
            _ => {}
        }
        self.children()
            .into_iter()
            .try_for_each(|c| c.validate(dimension, n))
    }
}

fn check_index(i: usize, dimension: usize) -> Result<(), TermError> {
    if i < dimension {
        Ok(())
    } else {
        Err(TermError::IndexOutOfDimension {
            index: i,
            dimension,
        })
    }
}

/// `s_{[i|j]} body = c_i(d_ij · body)`; for `i = j` the body itself.
pub fn derived_subst(i: usize, j: usize, body: Term, dimension: usize) -> Result<Term, TermError> {
    check_index(i, dimension)?;
    check_index(j, dimension)?;
    if i == j {
        return Ok(body);
    }
    Ok(Term::cyl(i, Term::meet(Term::diag(i, j), body)))
}

// ---------------------------------------------------------------------------
// printing

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_PREFIX: u8 = 3;

fn write_term(t: &Term, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = match t {
        Term::Join(..) => PREC_SUM,
        Term::Meet(..) => PREC_PRODUCT,
        _ => PREC_PREFIX,
    };
    if prec < min_prec {
        write!(f, "(")?;
    }
    match t {
        Term::Var(v) => write!(f, "x{v}")?,
        Term::Zero => write!(f, "0")?,
        Term::One => write!(f, "1")?,
        Term::Diag(i, j) => write!(f, "d({i},{j})")?,
        Term::Join(a, b) => {
            write_term(a, PREC_SUM, f)?;
            write!(f, " + ")?;
            write_term(b, PREC_PRODUCT, f)?;
        }
        Term::Meet(a, b) => {
            write_term(a, PREC_PRODUCT, f)?;
            write!(f, " * ")?;
            write_term(b, PREC_PREFIX, f)?;
        }
        Term::Complement(a) => {
            write!(f, "-")?;
            write_term(a, PREC_PREFIX, f)?;
        }
        Term::Cyl(i, a) => {
            write!(f, "c{i}(")?;
            write_term(a, 0, f)?;
            write!(f, ")")?;
        }
        Term::Subst(p, a) => {
            write!(f, "s")?;
            let ts = p.transpositions();
            if ts.is_empty() {
                write!(f, "[0,0]")?;
            }
            for (i, j) in ts {
                write!(f, "[{i},{j}]")?;
            }
            write!(f, "(")?;
            write_term(a, 0, f)?;
            write!(f, ")")?;
        }
    }
    if prec < min_prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, 0, f)
    }
}

pub fn print_term(t: &Term) -> String {
    t.to_string()
}

// ---------------------------------------------------------------------------
// parsing

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    dimension: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TermError> {
        Err(TermError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, want: char) -> Result<(), TermError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => self.err(format!("expected '{want}', found '{c}'")),
            None => self.err(format!("expected '{want}', found end of input")),
        }
    }

    fn nat(&mut self) -> Result<usize, TermError> {
        self.skip_ws();
        let digits: String = self.src[self.pos..]
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if digits.is_empty() {
            return self.err("expected a natural number");
        }
        let v = digits.parse().or_else(|_| self.err("number too large"))?;
        self.pos += digits.len();
        Ok(v)
    }

    fn index(&mut self) -> Result<usize, TermError> {
        let i = self.nat()?;
        check_index(i, self.dimension)?;
        Ok(i)
    }

    fn sum(&mut self) -> Result<Term, TermError> {
        let mut t = self.product()?;
        while self.peek() == Some('+') {
            self.bump();
            t = Term::join(t, self.product()?);
        }
        Ok(t)
    }

    fn product(&mut self) -> Result<Term, TermError> {
        let mut t = self.unary()?;
        while matches!(self.peek(), Some('*') | Some('·')) {
            self.bump();
            t = Term::meet(t, self.unary()?);
        }
        Ok(t)
    }

    fn unary(&mut self) -> Result<Term, TermError> {
        if self.peek() == Some('-') {
            self.bump();
            return Ok(Term::complement(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, TermError> {
        match self.peek() {
            Some('x') => {
                self.bump();
                Ok(Term::Var(self.nat()?))
            }
            Some('0') | Some('1') => {
                let v = self.nat()?;
                match v {
                    0 => Ok(Term::Zero),
                    1 => Ok(Term::One),
                    _ => self.err("only 0 and 1 are constants"),
                }
            }
            Some('d') => {
                self.bump();
                self.expect('(')?;
                let i = self.index()?;
                self.expect(',')?;
                let j = self.index()?;
                self.expect(')')?;
                Ok(Term::Diag(i, j))
            }
            Some('c') => {
                self.bump();
                let i = self.index()?;
                self.expect('(')?;
                let body = self.sum()?;
                self.expect(')')?;
                Ok(Term::cyl(i, body))
            }
            Some('s') => {
                self.bump();
                let mut ts = Vec::new();
                while self.peek() == Some('[') {
                    self.bump();
                    let i = self.index()?;
                    self.expect(',')?;
                    let j = self.index()?;
                    self.expect(']')?;
                    ts.push((i, j));
                }
                if ts.is_empty() {
                    return self.err("substitution needs at least one transposition");
                }
                let p = Permutation::from_transpositions(&ts);
                if !p.in_group(self.n) {
                    return Err(TermError::PermutationNotInGroup {
                        perm: p.to_string(),
                        bound: self.n,
                    });
                }
                self.expect('(')?;
                let body = self.sum()?;
                self.expect(')')?;
                Ok(Term::subst(p, body))
            }
            Some('(') => {
                self.bump();
                let t = self.sum()?;
                self.expect(')')?;
                Ok(t)
            }
            Some(c) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parse a term at dimension `dimension` with substitutions drawn from `G_n`.
pub fn parse_term(text: &str, dimension: usize, n: usize) -> Result<Term, TermError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        dimension,
        n,
    };
    let t = p.sum()?;
    if let Some(c) = p.peek() {
        return p.err(format!("trailing input starting at '{c}'"));
    }
    Ok(t)
}

/// Parse `lhs = rhs`.
pub fn parse_equation(text: &str, dimension: usize, n: usize) -> Result<(Term, Term), TermError> {
    let Some((l, r)) = text.split_once('=') else {
        return Err(TermError::Syntax {
            pos: text.len(),
            msg: "expected '='".into(),
        });
    };
    let lhs = parse_term(l, dimension, n)?;
    let rhs = parse_term(r, dimension, n).map_err(|e| match e {
        TermError::Syntax { pos, msg } => TermError::Syntax {
            pos: pos + l.len() + 1,
            msg,
        },
        other => other,
    })?;
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// evaluation

/// Evaluate `t` bottom-up in `alg`, with `x_v ↦ assignment[v]`.
pub fn eval_term<A: Algebra + ?Sized>(
    t: &Term,
    assignment: &[A::Elem],
    alg: &A,
) -> Result<A::Elem, TermError> {
    let needed = t.index_bound();
    if needed > alg.dimension() {
        return Err(TermError::DimensionMismatch {
            needed,
            dimension: alg.dimension(),
        });
    }
    t.validate(alg.dimension(), alg.subst_bound())?;
    if t.var_count() > assignment.len() {
        return Err(TermError::UnassignedVariable(assignment.len()));
    }
    Ok(eval_unchecked(t, assignment, alg))
}

fn eval_unchecked<A: Algebra + ?Sized>(t: &Term, asg: &[A::Elem], alg: &A) -> A::Elem {
    match t {
        Term::Var(v) => asg[*v].clone(),
        Term::Zero => alg.zero(),
        Term::One => alg.one(),
        Term::Diag(i, j) => alg.diag(*i, *j),
        Term::Join(a, b) => alg.join(&eval_unchecked(a, asg, alg), &eval_unchecked(b, asg, alg)),
        Term::Meet(a, b) => alg.meet(&eval_unchecked(a, asg, alg), &eval_unchecked(b, asg, alg)),
        Term::Complement(a) => alg.complement(&eval_unchecked(a, asg, alg)),
        Term::Cyl(i, a) => alg.cyl(*i, &eval_unchecked(a, asg, alg)),
        Term::Subst(p, a) => alg.subst(p, &eval_unchecked(a, asg, alg)),
    }
}

// ---------------------------------------------------------------------------
// checking equations

/// Default bound on the number of assignments enumerated by an exhaustive check.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Sampled { count: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Every assignment of elements to variables.
    Exhaustive,
    /// Every atom (and zero) for a single-variable formula whose sides are
    /// join-preserving in that variable; equivalent to all elements.
    AtomReduced,
    /// Seeded random assignments; not a proof.
    Sampled { count: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails { assignment: Vec<Value> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub coverage: Coverage,
    pub instances: u64,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn is_exhaustive(&self) -> bool {
        !matches!(self.coverage, Coverage::Sampled { .. })
    }
}

/// `lhs ≤ rhs`, encoded as `lhs · rhs = lhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inequality {
    pub lhs: Term,
    pub rhs: Term,
}

impl Inequality {
    pub fn new(lhs: Term, rhs: Term) -> Self {
        Inequality { lhs, rhs }
    }

    pub fn as_equation(&self) -> (Term, Term) {
        (Term::meet(self.lhs.clone(), self.rhs.clone()), self.lhs.clone())
    }

    fn var_count(&self) -> usize {
        self.lhs.var_count().max(self.rhs.var_count())
    }

    fn holds<A: Algebra + ?Sized>(&self, asg: &[A::Elem], alg: &A) -> bool {
        let l = eval_unchecked(&self.lhs, asg, alg);
        let r = eval_unchecked(&self.rhs, asg, alg);
        alg.leq(&l, &r)
    }

    /// Single-variable form where the set of solutions is determined by atoms.
    fn atom_determined(&self) -> bool {
        self.lhs.is_additive_in(0) && self.rhs.is_closed()
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {}", self.lhs, self.rhs)
    }
}

/// `premise → conclusion`, both inequalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiEquation {
    pub premise: Inequality,
    pub conclusion: Inequality,
}

impl fmt::Display for QuasiEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.premise, self.conclusion)
    }
}

/// The quasi-equation `x ≤ −d_ij → s_{[j|i]} x ≤ 0`, i.e. `x ≤ −d_ij → c_j(d_ji · x) = 0`.
pub fn disjoint_from_diagonal_quasi_equation(
    i: usize,
    j: usize,
    dimension: usize,
) -> Result<QuasiEquation, TermError> {
    Ok(QuasiEquation {
        premise: Inequality::new(Term::Var(0), Term::complement(Term::diag(i, j))),
        conclusion: Inequality::new(derived_subst(j, i, Term::Var(0), dimension)?, Term::Zero),
    })
}

fn validate_for<A: Algebra + ?Sized>(alg: &A, terms: &[&Term]) -> Result<(), TermError> {
    for t in terms {
        let needed = t.index_bound();
        if needed > alg.dimension() {
            return Err(TermError::DimensionMismatch {
                needed,
                dimension: alg.dimension(),
            });
        }
        t.validate(alg.dimension(), alg.subst_bound())?;
    }
    Ok(())
}

/// Enumerate or sample assignments and test `pred` on each.
fn search_assignments<A, F>(
    alg: &A,
    vars: usize,
    strategy: Strategy,
    cap: u64,
    atom_reduced: bool,
    mut pred: F,
) -> Result<Verdict, TermError>
where
    A: FiniteAlgebra + ?Sized,
    F: FnMut(&[A::Elem]) -> bool,
{
    let atoms = alg.atom_count();
    let fail = |asg: &[A::Elem]| Outcome::Fails {
        assignment: asg.iter().map(|e| alg.describe(e)).collect(),
    };
    match strategy {
        Strategy::Exhaustive if atom_reduced => {
            let mut asg = vec![alg.zero()];
            let mut instances = 1;
            if !pred(&asg) {
                return Ok(Verdict {
                    outcome: fail(&asg),
                    coverage: Coverage::AtomReduced,
                    instances,
                });
            }
            for a in 0..atoms {
                asg[0] = alg.atom(a);
                instances += 1;
                if !pred(&asg) {
                    return Ok(Verdict {
                        outcome: fail(&asg),
                        coverage: Coverage::AtomReduced,
                        instances,
                    });
                }
            }
            Ok(Verdict {
                outcome: Outcome::Holds,
                coverage: Coverage::AtomReduced,
                instances,
            })
        }
        Strategy::Exhaustive => {
            let bits = atoms.saturating_mul(vars);
            if bits >= 64 || (1u64 << bits) > cap {
                return Err(TermError::CapExceeded {
                    needed: format!("2^{bits}"),
                    cap,
                });
            }
            let total = 1u64 << bits;
            let mask_of = |code: u64, v: usize| -> BitSet {
                BitSet::from_indices(atoms, (0..atoms).filter(|a| code >> (v * atoms + a) & 1 == 1))
            };
            for code in 0..total {
                let asg: Vec<A::Elem> = (0..vars)
                    .map(|v| alg.element_from_atoms(&mask_of(code, v)))
                    .collect();
                if !pred(&asg) {
                    return Ok(Verdict {
                        outcome: fail(&asg),
                        coverage: Coverage::Exhaustive,
                        instances: code + 1,
                    });
                }
            }
            Ok(Verdict {
                outcome: Outcome::Holds,
                coverage: Coverage::Exhaustive,
                instances: total,
            })
        }
        Strategy::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..count {
                let asg: Vec<A::Elem> = (0..vars)
                    .map(|_| {
                        let m = BitSet::from_indices(atoms, (0..atoms).filter(|_| rng.gen_bool(0.5)));
                        alg.element_from_atoms(&m)
                    })
                    .collect();
                if !pred(&asg) {
                    return Ok(Verdict {
                        outcome: fail(&asg),
                        coverage: Coverage::Sampled { count, seed },
                        instances: k + 1,
                    });
                }
            }
            Ok(Verdict {
                outcome: Outcome::Holds,
                coverage: Coverage::Sampled { count, seed },
                instances: count,
            })
        }
    }
}

/// Check `lhs = rhs` in a finite atomic algebra.
///
/// Under [`Strategy::Exhaustive`], single-variable equations whose sides are
/// both join-preserving are checked on zero and every atom, which covers all
/// elements; everything else enumerates `|A|^vars` assignments and fails with
/// [`TermError::CapExceeded`] above `cap`.
pub fn check_equation<A: FiniteAlgebra + ?Sized>(
    lhs: &Term,
    rhs: &Term,
    alg: &A,
    strategy: Strategy,
    cap: u64,
) -> Result<Verdict, TermError> {
    validate_for(alg, &[lhs, rhs])?;
    let vars = lhs.var_count().max(rhs.var_count());
    let atom_reduced = vars == 1 && lhs.is_additive_in(0) && rhs.is_additive_in(0);
    search_assignments(alg, vars, strategy, cap, atom_reduced, |asg| {
        eval_unchecked(lhs, asg, alg) == eval_unchecked(rhs, asg, alg)
    })
}

/// Check an inequality `lhs ≤ rhs` for all assignments.
pub fn check_inequality<A: FiniteAlgebra + ?Sized>(
    ineq: &Inequality,
    alg: &A,
    strategy: Strategy,
    cap: u64,
) -> Result<Verdict, TermError> {
    let (l, r) = ineq.as_equation();
    check_equation(&l, &r, alg, strategy, cap)
}

/// Check a quasi-equation for all assignments.
///
/// When both inequalities are single-variable with a join-preserving left side
/// and a closed right side, the solutions of each are the joins of their atom
/// solutions, so checking zero and every atom is exhaustive.
pub fn check_quasi_equation<A: FiniteAlgebra + ?Sized>(
    q: &QuasiEquation,
    alg: &A,
    strategy: Strategy,
    cap: u64,
) -> Result<Verdict, TermError> {
    validate_for(
        alg,
        &[&q.premise.lhs, &q.premise.rhs, &q.conclusion.lhs, &q.conclusion.rhs],
    )?;
    let vars = q.premise.var_count().max(q.conclusion.var_count());
    let atom_reduced = vars == 1 && q.premise.atom_determined() && q.conclusion.atom_determined();
    search_assignments(alg, vars, strategy, cap, atom_reduced, |asg| {
        !q.premise.holds(asg, alg) || q.conclusion.holds(asg, alg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{generate, BaseSpec, SeqSpace, SetAlgebra, DEFAULT_CLOSURE_CAP};
    use proptest::prelude::*;
    use std::sync::Arc;
    use super::Strategy;
    use proptest::strategy::Strategy as Gen;

    #[test]
    fn parses_constants_and_sugar() {
        assert_eq!(parse_term("d(0,1)", 3, 2).unwrap(), Term::Diag(0, 1));
        assert_eq!(
            parse_term("c0(x0 * -d(0,1))", 3, 2).unwrap(),
            Term::cyl(0, Term::meet(Term::Var(0), Term::complement(Term::diag(0, 1))))
        );
        assert_eq!(
            parse_term(" x0 +x1*  x2 ", 3, 2).unwrap(),
            Term::join(Term::Var(0), Term::meet(Term::Var(1), Term::Var(2)))
        );
        assert_eq!(
            parse_term("-x0 * x1", 3, 2).unwrap(),
            Term::meet(Term::complement(Term::Var(0)), Term::Var(1))
        );
        assert_eq!(
            parse_term("x0 · x1", 3, 2).unwrap(),
            Term::meet(Term::Var(0), Term::Var(1))
        );
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_term("d(0,3)", 3, 2),
            Err(TermError::IndexOutOfDimension { index: 3, dimension: 3 })
        ));
        assert!(matches!(
            parse_term("s[1,2](x0)", 3, 2),
            Err(TermError::PermutationNotInGroup { bound: 2, .. })
        ));
        assert!(matches!(
            parse_term("c0(x0", 3, 2),
            Err(TermError::Syntax { pos: 5, .. })
        ));
        assert!(matches!(parse_term("x0 + ", 3, 2), Err(TermError::Syntax { .. })));
        assert!(matches!(parse_term("2", 3, 2), Err(TermError::Syntax { .. })));
        assert!(matches!(parse_term("x0 x1", 3, 2), Err(TermError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_term("s(x0)", 3, 2), Err(TermError::Syntax { .. })));
    }

    #[test]
    fn transposition_lists_compose() {
        let t = parse_term("s[0,1][1,2](x0)", 3, 3).unwrap();
        let expected = Permutation::transposition(0, 1).compose(&Permutation::transposition(1, 2));
        assert_eq!(t, Term::subst(expected, Term::Var(0)));
        // a product that lands back in G_2 is accepted
        assert!(parse_term("s[1,2][1,2](x0)", 3, 2).is_ok());
    }

    #[test]
    fn derived_substitution_shapes() {
        assert_eq!(
            derived_subst(1, 0, Term::Var(0), 3).unwrap(),
            Term::cyl(1, Term::meet(Term::diag(1, 0), Term::Var(0)))
        );
        assert_eq!(derived_subst(2, 2, Term::Var(0), 3).unwrap(), Term::Var(0));
        assert!(derived_subst(3, 0, Term::Var(0), 3).is_err());
    }

    #[test]
    fn derived_substitution_matches_brute_force() {
        let sp = Arc::new(SeqSpace::new(4, 3).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = derived_subst(1, 0, Term::Var(0), 3).unwrap();
        for _ in 0..20 {
            let x = sp.random_element(&mut rng);
            let got = eval_term(&t, std::slice::from_ref(&x), &alg).unwrap();
            // oracle: {s : s∘[1|0] ∈ X}, written out over all 64 sequences
            let mut expected = sp.empty();
            for p in 0..sp.len() {
                let s = sp.coords(p);
                let moved = vec![s[0], s[0], s[2]];
                if x.contains(sp.index(&moved)) {
                    expected.insert(p);
                }
            }
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn evaluation_basics() {
        let sp = Arc::new(SeqSpace::new(3, 2).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        assert_eq!(eval_term(&Term::One, &[], &alg).unwrap(), sp.full());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sp.random_element(&mut rng);
        let t = parse_term("x0 + -x0", 2, 2).unwrap();
        assert_eq!(eval_term(&t, &[a], &alg).unwrap(), sp.full());
        assert!(matches!(
            eval_term(&Term::Var(1), &[sp.empty()], &alg),
            Err(TermError::UnassignedVariable(_))
        ));
        assert!(matches!(
            eval_term(&Term::cyl(2, Term::One), &[], &alg),
            Err(TermError::DimensionMismatch { needed: 3, dimension: 2 })
        ));
    }

    #[test]
    fn involution_evaluates_to_identity() {
        let sp = Arc::new(SeqSpace::new(3, 3).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 2).unwrap();
        let t = parse_term("s[0,1](s[0,1](x0))", 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = sp.random_element(&mut rng);
            assert_eq!(eval_term(&t, std::slice::from_ref(&x), &alg).unwrap(), x);
        }
    }

    #[test]
    fn equations_on_generated_algebra() {
        let base = BaseSpec::new(vec![1, 1, 2]).unwrap(); // |U| = 4, d = 3
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, 2, &[r], DEFAULT_CLOSURE_CAP).unwrap();
        let idem = parse_term("x0 + x0", 3, 2).unwrap();
        let v = check_equation(&idem, &Term::Var(0), &a, Strategy::Exhaustive, DEFAULT_EXHAUSTIVE_CAP)
            .unwrap();
        assert!(v.holds());
        let cc = parse_term("c0(c0(x0))", 3, 2).unwrap();
        let c = parse_term("c0(x0)", 3, 2).unwrap();
        let v = check_equation(&cc, &c, &a, Strategy::Exhaustive, DEFAULT_EXHAUSTIVE_CAP).unwrap();
        assert!(v.holds());
        assert_eq!(v.coverage, Coverage::AtomReduced);
        // a false equation yields a counter-assignment
        let v = check_equation(&c, &Term::Var(0), &a, Strategy::Exhaustive, DEFAULT_EXHAUSTIVE_CAP)
            .unwrap();
        assert!(!v.holds());
        // two variables over a big algebra exceed the cap
        let comm = parse_term("x0 * -x1", 3, 2).unwrap();
        assert!(matches!(
            check_equation(&comm, &Term::Zero, &a, Strategy::Exhaustive, 1 << 10),
            Err(TermError::CapExceeded { .. })
        ));
        let v = check_equation(
            &parse_term("x0 * x1", 3, 2).unwrap(),
            &parse_term("x1 * x0", 3, 2).unwrap(),
            &a,
            Strategy::Sampled { count: 50, seed: 9 },
            0,
        )
        .unwrap();
        assert!(v.holds() && !v.is_exhaustive());
    }

    #[test]
    fn exhaustive_enumeration_on_tiny_powerset() {
        // d=1, |U|=3: 8 elements, two variables → 64 assignments
        let sp = Arc::new(SeqSpace::new(3, 1).unwrap());
        let alg = SetAlgebra::new(sp, 1).unwrap();
        let lhs = parse_term("c0(x0 * c0(x1))", 1, 1).unwrap();
        let rhs = parse_term("c0(x0) * c0(x1)", 1, 1).unwrap();
        let v = check_equation(&lhs, &rhs, &alg, Strategy::Exhaustive, 1 << 10).unwrap();
        assert_eq!(v.coverage, Coverage::Exhaustive);
        assert_eq!(v.instances, 64);
        assert!(v.holds());
    }

    #[test]
    fn quasi_equation_on_set_algebra() {
        let base = BaseSpec::new(vec![2, 2, 2]).unwrap();
        let sp = Arc::new(base.space().unwrap());
        let r = base.product_r(&sp).unwrap();
        let a = generate(sp, 2, &[r], DEFAULT_CLOSURE_CAP).unwrap();
        let q = disjoint_from_diagonal_quasi_equation(0, 1, 3).unwrap();
        assert_eq!(q.to_string(), "x0 <= -d(0,1) -> c1(d(1,0) * x0) <= 0");
        let v = check_quasi_equation(&q, &a, Strategy::Exhaustive, 0).unwrap();
        assert!(v.holds());
        assert_eq!(v.coverage, Coverage::AtomReduced);
        assert_eq!(v.instances, 1 + a.atoms().len() as u64);
    }

    #[test]
    fn additivity_analysis() {
        let t = parse_term("c0(d(0,1) * x0) + s[0,1](x0)", 3, 2).unwrap();
        assert!(t.is_additive_in(0));
        assert!(!parse_term("-x0", 3, 2).unwrap().is_additive_in(0));
        assert!(!parse_term("x0 * c1(x0)", 3, 2).unwrap().is_additive_in(0));
    }

    fn arb_term(dim: usize, n: usize) -> impl Gen<Value = Term> {
        let perms = Permutation::group(n);
        let leaf = prop_oneof![
            (0..3usize).prop_map(Term::Var),
            Just(Term::Zero),
            Just(Term::One),
            (0..dim, 0..dim).prop_map(|(i, j)| Term::Diag(i, j)),
        ];
        leaf.prop_recursive(4, 24, 2, move |inner| {
            let perms = perms.clone();
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::join(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::meet(a, b)),
                inner.clone().prop_map(Term::complement),
                (0..dim, inner.clone()).prop_map(|(i, a)| Term::cyl(i, a)),
                (proptest::sample::select(perms), inner).prop_map(|(p, a)| Term::subst(p, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(t in arb_term(3, 3)) {
            let s = print_term(&t);
            prop_assert_eq!(parse_term(&s, 3, 3).unwrap(), t);
        }

        #[test]
        fn joins_evaluate_to_unions(seed in any::<u64>()) {
            let sp = Arc::new(SeqSpace::new(3, 3).unwrap());
            let alg = SetAlgebra::new(sp.clone(), 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (sp.random_element(&mut rng), sp.random_element(&mut rng));
            let t = parse_term("x0 + x1", 3, 3).unwrap();
            prop_assert_eq!(eval_term(&t, &[a.clone(), b.clone()], &alg).unwrap(), a.union(&b));
        }
    }

    #[test]
    fn substitution_composition_matches_term_level() {
        // eval(s_σ s_τ x) = eval(s_{σ∘τ} x) for all σ, τ ∈ G_3
        let sp = Arc::new(SeqSpace::new(3, 3).unwrap());
        let alg = SetAlgebra::new(sp.clone(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = sp.random_element(&mut rng);
        let g = Permutation::group(3);
        for s in &g {
            for t in &g {
                let nested = Term::subst(s.clone(), Term::subst(t.clone(), Term::Var(0)));
                let direct = Term::subst(s.compose(t), Term::Var(0));
                assert_eq!(
                    eval_term(&nested, std::slice::from_ref(&x), &alg).unwrap(),
                    eval_term(&direct, std::slice::from_ref(&x), &alg).unwrap()
                );
            }
        }
    }
}

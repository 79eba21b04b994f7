//! The operation interface shared by concrete set algebras and abstract
//! finite Boolean algebras with operators. Terms are evaluated against it.

use crate::bitset::BitSet;
use crate::perm::Permutation;
use std::fmt::Debug;
use std::sync::Arc;

/// An algebra in the quasipolyadic-equality signature.
///
/// Index arguments are assumed valid: `i, j < dimension()` and substitution
/// permutations in `G_{subst_bound()}`. Callers that take indices from
/// untrusted input (the term evaluator, the parser) check them first.
pub trait Algebra {
    type Elem: Clone + PartialEq + Debug;

    fn dimension(&self) -> usize;
    fn subst_bound(&self) -> usize;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn meet(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn complement(&self, a: &Self::Elem) -> Self::Elem;
    fn cyl(&self, i: usize, a: &Self::Elem) -> Self::Elem;
    fn diag(&self, i: usize, j: usize) -> Self::Elem;
    fn subst(&self, p: &Permutation, a: &Self::Elem) -> Self::Elem;

    /// The replacement `s_{[i|j]}`; by default the derived form `c_i(d_ij · a)`.
    fn replace(&self, i: usize, j: usize, a: &Self::Elem) -> Self::Elem {
        if i == j {
            a.clone()
        } else {
            self.cyl(i, &self.meet(&self.diag(i, j), a))
        }
    }

    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.meet(a, b) == *a
    }

    fn is_zero(&self, a: &Self::Elem) -> bool {
        *a == self.zero()
    }
}

/// A finite atomic algebra whose elements are exactly the joins of atoms.
pub trait FiniteAlgebra: Algebra {
    fn atom_count(&self) -> usize;
    fn atom(&self, idx: usize) -> Self::Elem;
    /// The atoms below `x`, as a set of atom indices.
    fn atoms_below(&self, x: &Self::Elem) -> BitSet;
    /// Human-readable rendering for reports.
    fn describe(&self, x: &Self::Elem) -> serde_json::Value;

    /// A short witness for a nonzero element: the rendering of one atom below it.
    fn describe_member(&self, x: &Self::Elem) -> serde_json::Value {
        match self.atoms_below(x).first() {
            Some(a) => self.describe(&self.atom(a)),
            None => serde_json::Value::Null,
        }
    }

    fn element_from_atoms(&self, atoms: &BitSet) -> Self::Elem {
        atoms
            .iter()
            .fold(self.zero(), |acc, a| self.join(&acc, &self.atom(a)))
    }
}

macro_rules! forward_algebra {
    ($wrapper:ty) => {
        impl<A: Algebra + ?Sized> Algebra for $wrapper {
            type Elem = A::Elem;
            fn dimension(&self) -> usize {
                (**self).dimension()
            }
            fn subst_bound(&self) -> usize {
                (**self).subst_bound()
            }
            fn zero(&self) -> A::Elem {
                (**self).zero()
            }
            fn one(&self) -> A::Elem {
                (**self).one()
            }
            fn join(&self, a: &A::Elem, b: &A::Elem) -> A::Elem {
                (**self).join(a, b)
            }
            fn meet(&self, a: &A::Elem, b: &A::Elem) -> A::Elem {
                (**self).meet(a, b)
            }
            fn complement(&self, a: &A::Elem) -> A::Elem {
                (**self).complement(a)
            }
            fn cyl(&self, i: usize, a: &A::Elem) -> A::Elem {
                (**self).cyl(i, a)
            }
            fn diag(&self, i: usize, j: usize) -> A::Elem {
                (**self).diag(i, j)
            }
            fn subst(&self, p: &Permutation, a: &A::Elem) -> A::Elem {
                (**self).subst(p, a)
            }
            fn replace(&self, i: usize, j: usize, a: &A::Elem) -> A::Elem {
                (**self).replace(i, j, a)
            }
            fn leq(&self, a: &A::Elem, b: &A::Elem) -> bool {
                (**self).leq(a, b)
            }
            fn is_zero(&self, a: &A::Elem) -> bool {
                (**self).is_zero(a)
            }
        }

        impl<A: FiniteAlgebra + ?Sized> FiniteAlgebra for $wrapper {
            fn atom_count(&self) -> usize {
                (**self).atom_count()
            }
            fn atom(&self, idx: usize) -> A::Elem {
                (**self).atom(idx)
            }
            fn atoms_below(&self, x: &A::Elem) -> BitSet {
                (**self).atoms_below(x)
            }
            fn describe(&self, x: &A::Elem) -> serde_json::Value {
                (**self).describe(x)
            }
            fn element_from_atoms(&self, atoms: &BitSet) -> A::Elem {
                (**self).element_from_atoms(atoms)
            }
            fn describe_member(&self, x: &A::Elem) -> serde_json::Value {
                (**self).describe_member(x)
            }
        }
    };
}

forward_algebra!(&A);
forward_algebra!(Arc<A>);

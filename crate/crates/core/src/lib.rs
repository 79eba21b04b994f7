//! Finite set algebras of sequences, atom splitting of Boolean algebras with
//! operators, and representation checks for quasipolyadic equality algebras.

pub mod algebra;
pub mod bao;
pub mod bitset;
pub mod experiment;
pub mod nondiag;
pub mod perm;
pub mod setalg;
pub mod splitting;
pub mod terms;
pub mod verify;
pub mod witness;

pub use algebra::{Algebra, FiniteAlgebra};
pub use bitset::BitSet;
pub use perm::Permutation;

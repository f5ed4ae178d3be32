//! Discrete isospectral and isomonodromic dynamics of rational matrix
//! functions with simple determinant divisors.
//!
//! The building blocks are elementary divisors `A + p q†/(z - z_i)`
//! ([`divisor`]) and their re-factorization ([`refactor`]). On top of those
//! sit the Lagrangian step map of the isospectral flow ([`isospectral`]), the
//! shift-then-refactor isomonodromic transformation ([`isomonodromic`]), and
//! the rank-two spectral coordinates with the dPV recursion ([`spectral`]).

pub mod cli;
pub mod divisor;
pub mod error;
pub mod isomonodromic;
pub mod isospectral;
pub mod lax;
pub mod matcore;
pub mod refactor;
pub mod sampling;
pub mod spectral;

pub use divisor::ElementaryDivisor;
pub use error::{LaxError, Result};
pub use lax::RationalMatrixFunction;
pub use matcore::{CMatrix, ColVec, Normalization, Projective, RowVec, C64};

//! Regularized distances to lower-dimensional sets.
//!
//! For a measure `μ` on a set `E ⊂ R^n` of dimension `d < n - 2`, the smooth
//! distance `D(x) = (∫ |x - y|^{-d-α} dμ(y))^{-1/α}` behaves like the
//! Euclidean distance to `E`. This crate builds discrete and quadrature
//! representations of such measures and evaluates the potentials, the
//! degenerate elliptic operator `L = -div(D^{d+1-n} ∇)`, boundary limits,
//! the linearized kernel analysis, the reduced density equation and BMO
//! diagnostics.

pub mod bmo;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linearized;
pub mod nt_limits;
pub mod operators;
pub mod oracle;
pub mod pde_reduction;
pub mod potentials;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
pub use expr::Expr;
pub use geometry::{DiscreteMeasure, Field, GeometryParams};

//! Toolkit for convexifying mixed-integer second-order conic sets whose
//! right-hand side is a nonlinear function of the binary variables.
//!
//! The central object is a [`ConicSet`]: a finite binary domain `X`, matrices
//! `A`, `B`, a shift `d`, and a nonnegative right-hand side `f`, describing
//!
//! ```text
//!     Z = { (x, y) ∈ X × R^m : ‖A x + B y + d‖ ≤ f(x) }.
//! ```
//!
//! Replacing `f` by its concave envelope over `conv(X)` yields a convex
//! relaxation `W`; under a column-space condition on `(A, d, B)` the
//! relaxation is exact, i.e. `W = conv(Z)`. This crate provides:
//!
//! * the envelope machinery with Carathéodory-style certificates
//!   ([`envelope`]),
//! * a normalization that enforces the column-space condition ([`reformulate`]),
//! * two independent hull-membership oracles and a driver that checks their
//!   agreement ([`hull`]),
//! * the quadratic-constraint to second-order-cone rewrite and the
//!   chance-constraint to quadratic rewrite ([`reformulate`]),
//! * the square-root-envelope relaxation and its a-priori gap bound
//!   ([`relaxation`]),
//! * chance-constrained knapsack instance generators and formulation builders
//!   ([`knapsack`]),
//! * self-contained dense LP / SOCP / brute-force solvers ([`solvers`]).
//!
//! Everything is deterministic given explicit seeds; no global state.

pub mod config;
pub mod envelope;
mod error;
pub mod hull;
pub mod ir;
pub mod knapsack;
pub mod linalg;
pub mod model;
pub mod reformulate;
pub mod relaxation;
pub mod solvers;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use ir::ModelIr;
pub use model::{BinaryDomain, ConicSet, MembershipStatus, MembershipVerdict, Norm, RhsFunction};

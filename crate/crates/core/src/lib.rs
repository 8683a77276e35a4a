//! Numerical laboratory for path-dependent Hamilton-Jacobi-Bellman equations.
//!
//! The crate computes the deterministic Bolza value `v_0` by direct
//! transcription over piecewise-linear paths, the stochastic control values
//! `v_n` (viscosity `1/(2n)`) by exact backward induction on non-recombining
//! trees and by a Monte-Carlo exponential-transform estimator for quadratic
//! running costs, and checks generalized-solution characterizations (Dini and
//! minimax sub/supersolution inequalities) on the computed values.
//!
//! Module map:
//! - [`lagrangian`]: running costs, Hamiltonians, hypothesis checks.
//! - [`paths`]: time grids, piecewise-linear paths and the path operators.
//! - [`bolza`]: deterministic value `v_0` and dynamic-programming diagnostics.
//! - [`stochastic`]: scaled Brownian sampling, tree DP, quadratic oracle.
//! - [`dini`]: Dini derivative estimators and solution checkers.
//! - [`harness`]: experiment configuration, convergence study, verification.

// `!(a > b)` is the NaN-rejecting form used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bolza;
pub mod dini;
pub mod error;
pub mod harness;
pub mod lagrangian;
pub mod optimize;
pub mod paths;
mod seed;
pub mod stochastic;

pub use error::{Error, Result};
pub use lagrangian::{ExtendedReal, Lagrangian};
pub use paths::{DiscretePath, TimeGrid};

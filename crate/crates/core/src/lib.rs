//! Sharp Markov-type constants `γ_n* = sup ‖P'‖/‖P‖` over polynomials of
//! degree at most `n`, for weighted `L²` norms and weighted Sobolev norms
//! `‖P‖² + Σ λ_j ‖P^{(j)}‖²` built on classical and generalized Jacobi,
//! Laguerre and Hermite weights.
//!
//! The pipeline is: [`orthopoly`] produces the orthonormal recurrence of a
//! weight, [`quadrature`] turns it into Gauss rules, [`markov`] assembles the
//! derivative matrix in the orthonormal basis and reads the sharp constant off
//! its largest singular value (or the top eigenvalue of the Sobolev pencil),
//! and [`bounds`] checks the computed constants against the known growth
//! exponents.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod format;
pub mod linalg;
pub mod markov;
pub mod orthopoly;
pub mod quadrature;
pub mod selftest;

pub use bounds::{BoundCheck, CaseId, ExponentReport};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SymTridiag};
pub use markov::{DerivativeMatrix, MarkovProblem, SharpResult, SobolevSpec};
pub use orthopoly::{Family, RecurrenceTable, Singularity, WeightSpec};
pub use quadrature::QuadRule;

/// Default cap on the polynomial degree.
pub const DEFAULT_MAX_N: usize = 60;
/// Default cap on the Sobolev derivative order.
pub const DEFAULT_MAX_K: usize = 4;
/// Environment variable overriding [`DEFAULT_MAX_N`].
pub const MAX_N_ENV: &str = "MARKOVSHARP_MAX_N";

/// Degree cap in effect: `MARKOVSHARP_MAX_N` when set to a positive integer,
/// otherwise [`DEFAULT_MAX_N`].
pub fn max_degree() -> usize {
    std::env::var(MAX_N_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(DEFAULT_MAX_N)
}

//! Closed-form Rademacher-complexity and margin-based generalization bounds
//! for feed-forward networks trained on i.i.d. or Markov data, together
//! with brute-force harnesses that check every inequality involved.
//!
//! The crate is organised by concern:
//!
//! - [`network`]: weights, activations, the `‖·‖_{1,∞}` norm and the
//!   per-layer coefficients `α_i`.
//! - [`margins`]: binary, squared-error and softmax margins with their
//!   transfer constants, and the ramp cost `ζ`.
//! - [`complexity`]: the closed-form complexity bound, exact and Monte Carlo
//!   Rademacher estimators, and contraction-inequality checkers.
//! - [`markov`]: finite-state chain analytics (stationary law, spectral gap,
//!   mixing times, `τ_min`, initial-law constants, MSE bound).
//! - [`bounds`]: PAC bound assembly with per-γ term breakdown.
//! - [`experiments`]: dataset generation, exact risks, coverage and margin
//!   constant studies.
//! - [`io`] and [`cli`]: file formats, reports, and the command-line front
//!   end.

pub mod bounds;
pub mod cli;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod io;
pub mod margins;
pub mod markov;
pub mod network;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
pub use parallel::Workers;

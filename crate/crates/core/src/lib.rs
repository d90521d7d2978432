//! Numerical toolkit for evolution inclusions `x' + A(t, x) ∈ F(t, x)` posed on a
//! finite spectral truncation of a Gelfand triple `V ⊂ H ⊂ V*`.
//!
//! The crate is organised bottom-up:
//!
//! * [`gelfand`]: the spectral triple, its three norms and the duality pairing.
//! * [`operators`]: evaluable operators `A(t, x)` and sampling verifiers for the
//!   monotonicity, growth, coercivity and hemicontinuity hypotheses.
//! * [`multifunctions`]: convex, closed right-hand sides `F(t, x)`.
//! * [`trajectories`]: the forced-equation solver, trajectory samplers, discrete
//!   `W_pq` seminorms, the stopped-path pseudo-metric and a-priori estimates.
//! * [`viability`]: quasi-tangency searches, ε-approximate solutions and viable
//!   trajectories.
//! * [`hjb`]: Mayer-problem value functions, dynamic programming checks,
//!   contingent epiderivatives and viscosity residuals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extended;
pub mod gelfand;
pub mod hjb;
pub mod multifunctions;
pub mod operators;
pub mod report;
pub mod sampling;
pub mod trajectories;
pub mod viability;

pub use error::{Error, Result};
pub use extended::ExtReal;
pub use gelfand::{SpectralTriple, StateVector};

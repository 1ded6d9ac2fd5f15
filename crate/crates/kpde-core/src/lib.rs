// `!(x > 0.0)` guards stay as written: unlike `x <= 0.0` they also catch NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Chaos-expansion solver for stochastic parabolic equations with singular
//! space potentials.
//!
//! The pipeline: expand the random force and initial data in a Fourier–Hermite
//! basis, mollify the singular potential into a net `q_eps = q * phi_eps`,
//! solve one deterministic parabolic problem per chaos coefficient with a
//! Strang-split spectral integrator, and quantify the resulting solution nets
//! (moderateness, uniqueness under negligible regularization differences,
//! consistency with the classical solution, Monte Carlo cross-checks).

pub mod chaos;
pub mod error;
pub(crate) mod fft;
pub mod grid;
pub mod hermite;
pub mod multi_index;
pub mod quadrature;
pub mod regularization;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

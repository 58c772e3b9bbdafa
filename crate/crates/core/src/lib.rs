//! Pseudo-spectral simulation and diagnostics for the semiclassical
//! mass-critical nonlinear Schrödinger equation
//!
//! ```text
//! iε ∂ₜu + ½ε²Δu = λε²|u|^{4/n}u,   x ∈ ℝⁿ, n ∈ {1, 2}
//! ```
//!
//! on a periodic box `[-L, L)ⁿ` standing in for ℝⁿ.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod diagnostics;
pub mod extraction;
pub mod error;
pub mod evolution;
pub mod fft;
pub mod functionals;
pub mod grid;
pub mod profiles;

pub use error::{NlsError, Result};
pub use evolution::{Nonlinearity, SemiclassicalSetup, Snapshot, Trajectory};
pub use grid::{Field, Grid, Representation};

//! Steady states of a driven-dissipative Lipkin–Meshkov–Glick dimer with
//! PT-symmetric gain and loss.
//!
//! Two levels of description share one parameter record ([`ModelParams`]):
//!
//! - [`meanfield`]: the six coupled Bloch-vector equations, fixed points,
//!   attractor classification, Lyapunov exponents and analytic boundaries.
//! - [`liouville`]: the exact Lindblad generator on the `(2S+1)^2` dimer
//!   space, its steady state, time evolution and observables.
//!
//! [`wigner`] maps single-site density matrices to spin Wigner functions and
//! [`sweep`] drives parameter sweeps that write CSV files.

pub mod error;
pub mod liouville;
pub mod meanfield;
pub mod models;
pub mod ode;
pub mod spin_ops;
pub mod sweep;
pub mod wigner;

pub use error::{Error, Result};
pub use models::{LindbladSpec, ModelParams};
pub use spin_ops::{CMatrix, SpinLength};

/// Crate version recorded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

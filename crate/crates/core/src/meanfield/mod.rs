//! Mean-field dynamics of the dimer: six coupled equations for the
//! normalized spin components, exact as `S -> infinity`.
//!
//! The unit spheres `|r_A| = |r_B| = 1` are invariant under the flow, so
//! physical states start and stay on-shell.

mod boundaries;
mod classify;
mod equations;
mod fixed_points;
mod lyapunov;
mod trajectory;

pub use boundaries::{detect_lmg_boundary, detect_pt_boundary, lmg_boundary, normal_state_abscissa, pt_boundary};
pub use classify::{classify_point, AttractorReport, Classification, ClassifyOptions, Diagnostics};
pub use equations::{mf_jacobian, mf_rhs, spectral_abscissa, tangent_abscissa, BlochPair};
pub use fixed_points::{fibonacci_seeds, find_fixed_points, FixedPoint, FixedPointSearch, SearchOptions};
pub use lyapunov::{lyapunov_estimate, LyapunovOptions};
pub use trajectory::{integrate, integrate_sampled, Trajectory};

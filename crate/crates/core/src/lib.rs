//! Spin-star dynamics: a central spin of angular momentum j1 coupled
//! uniformly to a bath of N spin-1/2 particles,
//!
//! ```text
//!  H = omega0 * S_z + A * (S_x J_x + S_y J_y + S_z J_z),
//! ```
//!
//! where S is the central spin and J is the collective bath spin. The bath
//! starts in a thermal state exp(-beta J_z)/Z, uncorrelated with the central
//! spin.
//!
//! The crate computes the reduced dynamics of the central spin three ways:
//!
//! * exactly, through the collective-spin decomposition of the bath
//!   ([`exact_dynamics`]), including a brute-force product-basis oracle for
//!   small baths;
//! * through second-order time-convolutionless and Nakajima-Zwanzig master
//!   equations for two projection superoperators — the uncorrelated thermal
//!   projector and a correlated projector that resolves the bath by collective
//!   quantum numbers ([`master_equations`]);
//! * through closed-form solutions available in special regimes
//!   ([`closed_forms`]).
//!
//! Conventions used throughout:
//!
//! * Bath spins have S_z eigenvalues +-1/2, so the single-spin partition
//!   function is 2 cosh(beta/2).
//! * Central-spin matrices are indexed with m descending: row 0 is m = j1,
//!   the last row is m = -j1.
//! * Half-integer quantum numbers are represented exactly by their doubled
//!   integer values (see [`angular_momentum::HalfInt`]).
//! * hbar = 1; the coupling A sets the inverse time scale.

pub mod angular_momentum;
pub mod closed_forms;
pub mod exact_dynamics;
pub mod master_equations;
pub mod numerics;

pub use angular_momentum::{HalfInt, LogFactorialTable};
pub use exact_dynamics::{DensityMatrix, ModelSpec, TimeSeries};
pub use master_equations::{ProjectorKind, SectorSeries, SectorState};
pub use numerics::{Complex64, ComplexMatrix, GridSpec, NumericsError};

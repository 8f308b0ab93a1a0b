//! Numerical simulator for direct measurement of single-photon Feynman
//! propagators and for locating classical trajectories from the stationary
//! point of propagator products.
//!
//! Units: transverse positions and propagation distance are in millimetres.
//! The propagation distance `z` plays the role of time (`t = z/c`) and the
//! photon's effective transverse mass is its wavenumber `k = 2π/λ`, so
//! `ħ = c = 1` throughout.

// Negated comparisons such as `!(x > 0.0)` are used on purpose: they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod noise;
pub mod params;
pub mod photonstats;
pub mod pla;
pub mod potential;
pub mod propagators;
pub mod protocol;

pub use error::{Error, Result};
pub use field::{gaussian_packet, ComplexField};
pub use grid::SpatialGrid;
pub use params::{check_paraxial, grin_omega, ParaxialCheck, PhysicalParams};
pub use potential::Potential;
pub use propagators::Endpoints;

pub use num_complex::Complex64;

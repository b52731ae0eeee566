//! Numerical kernels for the weighted extension operator
//! Δ_b = Δ + (b/t)∂_t with b = 3 - 2s: hemisphere and cylinder spectra,
//! the extension profile, exact separable solutions, the Almgren frequency
//! and the associated functional inequalities.

// `!(x > 0.0)` is deliberate: it also rejects NaN. Index loops mirror the
// stencils they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod almgren;
pub mod cylinder_spectrum;
pub mod error;
pub mod extension_profile;
pub mod hemisphere_spectrum;
pub mod inequalities;
pub mod params;
pub mod quadrature;
pub mod solution_synthesis;
pub mod special_functions;
pub mod tridiag;

pub use error::{LabError, Result};
pub use params::{sphere_area, WeightParams};
pub use quadrature::{integrate_halfball, integrate_halfsphere, AngularGrid1D, HalfBallGrid};

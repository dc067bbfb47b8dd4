//! Shared numerical primitives: special functions, adaptive quadrature along
//! complex contours, 1D grids, banded linear algebra and an embedded
//! Runge-Kutta integrator.
//!
//! Everything here is a pure function of its inputs and safe to call from
//! multiple threads.

mod contour;
mod grid;
pub mod linalg;
pub mod ode;
mod quadrature;
mod special;

pub use contour::{ContourPath, Plane, Segment};
pub use grid::Grid1D;
pub use quadrature::{contour_integrate, gk15_points, integrate_real_segment, SUBDIVISION_BUDGET};
pub use special::{bessel_j0, erfcx, gamma_tail, mills_product};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    /// Adaptive refinement exceeded the subdivision budget; usually a pole on
    /// or too close to the integration path.
    #[error("quadrature did not converge within {panels} panels (estimated error {err:.3e})")]
    NonConvergence { panels: usize, err: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("tolerance {0:.3e} outside (1e-14, 1e-2)")]
    InvalidTolerance(f64),
}

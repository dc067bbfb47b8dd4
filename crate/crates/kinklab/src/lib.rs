//! Desk-scale numerical analysis of kink stability for the Cahn-Hilliard
//! equation in three dimensions.
//!
//! The toolkit covers the linear theory (spectrum of the linearized operator
//! per transverse mode, Evans-style determinant, resolvent kernel, semigroup
//! kernel by contour integration) and the nonlinear side (a mixed-representation
//! simulator that measures the anomalous t^(1/3) front-relaxation scaling).
//!
//! Modules mirror the pipeline:
//!
//! * [`numerics`] - special functions, adaptive complex-contour quadrature,
//!   grids, banded linear algebra, an embedded Runge-Kutta integrator.
//! * [`profiles`] - closed-form kink profiles and the scaling profile phi*.
//! * [`spectrum`] - discretized operator pair (D_k, H_k) and its low spectrum.
//! * [`homsol`] - the 4x4 first-order system and exponentially normalized
//!   solutions built by renormalized shooting.
//! * [`resolvent`] - the 2x2 pairing matrix Omega, its determinant, the pole
//!   in the tau plane, and the resolvent kernel.
//! * [`semigroup`] - Dunford-Cauchy construction of the semigroup kernel,
//!   explicit closed-form pieces, and a time-stepping oracle.
//! * [`simulator`] - nonlinear Cahn-Hilliard evolution in mixed
//!   representation for d = 3 with scaling diagnostics.
//! * [`cli`] - configuration, run manifests, CSV output.
//! * [`verify`] - the acceptance checks run by `kinklab verify-all` and the
//!   integration test suite.

pub mod cli;
pub mod homsol;
pub mod numerics;
pub mod profiles;
pub mod resolvent;
pub mod semigroup;
pub mod simulator;
pub mod spectrum;
pub mod verify;

pub use numerics::{Grid1D, NumericsError};

//! Closed-form profiles: the kink, its derivative, the potential of the
//! linearized operator, the anomalous-scaling profile phi*, and the full
//! asymptotic front ansatz.

use crate::numerics::{bessel_j0, integrate_real_segment};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProfileError {
    #[error("phi* is only implemented for transverse dimension 1 or 2, got {0}")]
    UnsupportedDimension(usize),
}

/// u0, du0/dx and the potential V at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkPoint {
    pub u0: f64,
    pub du0: f64,
    pub v: f64,
}

/// sech^2(x/2), evaluated through exponentials so large |x| underflows
/// gracefully instead of overflowing cosh.
#[inline]
pub fn sech2_half(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    4.0 * e / (1.0 + e) / (1.0 + e)
}

/// The kink u0(x) = tanh(x/2).
#[inline]
pub fn kink(x: f64) -> f64 {
    (0.5 * x).tanh()
}

/// du0/dx = (2 cosh^2(x/2))^{-1}, decaying like 2 e^{-|x|}.
#[inline]
pub fn kink_derivative(x: f64) -> f64 {
    0.5 * sech2_half(x)
}

/// Potential V(x) = -(3/2) sech^2(x/2) of H = -Lap + 1 + V.
#[inline]
pub fn potential(x: f64) -> f64 {
    -1.5 * sech2_half(x)
}

/// V'(x)
#[inline]
pub fn potential_deriv(x: f64) -> f64 {
    // V' = -V tanh(x/2)
    1.5 * sech2_half(x) * (0.5 * x).tanh()
}

/// V''(x)
#[inline]
pub fn potential_deriv2(x: f64) -> f64 {
    let t = (0.5 * x).tanh();
    0.75 * sech2_half(x) * (1.0 - 3.0 * t * t)
}

/// Kink, derivative and potential at one point.
pub fn kink_family(x: f64) -> KinkPoint {
    KinkPoint {
        u0: kink(x),
        du0: kink_derivative(x),
        v: potential(x),
    }
}

/// Wavenumber beyond which exp(-k^3/3) < 1e-16; truncation point for the
/// phi* quadrature.
const PHI_STAR_KMAX: f64 = 5.5;

/// The radially symmetric scaling profile
/// phi*(x) = int e^{i k.x} e^{-|k|^3/3} dk / (2 pi)^{d-1}
/// reduced to a cosine (dim 1) or Bessel-J0 (dim 2) radial integral.
/// Absolute accuracy ~1e-8 for radius <= 50.
pub fn phi_star(radius: f64, transverse_dim: usize) -> Result<f64, ProfileError> {
    let r = radius.abs();
    let integrand: Box<dyn Fn(f64) -> Complex64> = match transverse_dim {
        1 => Box::new(move |k: f64| Complex64::new((k * r).cos() * (-k * k * k / 3.0).exp(), 0.0)),
        2 => Box::new(move |k: f64| {
            Complex64::new(k * bessel_j0(k * r) * (-k * k * k / 3.0).exp(), 0.0)
        }),
        d => return Err(ProfileError::UnsupportedDimension(d)),
    };
    let val = integrate_real_segment(&integrand, 0.0, PHI_STAR_KMAX, 1e-11, 1 << 14)
        .expect("phi* integrand is smooth")
        .re;
    Ok(match transverse_dim {
        1 => val / std::f64::consts::PI,
        _ => val / (2.0 * std::f64::consts::PI),
    })
}

/// phi(x, t) = t^{-(d-1)/3} phi*(x / t^{1/3}).
pub fn phi_scaled(radius: f64, t: f64, transverse_dim: usize) -> Result<f64, ProfileError> {
    let s = t.powf(1.0 / 3.0);
    Ok(t.powf(-(transverse_dim as f64) / 3.0) * phi_star(radius / s, transverse_dim)?)
}

/// The asymptotic front ansatz u0(x) + (A/2) du0(x) phi(x_perp, t).
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticAnsatz {
    /// perturbation mass A = integral of h over R^d
    pub mass: f64,
    /// spatial dimension, >= 3
    pub dim: usize,
}

impl AsymptoticAnsatz {
    pub fn new(mass: f64, dim: usize) -> Self {
        assert!(dim >= 3, "the ansatz covers d >= 3");
        AsymptoticAnsatz { mass, dim }
    }

    /// Evaluate at longitudinal x, transverse radius |x_perp| and time t >= 1.
    pub fn eval(&self, x: f64, transverse_radius: f64, t: f64) -> Result<f64, ProfileError> {
        if self.mass == 0.0 {
            return Ok(kink(x));
        }
        let phi = phi_scaled(transverse_radius, t, self.dim - 1)?;
        Ok(kink(x) + 0.5 * self.mass * kink_derivative(x) * phi)
    }
}

//! The 2x2 pairing matrix Omega = z^- u^+, its determinant (an Evans-style
//! function whose zeros are eigenvalues of D_k H_k), the pole location in
//! the tau plane, and the resolvent kernel R(x, y).

use crate::homsol::{
    median_complex, solve_homogeneous, HomogeneousSolutionSet, HomsolError, SpectralParameters,
};
use crate::numerics::Grid1D;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResolventError {
    #[error("pairing constancy failed for Omega entry ({0},{1}): spread {2:.3e}")]
    DegenerateSolutions(usize, usize, f64),
    #[error("pole iteration left the trust region |tau - ik| <= k/2 (tau = {0})")]
    NoRoot(Complex64),
    #[error("|det Omega| = {0:.3e} below the pole threshold; resolvent undefined here")]
    AtPole(f64),
    #[error(transparent)]
    Homsol(#[from] HomsolError),
    #[error("requested point ({0}, {1}) is not on the grid")]
    OffGrid(f64, f64),
}

/// Omega, det Omega and the solution set behind them.
pub struct ResolventAssembly {
    pub params: SpectralParameters,
    pub omega: [[Complex64; 2]; 2],
    pub det_omega: Complex64,
    pub solset: HomogeneousSolutionSet,
}

/// Spread tolerance for the pairing-constancy guard, relative to the
/// largest Omega entry.
const CONSTANCY_TOL: f64 = 1e-6;

/// |det Omega| below this triggers AtPole on kernel evaluation.
const POLE_THRESHOLD: f64 = 1e-10;

/// Assemble Omega as the grid-median of the pairing z_i^-(x) u_j^+(x) over
/// the central window; the median both averages shooting noise and, through
/// the spread check, tests constancy.
pub fn omega(solset: HomogeneousSolutionSet) -> Result<ResolventAssembly, ResolventError> {
    let mut om = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut spreads = [[0.0_f64; 2]; 2];
    for zi in 0..2 {
        for uj in 0..2 {
            let series = solset.pairing_series(zi, uj);
            let med = median_complex(&series);
            let var = series.iter().map(|v| (v - med).norm_sqr()).sum::<f64>()
                / series.len() as f64;
            om[zi][uj] = med;
            spreads[zi][uj] = var.sqrt();
        }
    }
    let scale = om
        .iter()
        .flatten()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    for zi in 0..2 {
        for uj in 0..2 {
            if spreads[zi][uj] > CONSTANCY_TOL * scale {
                return Err(ResolventError::DegenerateSolutions(zi, uj, spreads[zi][uj]));
            }
        }
    }
    let det_omega = om[0][0] * om[1][1] - om[0][1] * om[1][0];
    Ok(ResolventAssembly {
        params: solset.params,
        omega: om,
        det_omega,
        solset,
    })
}

/// det Omega at (k, tau), assembling the solutions on the given grid.
pub fn det_omega_at(
    k: Complex64,
    tau: Complex64,
    grid: &Grid1D,
    x0: f64,
) -> Result<Complex64, ResolventError> {
    let params = SpectralParameters::new(k, tau)?;
    let solset = solve_homogeneous(params, grid, x0)?;
    Ok(omega(solset)?.det_omega)
}

/// Location of the det Omega zero in the tau plane, with the eigenvalue it
/// maps to.
#[derive(Debug, Clone, Copy)]
pub struct PoleReport {
    pub k: f64,
    /// tau-plane zero of det Omega
    pub p: Complex64,
    /// zeta(k, p); the isolated eigenvalue of D_k H_k
    pub zeta0_from_pole: Complex64,
}

/// Secant iteration on tau -> det Omega(k, tau) from `initial_guess`
/// (canonically i k). Fails with NoRoot if the iteration leaves
/// |tau - ik| <= k/2.
pub fn locate_pole(
    k: f64,
    initial_guess: Complex64,
    grid: &Grid1D,
    x0: f64,
) -> Result<PoleReport, ResolventError> {
    let kc = Complex64::new(k, 0.0);
    let center = Complex64::new(0.0, k);
    let mut t0 = initial_guess;
    let mut t1 = initial_guess * (1.0 - k / 6.0);
    let mut f0 = det_omega_at(kc, t0, grid, x0)?;
    let mut f1 = det_omega_at(kc, t1, grid, x0)?;
    for _ in 0..40 {
        if (f1 - f0).norm() == 0.0 {
            break;
        }
        let t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
        if (t2 - center).norm() > 0.5 * k {
            return Err(ResolventError::NoRoot(t2));
        }
        t0 = t1;
        f0 = f1;
        t1 = t2;
        f1 = det_omega_at(kc, t1, grid, x0)?;
        if f1.norm() < 1e-13 || (t1 - t0).norm() < 1e-13 * t1.norm() {
            break;
        }
    }
    let params = SpectralParameters::new(kc, t1)?;
    Ok(PoleReport {
        k,
        p: t1,
        zeta0_from_pole: params.zeta,
    })
}

impl ResolventAssembly {
    /// R(x_i, y_j) using the y < x branch and the reflection identity
    /// R(x, y) = R(-x, -y) otherwise.
    pub fn kernel_at(&self, xi: usize, yj: usize) -> Result<Complex64, ResolventError> {
        if self.det_omega.norm() < POLE_THRESHOLD {
            return Err(ResolventError::AtPole(self.det_omega.norm()));
        }
        Ok(self.kernel_unchecked(xi, yj))
    }

    pub(crate) fn kernel_unchecked(&self, xi: usize, yj: usize) -> Complex64 {
        let g = &self.solset.grid;
        let (xi, yj) = if yj <= xi {
            (xi, yj)
        } else {
            (g.mirror_index(xi), g.mirror_index(yj))
        };
        let u1 = self.solset.u_value(0, xi);
        let u2 = self.solset.u_value(1, xi);
        let z1 = self.solset.z_value(0, yj);
        let z2 = self.solset.z_value(1, yj);
        // -U(x) Omega^{-1} Z(y) via the adjugate: for Omega = [[a,b],[c,d]],
        // Omega^{-1} Z = (d z1 - b z2, -c z1 + a z2) / det
        let o = &self.omega;
        let adj_z1 = o[1][1] * z1 - o[0][1] * z2;
        let adj_z2 = -o[1][0] * z1 + o[0][0] * z2;
        -(u1 * adj_z1 + u2 * adj_z2) / self.det_omega
    }

    /// R at physical coordinates that must coincide with grid nodes.
    pub fn kernel(&self, x: f64, y: f64) -> Result<Complex64, ResolventError> {
        let g = &self.solset.grid;
        let xi = g
            .nearest_index(x)
            .filter(|&i| (g.node(i) - x).abs() < 1e-9)
            .ok_or(ResolventError::OffGrid(x, y))?;
        let yj = g
            .nearest_index(y)
            .filter(|&j| (g.node(j) - y).abs() < 1e-9)
            .ok_or(ResolventError::OffGrid(x, y))?;
        self.kernel_at(xi, yj)
    }
}

//! Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) for complex
//! 4-component systems, stepping exactly onto a requested node sequence.

use num_complex::Complex64;

pub type C4 = [Complex64; 4];

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step magnitude; keeps the local error floor low in
    /// regions where the solution is nearly an eigenmode of the system.
    pub max_step: f64,
    /// Magnitude guard: integration aborts when the renormalized solution
    /// exceeds this.
    pub guard: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 0.05,
            guard: 1e200,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OdeError {
    #[error("solution magnitude {0:.3e} exceeded the guard; wrong growth direction or unstable index")]
    Blowup(f64),
    #[error("step size underflow at x = {0}")]
    StepUnderflow(f64),
}

fn add_scaled(y: &C4, k: &[C4], coefs: &[(usize, f64)], h: f64) -> C4 {
    let mut out = *y;
    for &(i, c) in coefs {
        for d in 0..4 {
            out[d] += k[i][d] * (h * c);
        }
    }
    out
}

fn max_abs(y: &C4) -> f64 {
    y.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

impl Dopri5 {
    /// Integrate y' = f(x, y) from `x0` with value `y0`, recording the state
    /// at each node of `nodes`. Nodes must be monotone in the direction of
    /// travel (increasing if the last node is > x0, decreasing otherwise) and
    /// the first recorded node may equal x0.
    pub fn integrate_to_nodes<F: Fn(f64, &C4) -> C4>(
        &self,
        f: F,
        x0: f64,
        y0: C4,
        nodes: &[f64],
    ) -> Result<Vec<C4>, OdeError> {
        let mut out = Vec::with_capacity(nodes.len());
        if nodes.is_empty() {
            return Ok(out);
        }
        let dir = if *nodes.last().unwrap() >= x0 { 1.0 } else { -1.0 };
        let mut x = x0;
        let mut y = y0;
        let mut h = self.max_step * dir;
        let mut k = [[Complex64::new(0.0, 0.0); 4]; 7];
        k[0] = f(x, &y);
        for &target in nodes {
            if (target - x) * dir <= 0.0 {
                // at (or numerically at) the node already
                if (target - x).abs() <= 1e-12 * (1.0 + x.abs()) {
                    out.push(y);
                    continue;
                }
            }
            while (target - x) * dir > 1e-14 * (1.0 + x.abs()) {
                let remaining = target - x;
                let mut hs = h;
                if hs.abs() > remaining.abs() {
                    hs = remaining;
                }
                // one DP5 attempt
                let (ynew, errnorm, k7) = self.attempt(&f, x, &y, hs, &mut k)?;
                if errnorm <= 1.0 {
                    x += hs;
                    y = ynew;
                    k[0] = k7; // FSAL
                    let m = max_abs(&y);
                    if !m.is_finite() || m > self.guard {
                        return Err(OdeError::Blowup(m));
                    }
                    let grow = if errnorm > 0.0 {
                        (0.9 * errnorm.powf(-0.2)).clamp(0.2, 5.0)
                    } else {
                        5.0
                    };
                    h = (hs * grow).clamp(-self.max_step, self.max_step);
                    if h == 0.0 {
                        h = self.max_step * dir;
                    }
                } else {
                    let shrink = (0.9 * errnorm.powf(-0.2)).clamp(0.1, 0.9);
                    h = hs * shrink;
                    if h.abs() < 1e-14 * (1.0 + x.abs()) {
                        return Err(OdeError::StepUnderflow(x));
                    }
                    k[0] = f(x, &y);
                }
            }
            out.push(y);
        }
        Ok(out)
    }

    #[allow(clippy::type_complexity)]
    fn attempt<F: Fn(f64, &C4) -> C4>(
        &self,
        f: &F,
        x: f64,
        y: &C4,
        h: f64,
        k: &mut [C4; 7],
    ) -> Result<(C4, f64, C4), OdeError> {
        const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        k[1] = f(x + C[0] * h, &add_scaled(y, k, &[(0, 0.2)], h));
        k[2] = f(x + C[1] * h, &add_scaled(y, k, &[(0, 3.0 / 40.0), (1, 9.0 / 40.0)], h));
        k[3] = f(
            x + C[2] * h,
            &add_scaled(y, k, &[(0, 44.0 / 45.0), (1, -56.0 / 15.0), (2, 32.0 / 9.0)], h),
        );
        k[4] = f(
            x + C[3] * h,
            &add_scaled(
                y,
                k,
                &[
                    (0, 19372.0 / 6561.0),
                    (1, -25360.0 / 2187.0),
                    (2, 64448.0 / 6561.0),
                    (3, -212.0 / 729.0),
                ],
                h,
            ),
        );
        k[5] = f(
            x + C[4] * h,
            &add_scaled(
                y,
                k,
                &[
                    (0, 9017.0 / 3168.0),
                    (1, -355.0 / 33.0),
                    (2, 46732.0 / 5247.0),
                    (3, 49.0 / 176.0),
                    (4, -5103.0 / 18656.0),
                ],
                h,
            ),
        );
        let y5 = add_scaled(
            y,
            k,
            &[
                (0, 35.0 / 384.0),
                (2, 500.0 / 1113.0),
                (3, 125.0 / 192.0),
                (4, -2187.0 / 6784.0),
                (5, 11.0 / 84.0),
            ],
            h,
        );
        let k7 = f(x + h, &y5);
        // 4th-order comparison solution via the error coefficients
        const E: [f64; 7] = [
            35.0 / 384.0 - 5179.0 / 57600.0,
            0.0,
            500.0 / 1113.0 - 7571.0 / 16695.0,
            125.0 / 192.0 - 393.0 / 640.0,
            -2187.0 / 6784.0 + 92097.0 / 339200.0,
            11.0 / 84.0 - 187.0 / 2100.0,
            -1.0 / 40.0,
        ];
        let mut errnorm = 0.0_f64;
        for d in 0..4 {
            let mut e = Complex64::new(0.0, 0.0);
            for i in 0..6 {
                e += k[i][d] * (h * E[i]);
            }
            e += k7[d] * (h * E[6]);
            let sc = self.atol + self.rtol * y[d].norm().max(y5[d].norm());
            errnorm = errnorm.max(e.norm() / sc);
        }
        Ok((y5, errnorm, k7))
    }
}

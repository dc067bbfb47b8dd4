//! Parameterized integration contours in the zeta or tau plane.

use super::NumericsError;
use num_complex::Complex64;

/// Which spectral plane a contour lives in. The zeta plane carries the
/// resolvent variable directly; the tau plane is the reparameterized one
/// where zeta = k^2 + k^4 + (1 + 2k^2)^2 tau^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Zeta,
    Tau,
}

/// A smooth curve s in [0, 1] -> C with an analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line {
        from: Complex64,
        to: Complex64,
    },
    Arc {
        center: Complex64,
        radius: f64,
        /// start angle (radians)
        theta0: f64,
        /// end angle; may differ from theta0 by more than 2 pi
        theta1: f64,
    },
}

impl Segment {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + (theta1 - theta0) * s;
                center + radius * Complex64::new(th.cos(), th.sin())
            }
        }
    }

    /// d(point)/ds
    pub fn derivative(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                center: _,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + (theta1 - theta0) * s;
                let dth = theta1 - theta0;
                radius * dth * Complex64::new(-th.sin(), th.cos())
            }
        }
    }

    fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    fn end(&self) -> Complex64 {
        self.point(1.0)
    }
}

/// An ordered chain of segments with an orientation flag and plane tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    segments: Vec<Segment>,
    reversed: bool,
    plane: Plane,
}

impl ContourPath {
    pub fn new(segments: Vec<Segment>, plane: Plane) -> Self {
        ContourPath {
            segments,
            reversed: false,
            plane,
        }
    }

    pub fn line(from: Complex64, to: Complex64, plane: Plane) -> Self {
        Self::new(vec![Segment::Line { from, to }], plane)
    }

    /// Full counterclockwise circle.
    pub fn circle(center: Complex64, radius: f64, plane: Plane) -> Self {
        Self::new(
            vec![Segment::Arc {
                center,
                radius,
                theta0: 0.0,
                theta1: 2.0 * std::f64::consts::PI,
            }],
            plane,
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Same geometry, traversed the other way.
    pub fn reversed(&self) -> Self {
        let mut p = self.clone();
        p.reversed = !p.reversed;
        p
    }

    pub fn is_closed(&self) -> bool {
        match (self.segments.first(), self.segments.last()) {
            (Some(f), Some(l)) => (l.end() - f.start()).norm() < 1e-12 * (1.0 + f.start().norm()),
            _ => false,
        }
    }

    /// Check the structural invariants: nonempty, consecutive endpoints match,
    /// and each parameterization has a bounded nonvanishing derivative
    /// (checked by sampling).
    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.segments.is_empty() {
            return Err(NumericsError::InvalidContour("empty path".into()));
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let gap = (pair[1].start() - pair[0].end()).norm();
            if gap > 1e-9 * (1.0 + pair[0].end().norm()) {
                return Err(NumericsError::InvalidContour(format!(
                    "segments {i} and {} do not share an endpoint (gap {gap:.3e})",
                    i + 1
                )));
            }
        }
        for (i, seg) in self.segments.iter().enumerate() {
            for j in 0..=16 {
                let d = seg.derivative(j as f64 / 16.0).norm();
                if !(d.is_finite() && d > 0.0) {
                    return Err(NumericsError::InvalidContour(format!(
                        "segment {i} has degenerate derivative {d:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    #[test]
    fn circle_is_closed_and_valid() {
        let p = ContourPath::circle(C::new(1.0, -2.0), 0.5, Plane::Tau);
        assert!(p.is_closed());
        p.validate().unwrap();
    }

    #[test]
    fn mismatched_segments_rejected() {
        let p = ContourPath::new(
            vec![
                Segment::Line {
                    from: C::new(0.0, 0.0),
                    to: C::new(1.0, 0.0),
                },
                Segment::Line {
                    from: C::new(2.0, 0.0),
                    to: C::new(3.0, 0.0),
                },
            ],
            Plane::Zeta,
        );
        assert!(p.validate().is_err());
    }

    #[test]
    fn degenerate_segment_rejected() {
        let z = C::new(1.0, 1.0);
        let p = ContourPath::line(z, z, Plane::Zeta);
        assert!(p.validate().is_err());
    }
}

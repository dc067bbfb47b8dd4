//! Uniform symmetric 1D grids on [-L, L].

use super::NumericsError;

/// Uniform grid of `n` nodes on [-half_length, half_length], symmetric about
/// the origin: node(i) = -node(n-1-i).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    half_length: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(half_length: f64, n: usize) -> Result<Self, NumericsError> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(NumericsError::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        if n < 4 {
            return Err(NumericsError::InvalidGrid(format!("need at least 4 nodes, got {n}")));
        }
        Ok(Grid1D { half_length, n })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        -self.half_length + self.dx() * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Index of the node closest to x, if x lies within the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if x < -self.half_length - 0.5 * self.dx() || x > self.half_length + 0.5 * self.dx() {
            return None;
        }
        let i = ((x + self.half_length) / self.dx()).round() as isize;
        Some(i.clamp(0, self.n as isize - 1) as usize)
    }

    /// Index of the mirrored node: node(j) == -node(i).
    pub fn mirror_index(&self, i: usize) -> usize {
        self.n - 1 - i
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes reset to the background at each end of the x axis after every stage.
pub const NGHOST: usize = 3;

/// A uniform, symmetric axis of `n` nodes spanning `[-half_width, half_width]`
/// including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub half_width: f64,
}

impl Axis {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Config(format!("axis needs at least 8 nodes, got {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("axis half-width must be positive, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Node coordinate; exactly antisymmetric about the centre.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.n - 1) as f64) * (0.5 * self.spacing())
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Fractional node index of coordinate `x`.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x + self.half_width) / self.spacing()
    }

    /// Trapezoid quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    /// The axis with every cell split in two (`2n - 1` nodes).
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, half_width: self.half_width }
    }
}

/// Tensor grid over `(x, p1, p2)`. Arrays are stored x-major, then p1, then
/// p2 (p2 fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x: Axis,
    pub p1: Axis,
    pub p2: Axis,
}

impl PhaseSpaceGrid {
    pub fn new(nx: usize, np1: usize, np2: usize, x_max: f64, p1_max: f64, p2_max: f64) -> Result<Self> {
        let grid = Self {
            x: Axis::new(nx, x_max)?,
            p1: Axis::new(np1, p1_max)?,
            p2: Axis::new(np2, p2_max)?,
        };
        if nx <= 2 * NGHOST + 2 {
            return Err(Error::Config(format!("nx = {nx} leaves no interior outside the ghost bands")));
        }
        Ok(grid)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x.spacing()
    }

    #[inline]
    pub fn dp1(&self) -> f64 {
        self.p1.spacing()
    }

    #[inline]
    pub fn dp2(&self) -> f64 {
        self.p2.spacing()
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.p1.n * self.p2.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.n * self.plane_len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, k1: usize, k2: usize) -> usize {
        (ix * self.p1.n + k1) * self.p2.n + k2
    }

    #[inline]
    pub fn momentum(&self, k1: usize, k2: usize) -> [f64; 2] {
        [self.p1.node(k1), self.p2.node(k2)]
    }

    /// Trapezoid weights over one momentum plane, `dp1 dp2` folded in.
    pub fn momentum_weights(&self) -> Vec<f64> {
        let w1 = self.p1.trapezoid_weights();
        let w2 = self.p2.trapezoid_weights();
        let mut w = Vec::with_capacity(self.plane_len());
        for a in &w1 {
            for b in &w2 {
                w.push(a * b);
            }
        }
        w
    }

    /// Halve `dx` only.
    pub fn refined_x(&self) -> Self {
        Self { x: self.x.refined(), ..*self }
    }

    /// Halve every spacing.
    pub fn refined_all(&self) -> Self {
        Self { x: self.x.refined(), p1: self.p1.refined(), p2: self.p2.refined() }
    }

    pub fn ensure_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

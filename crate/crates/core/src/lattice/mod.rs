//! Uniform lattices, kernels, fields, and the discrete nonlocal operator.

mod field;
pub mod io;
mod kernel;
mod operator;
mod tail;

pub use field::{Datum, ExteriorRule, Field};
pub use kernel::{
    kernel_audit, ConstantKernel, FnKernel, Kernel, KernelAudit, KernelSpec, SinSumKernel, TransformedKernel,
};
pub use operator::{apply_operator, phi_p, phi_p_prime, sphere_measure, ExteriorLoad, FarField, LatticeOperator};
pub use tail::{tail, TimeSlice};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝⁿ, n ≤ 2. The second coordinate is unused in one dimension.
pub type Point = [f64; 2];

/// Integer lattice coordinates relative to the box origin.
pub type LatticeIndex = [i64; 2];

/// Fractional order and growth exponent of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub s: f64,
    pub p: f64,
}

impl Exponents {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        let e = Self { s, p };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::InvalidExponent(format!("p must exceed 2, got {}", self.p)));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidExponent(format!("s must lie in (0, 1), got {}", self.s)));
        }
        Ok(())
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }
}

/// Uniform lattice over the computational box Ω′.
///
/// Nodes are stored row-major: index = iy·nx + ix. `r_inf` is the radius up to
/// which lattice points beyond the box are summed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    h: f64,
    origin: Point,
    shape: [usize; 2],
    r_inf: f64,
}

impl Grid {
    pub fn new_1d(origin: f64, h: f64, nodes: usize, r_inf: f64) -> Result<Self> {
        Self::new(1, h, [origin, 0.0], [nodes, 1], r_inf)
    }

    pub fn new_2d(origin: Point, h: f64, nx: usize, ny: usize, r_inf: f64) -> Result<Self> {
        Self::new(2, h, origin, [nx, ny], r_inf)
    }

    pub fn new(dim: usize, h: f64, origin: Point, shape: [usize; 2], r_inf: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParams(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("spacing must be positive, got {h}")));
        }
        if shape[0] < 2 || (dim == 2 && shape[1] < 2) || (dim == 1 && shape[1] != 1) {
            return Err(Error::InvalidParams(format!("invalid lattice shape {shape:?}")));
        }
        let g = Self {
            dim,
            h,
            origin,
            shape,
            r_inf,
        };
        if !(r_inf >= g.diameter() * (1.0 - 1e-12)) {
            return Err(Error::InvalidParams(format!(
                "truncation radius {r_inf} is below the box diameter {}",
                g.diameter()
            )));
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// hⁿ, the volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn diameter(&self) -> f64 {
        let lx = (self.shape[0] - 1) as f64 * self.h;
        let ly = (self.shape[1] - 1) as f64 * self.h;
        (lx * lx + ly * ly).sqrt()
    }

    pub fn with_origin(&self, origin: Point) -> Self {
        Self { origin, ..self.clone() }
    }

    pub fn with_r_inf(&self, r_inf: f64) -> Result<Self> {
        Self::new(self.dim, self.h, self.origin, self.shape, r_inf)
    }

    pub fn lattice_index(&self, idx: usize) -> LatticeIndex {
        [(idx % self.shape[0]) as i64, (idx / self.shape[0]) as i64]
    }

    pub fn flat_index(&self, li: LatticeIndex) -> Option<usize> {
        if self.in_box(li) {
            Some(li[1] as usize * self.shape[0] + li[0] as usize)
        } else {
            None
        }
    }

    pub fn in_box(&self, li: LatticeIndex) -> bool {
        li[0] >= 0 && li[1] >= 0 && (li[0] as usize) < self.shape[0] && (li[1] as usize) < self.shape[1]
    }

    pub fn lattice_coord(&self, li: LatticeIndex) -> Point {
        [
            self.origin[0] + li[0] as f64 * self.h,
            if self.dim == 2 {
                self.origin[1] + li[1] as f64 * self.h
            } else {
                0.0
            },
        ]
    }

    pub fn coord(&self, idx: usize) -> Point {
        self.lattice_coord(self.lattice_index(idx))
    }

    /// Euclidean distance between two lattice points, computed from the
    /// integer offset so that it does not depend on the origin.
    pub fn lattice_distance(&self, a: LatticeIndex, b: LatticeIndex) -> f64 {
        let dx = (a[0] - b[0]) as f64;
        let dy = (a[1] - b[1]) as f64;
        (dx * dx + dy * dy).sqrt() * self.h
    }

    pub fn distance(&self, x: Point, y: Point) -> f64 {
        let dx = x[0] - y[0];
        let dy = if self.dim == 2 { x[1] - y[1] } else { 0.0 };
        (dx * dx + dy * dy).sqrt()
    }

    /// Lattice point nearest to `x` (not necessarily inside the box).
    pub fn nearest_lattice(&self, x: Point) -> LatticeIndex {
        let ix = ((x[0] - self.origin[0]) / self.h).round() as i64;
        let iy = if self.dim == 2 {
            ((x[1] - self.origin[1]) / self.h).round() as i64
        } else {
            0
        };
        [ix, iy]
    }

    /// All lattice points (inside or beyond the box) within a closed ball,
    /// in ascending (iy, ix) order.
    pub fn lattice_points_in_ball(&self, center: Point, radius: f64) -> Vec<LatticeIndex> {
        let tol = 1e-12 * radius.max(self.h);
        let lo_x = ((center[0] - radius - self.origin[0]) / self.h).floor() as i64 - 1;
        let hi_x = ((center[0] + radius - self.origin[0]) / self.h).ceil() as i64 + 1;
        let (lo_y, hi_y) = if self.dim == 2 {
            (
                ((center[1] - radius - self.origin[1]) / self.h).floor() as i64 - 1,
                ((center[1] + radius - self.origin[1]) / self.h).ceil() as i64 + 1,
            )
        } else {
            (0, 0)
        };
        let mut out = Vec::new();
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                let li = [ix, iy];
                if self.distance(self.lattice_coord(li), center) <= radius + tol {
                    out.push(li);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_guards() {
        assert!(Exponents::new(0.5, 2.0).is_err());
        assert!(Exponents::new(1.0, 3.0).is_err());
        assert!(Exponents::new(0.0, 3.0).is_err());
        assert!(Exponents::new(0.5, 3.0).is_ok());
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new_2d([-1.0, -2.0], 0.25, 5, 4, 10.0).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.flat_index(g.lattice_index(idx)), Some(idx));
        }
        assert_eq!(g.coord(6), [-0.75, -1.75]);
        assert_eq!(g.flat_index([5, 0]), None);
    }

    #[test]
    fn grid_rejects_short_truncation() {
        assert!(Grid::new_1d(0.0, 0.1, 11, 0.5).is_err());
        assert!(Grid::new_1d(0.0, 0.1, 11, 1.0).is_ok());
    }

    #[test]
    fn ball_enumeration_1d() {
        let g = Grid::new_1d(0.0, 1.0, 5, 10.0).unwrap();
        let pts = g.lattice_points_in_ball([2.0, 0.0], 2.0);
        let xs: Vec<i64> = pts.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0, 1, 2, 3, 4]);
    }
}

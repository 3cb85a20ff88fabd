//! Collocation discretization of the nonlocal operator
//!
//! ```text
//! (𝓛u)_i = Σ_{j≠i} φ_p(u_i − u_j) k(x_i, x_j, t) hⁿ / |x_i − x_j|^{n+sp}
//!          + φ_p(u_i − g_∞) k_∞ |Sⁿ⁻¹| R_∞^{−sp} / (sp)
//! ```
//!
//! The sum runs over every lattice point within R_∞ of x_i: box nodes carry
//! the field values, points beyond the box take the exterior rule, and the
//! region |y − x_i| > R_∞ is integrated analytically assuming the far value
//! g_∞. The singular cell j = i is dropped (principal-value rule).

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Exponents, Field, Grid, KernelSpec, LatticeIndex, Point};
use crate::error::{Error, Result};

/// φ_p(τ) = |τ|^{p−2}τ.
#[inline]
pub fn phi_p(tau: f64, p: f64) -> f64 {
    if p == 3.0 {
        tau.abs() * tau
    } else {
        tau.abs().powf(p - 2.0) * tau
    }
}

/// φ_p′(τ) = (p − 1)|τ|^{p−2}.
#[inline]
pub fn phi_p_prime(tau: f64, p: f64) -> f64 {
    if p == 3.0 {
        2.0 * tau.abs()
    } else {
        (p - 1.0) * tau.abs().powf(p - 2.0)
    }
}

#[inline]
fn abs_pow(tau: f64, p: f64) -> f64 {
    if p == 3.0 {
        let a = tau.abs();
        a * a * a
    } else {
        tau.abs().powf(p)
    }
}

/// Surface measure of the unit sphere Sⁿ⁻¹ for n ∈ {1, 2}.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI,
    }
}

/// Whether lattice points beyond the box and the analytic far field are
/// included in the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarField {
    Enabled,
    Disabled,
}

/// Per-node exterior contributions, merged by value: node i sees
/// Σ φ_p(v_i − value)·weight over its entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorLoad {
    offsets: Vec<usize>,
    entries: Vec<(f64, f64)>,
}

impl ExteriorLoad {
    pub fn node(&self, i: usize) -> &[(f64, f64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn nodes(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// The operator restricted to the unknown (Ω) nodes, with the pairwise
/// weights k·hⁿ/|x_i − x_j|^{n+sp} assembled once per kernel time.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    grid: Grid,
    exps: Exponents,
    kernel: KernelSpec,
    far: FarField,
    time: f64,
    interior: Vec<usize>,
    exterior_box: Vec<usize>,
    weights: Vec<f64>,
}

impl LatticeOperator {
    pub fn assemble(
        grid: &Grid,
        mask: &[bool],
        kernel: KernelSpec,
        exps: Exponents,
        far: FarField,
        time: f64,
    ) -> Result<Self> {
        exps.validate()?;
        if mask.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "mask has {} entries for {} nodes",
                mask.len(),
                grid.len()
            )));
        }
        let interior: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
        let exterior_box: Vec<usize> = (0..grid.len()).filter(|&i| !mask[i]).collect();
        let n = interior.len();
        let hn = grid.cell_volume();
        let power = grid.dim() as f64 + exps.sp();
        let coords: Vec<Point> = interior.iter().map(|&i| grid.coord(i)).collect();
        let lattice: Vec<LatticeIndex> = interior.iter().map(|&i| grid.lattice_index(i)).collect();
        // Upper triangle, mirrored below so the weights are exactly symmetric.
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                ((a + 1)..n)
                    .map(|b| {
                        let d = grid.lattice_distance(lattice[a], lattice[b]);
                        kernel.eval(coords[a], coords[b], time) * hn / d.powf(power)
                    })
                    .collect()
            })
            .collect();
        let mut weights = vec![0.0; n * n];
        for (a, row) in rows.iter().enumerate() {
            for (off, &w) in row.iter().enumerate() {
                let b = a + 1 + off;
                weights[a * n + b] = w;
                weights[b * n + a] = w;
            }
        }
        Ok(Self {
            grid: grid.clone(),
            exps,
            kernel,
            far,
            time,
            interior,
            exterior_box,
            weights,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn exponents(&self) -> Exponents {
        self.exps
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn far_field(&self) -> FarField {
        self.far
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Box indices of the unknown nodes, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.interior.len() + b]
    }

    /// Collects the contributions of pinned box nodes, lattice points beyond
    /// the box, and the analytic far field for every unknown node.
    pub fn exterior_load<B, X>(&self, box_value: B, beyond: X, far_value: f64) -> ExteriorLoad
    where
        B: Fn(usize) -> f64 + Sync,
        X: Fn(Point) -> f64 + Sync,
    {
        let grid = &self.grid;
        let hn = grid.cell_volume();
        let dim = grid.dim();
        let sp = self.exps.sp();
        let power = dim as f64 + sp;
        let r_inf = grid.r_inf();
        let reach = (r_inf / grid.h() * (1.0 + 1e-12)).floor() as i64;
        let far_mass = sphere_measure(dim) * r_inf.powf(-sp) / sp;
        let t = self.time;
        let per_node: Vec<Vec<(f64, f64)>> = self
            .interior
            .par_iter()
            .map(|&i| {
                let li = grid.lattice_index(i);
                let xi = grid.coord(i);
                let mut list: Vec<(f64, f64)> = Vec::new();
                for &j in &self.exterior_box {
                    let lj = grid.lattice_index(j);
                    let d = grid.lattice_distance(li, lj);
                    let w = self.kernel.eval(xi, grid.coord(j), t) * hn / d.powf(power);
                    list.push((box_value(j), w));
                }
                if self.far == FarField::Enabled {
                    let (ylo, yhi) = if dim == 2 { (-reach, reach) } else { (0, 0) };
                    for dy in ylo..=yhi {
                        for dx in -reach..=reach {
                            let lj = [li[0] + dx, li[1] + dy];
                            if grid.in_box(lj) {
                                continue;
                            }
                            let d = grid.lattice_distance(li, lj);
                            if d > r_inf * (1.0 + 1e-12) {
                                continue;
                            }
                            let xj = grid.lattice_coord(lj);
                            let w = self.kernel.eval(xi, xj, t) * hn / d.powf(power);
                            list.push((beyond(xj), w));
                        }
                    }
                    let x_far = [xi[0] + r_inf, xi[1]];
                    list.push((far_value, self.kernel.eval(xi, x_far, t) * far_mass));
                }
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(list.len().min(16));
                for (v, w) in list {
                    match merged.last_mut() {
                        Some(last) if last.0.to_bits() == v.to_bits() => last.1 += w,
                        _ => merged.push((v, w)),
                    }
                }
                merged
            })
            .collect();
        let mut offsets = Vec::with_capacity(per_node.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for list in per_node {
            entries.extend(list);
            offsets.push(entries.len());
        }
        ExteriorLoad { offsets, entries }
    }

    /// Load for a full field: box nodes outside Ω use the field's own values.
    pub fn load_from_field(&self, field: &Field) -> ExteriorLoad {
        self.exterior_load(
            |j| field.values[j],
            |x| field.exterior.value(x),
            field.exterior.far_value(),
        )
    }

    /// (𝓛v)_i at every unknown node.
    pub fn apply(&self, v: &[f64], load: &ExteriorLoad) -> Vec<f64> {
        let n = self.interior.len();
        let p = self.exps.p;
        (0..n)
            .into_par_iter()
            .map(|a| {
                let va = v[a];
                let row = &self.weights[a * n..(a + 1) * n];
                let mut acc = 0.0;
                for (b, &w) in row.iter().enumerate() {
                    if b != a {
                        acc += phi_p(va - v[b], p) * w;
                    }
                }
                for &(g, w) in load.node(a) {
                    acc += phi_p(va - g, p) * w;
                }
                acc
            })
            .collect()
    }

    /// E(v) = ½ΣΣ|v_i − v_j|^p W_ij/p + Σ_i Σ_ext |v_i − g|^p w/p, whose
    /// gradient is 𝓛v.
    pub fn energy(&self, v: &[f64], load: &ExteriorLoad) -> f64 {
        let n = self.interior.len();
        let p = self.exps.p;
        let parts: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|a| {
                let va = v[a];
                let row = &self.weights[a * n..(a + 1) * n];
                let mut inner = 0.0;
                for (b, &w) in row.iter().enumerate().skip(a + 1) {
                    inner += abs_pow(va - v[b], p) * w;
                }
                let mut outer = 0.0;
                for &(g, w) in load.node(a) {
                    outer += abs_pow(va - g, p) * w;
                }
                (inner + outer) / p
            })
            .collect();
        parts.iter().sum()
    }

    /// Jacobian ∂(𝓛v)/∂v, symmetric with nonnegative row sums.
    pub fn jacobian(&self, v: &[f64], load: &ExteriorLoad) -> DMatrix<f64> {
        let n = self.interior.len();
        let p = self.exps.p;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let va = v[a];
                let row = &self.weights[a * n..(a + 1) * n];
                let mut out = vec![0.0; n];
                let mut diag = 0.0;
                for (b, &w) in row.iter().enumerate() {
                    if b != a {
                        let d = phi_p_prime(va - v[b], p) * w;
                        out[b] = -d;
                        diag += d;
                    }
                }
                for &(g, w) in load.node(a) {
                    diag += phi_p_prime(va - g, p) * w;
                }
                out[a] = diag;
                out
            })
            .collect();
        DMatrix::from_fn(n, n, |a, b| rows[a][b])
    }
}

/// (𝓛u)(x_i) at every node with `mask[i]`, in ascending node order.
pub fn apply_operator(
    grid: &Grid,
    field: &Field,
    mask: &[bool],
    t: f64,
    kernel: KernelSpec,
    exps: Exponents,
    far: FarField,
) -> Result<Vec<f64>> {
    let op = LatticeOperator::assemble(grid, mask, kernel, exps, far, t)?;
    let load = op.load_from_field(field);
    let v: Vec<f64> = op.interior().iter().map(|&i| field.values[i]).collect();
    Ok(op.apply(&v, &load))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::lattice::{ConstantKernel, ExteriorRule};

    fn unit() -> KernelSpec {
        Arc::new(ConstantKernel::unit())
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = Grid::new_1d(-1.0, 0.125, 17, 4.0).unwrap();
        let mask: Vec<bool> = (0..17).map(|i| (4..13).contains(&i)).collect();
        let field = Field::constant(17, 7.0);
        let exps = Exponents::new(0.5, 3.0).unwrap();
        let out = apply_operator(&grid, &field, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn five_point_example() {
        // Direct summation: 2·φ₃(1)·1 + 2·φ₃(1)·2^{−2.5}.
        let grid = Grid::new_1d(0.0, 1.0, 5, 4.0).unwrap();
        let mask = vec![false, false, true, false, false];
        let field = Field::new(vec![0.0, 0.0, 1.0, 0.0, 0.0], ExteriorRule::Zero);
        let exps = Exponents::new(0.5, 3.0).unwrap();
        let out = apply_operator(&grid, &field, &mask, 0.0, unit(), exps, FarField::Disabled).unwrap();
        let expected = 2.0 + 2.0 * 2f64.powf(-2.5);
        assert!((out[0] - expected).abs() < 1e-14);
        assert!((out[0] - 2.353_553).abs() < 1e-6);
    }

    #[test]
    fn invalid_exponent_is_rejected() {
        let grid = Grid::new_1d(0.0, 1.0, 5, 4.0).unwrap();
        let field = Field::constant(5, 0.0);
        let err = apply_operator(
            &grid,
            &field,
            &[true; 5],
            0.0,
            unit(),
            Exponents { s: 0.5, p: 2.0 },
            FarField::Disabled,
        );
        assert!(matches!(err, Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn odd_field_vanishes_at_center() {
        let grid = Grid::new_1d(-1.0, 0.125, 17, 2.0).unwrap();
        let values: Vec<f64> = (0..17)
            .map(|i| grid.coord(i)[0].powi(3) - 0.3 * grid.coord(i)[0])
            .collect();
        let field = Field::new(values, ExteriorRule::Zero);
        let mut mask = vec![false; 17];
        mask[8] = true;
        let exps = Exponents::new(0.4, 3.5).unwrap();
        let out = apply_operator(&grid, &field, &mask, 0.0, unit(), exps, FarField::Disabled).unwrap();
        assert!(out[0].abs() < 1e-14, "{}", out[0]);
    }

    #[test]
    fn energy_gradient_is_the_operator() {
        let grid = Grid::new_2d([0.0, 0.0], 0.25, 5, 5, 2.0).unwrap();
        let mask: Vec<bool> = (0..25)
            .map(|i| {
                let li = grid.lattice_index(i);
                (1..4).contains(&li[0]) && (1..4).contains(&li[1])
            })
            .collect();
        let exps = Exponents::new(0.6, 2.7).unwrap();
        let op = LatticeOperator::assemble(&grid, &mask, unit(), exps, FarField::Enabled, 0.0).unwrap();
        let load = op.exterior_load(|j| 0.1 * j as f64, |x| x[0] - x[1], 0.2);
        let v: Vec<f64> = (0..op.unknowns()).map(|a| (a as f64 * 0.7).sin()).collect();
        let grad = op.apply(&v, &load);
        let h = 1e-6;
        for a in 0..v.len() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[a] += h;
            vm[a] -= h;
            let fd = (op.energy(&vp, &load) - op.energy(&vm, &load)) / (2.0 * h);
            assert!(
                (fd - grad[a]).abs() <= 1e-6 * grad[a].abs().max(1.0),
                "{a}: {fd} vs {}",
                grad[a]
            );
        }
    }
}

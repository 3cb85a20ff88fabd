use super::{sphere_measure, Exponents, Field, Grid, LatticeIndex, Point};
use crate::error::{Error, Result};

/// A field sampled at one time level.
#[derive(Debug, Clone, Copy)]
pub struct TimeSlice<'a> {
    pub t: f64,
    pub field: &'a Field,
}

/// Cell weights ∫_{cell ∩ {ρ ≤ |y−x₀| ≤ R_∞}} |x₀ − y|^{−n−sp} dy.
fn annulus_weights(grid: &Grid, x0: Point, rho: f64, sp: f64) -> Vec<(LatticeIndex, f64)> {
    let h = grid.h();
    let r_inf = grid.r_inf();
    let origin = grid.origin();
    let mut out = Vec::new();
    if grid.dim() == 1 {
        // Exact cell integrals of |y|^{−1−sp} on each side of x₀.
        let prim = |d: f64| d.powf(-sp) / sp;
        let lo = ((x0[0] - r_inf - origin[0]) / h).floor() as i64 - 1;
        let hi = ((x0[0] + r_inf - origin[0]) / h).ceil() as i64 + 1;
        for i in lo..=hi {
            let c = origin[0] + i as f64 * h;
            let (a, b) = (c - 0.5 * h, c + 0.5 * h);
            let mut w = 0.0;
            // right side: distances in [max(a−x₀, ρ), min(b−x₀, R_∞)]
            let (da, db) = ((a - x0[0]).max(rho), (b - x0[0]).min(r_inf));
            if db > da {
                w += prim(da) - prim(db);
            }
            // left side: distances in [max(x₀−b, ρ), min(x₀−a, R_∞)]
            let (da, db) = ((x0[0] - b).max(rho), (x0[0] - a).min(r_inf));
            if db > da {
                w += prim(da) - prim(db);
            }
            if w > 0.0 {
                out.push(([i, 0], w));
            }
        }
    } else {
        let power = 2.0 + sp;
        let span = |c: f64, o: f64| {
            (
                ((c - r_inf - o) / h).floor() as i64 - 1,
                ((c + r_inf - o) / h).ceil() as i64 + 1,
            )
        };
        let (xlo, xhi) = span(x0[0], origin[0]);
        let (ylo, yhi) = span(x0[1], origin[1]);
        let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
        for iy in ylo..=yhi {
            for ix in xlo..=xhi {
                let c = grid.lattice_coord([ix, iy]);
                let d = grid.distance(c, x0);
                if d + half_diag < rho || d - half_diag > r_inf {
                    continue;
                }
                let boundary = (d - rho).abs() <= half_diag || (d - r_inf).abs() <= half_diag;
                let q = if boundary { 16 } else { 4 };
                let sub = h / q as f64;
                let mut w = 0.0;
                for sy in 0..q {
                    for sx in 0..q {
                        let y = [
                            c[0] - 0.5 * h + (sx as f64 + 0.5) * sub,
                            c[1] - 0.5 * h + (sy as f64 + 0.5) * sub,
                        ];
                        let r = grid.distance(y, x0);
                        if r >= rho && r <= r_inf {
                            w += sub * sub / r.powf(power);
                        }
                    }
                }
                if w > 0.0 {
                    out.push(([ix, iy], w));
                }
            }
        }
    }
    out
}

/// Tail(f; z₀, ρ) = sup_t (ρ^{sp} ∫_{ℝⁿ∖B_ρ(x₀)} |f|^{p−1}/|x₀ − y|^{n+sp} dy)^{1/(p−1)}
/// over the slices whose time lies in the closed `window`.
///
/// `transform` is applied pointwise to the field (e.g. u ↦ (u − μ)₊) before
/// integration, including the exterior continuation and the far value.
pub fn tail<F>(
    grid: &Grid,
    slices: &[TimeSlice<'_>],
    x0: Point,
    rho: f64,
    window: (f64, f64),
    exps: Exponents,
    transform: F,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    exps.validate()?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParams(format!("tail radius must be positive, got {rho}")));
    }
    let tol = 1e-12 * (1.0 + window.0.abs().max(window.1.abs()));
    let active: Vec<&TimeSlice<'_>> = slices
        .iter()
        .filter(|s| s.t >= window.0 - tol && s.t <= window.1 + tol)
        .collect();
    if active.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let sp = exps.sp();
    let q = exps.p - 1.0;
    let weights = annulus_weights(grid, x0, rho, sp);
    let far_mass = sphere_measure(grid.dim()) * grid.r_inf().powf(-sp) / sp;
    let mut best: f64 = 0.0;
    for slice in active {
        let field = slice.field;
        let mut integral = 0.0;
        for &(li, w) in &weights {
            let raw = match grid.flat_index(li) {
                Some(idx) => field.values[idx],
                None => field.exterior.value(grid.lattice_coord(li)),
            };
            let f = transform(raw).abs();
            if f > 0.0 {
                integral += f.powf(q) * w;
            }
        }
        let far = transform(field.exterior.far_value()).abs();
        if far > 0.0 {
            integral += far.powf(q) * far_mass;
        }
        best = best.max((rho.powf(sp) * integral).powf(1.0 / q));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ExteriorRule;

    fn ones(grid: &Grid) -> Field {
        Field::new(vec![1.0; grid.len()], ExteriorRule::Constant(1.0))
    }

    #[test]
    fn zero_field_has_zero_tail() {
        let grid = Grid::new_1d(-1.0, 1.0 / 64.0, 129, 50.0).unwrap();
        let f = Field::new(vec![0.0; grid.len()], ExteriorRule::Zero);
        let s = [TimeSlice { t: 0.0, field: &f }];
        let v = tail(
            &grid,
            &s,
            [0.0, 0.0],
            0.5,
            (0.0, 0.0),
            Exponents::new(0.5, 3.0).unwrap(),
            |u| u,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn unit_field_matches_closed_form_1d() {
        // ∫_{|y|>ρ} |y|^{−1−sp} dy = 2ρ^{−sp}/(sp)  ⇒  Tail = (2/(sp))^{1/(p−1)}
        let grid = Grid::new_1d(-1.0, 1.0 / 32.0, 65, 20.0).unwrap();
        let f = ones(&grid);
        let s = [TimeSlice { t: 0.0, field: &f }];
        for rho in [0.25, 0.5, 0.8] {
            let v = tail(
                &grid,
                &s,
                [0.1, 0.0],
                rho,
                (0.0, 0.0),
                Exponents::new(0.5, 3.0).unwrap(),
                |u| u,
            )
            .unwrap();
            assert!((v - (4.0f64 / 3.0).sqrt()).abs() < 1e-12, "rho={rho} v={v}");
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let grid = Grid::new_1d(-1.0, 0.25, 9, 2.0).unwrap();
        let f = ones(&grid);
        let s = [TimeSlice { t: 1.0, field: &f }];
        let r = tail(
            &grid,
            &s,
            [0.0, 0.0],
            0.5,
            (0.0, 0.5),
            Exponents::new(0.5, 3.0).unwrap(),
            |u| u,
        );
        assert!(matches!(r, Err(Error::EmptyWindow)));
    }
}

use serde::Serialize;

use super::problem::{normalize, LatticeProblem, SolverConfig};
use super::trajectory::{solve, Trajectory};
use crate::analysis::Cylinder;
use crate::enthalpy::Truncation;
use crate::error::{Error, Result};
use crate::lattice::{sphere_measure, LatticeOperator, Point};

/// Outcome of the discrete maximum principle audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    /// sup |u| over the Ω nodes and all stored times.
    pub sup_u: f64,
    /// sup |g| over the exterior samples, the far value and the initial slice.
    pub sup_data: f64,
    /// max over time of (sup_Ω |u(·, t)| − sup_data)₊.
    pub defect: f64,
    /// Index of the slice realizing the defect.
    pub worst_slice: usize,
}

impl MaxPrincipleReport {
    pub fn passed(&self, newton_tol: f64) -> bool {
        self.defect <= 10.0 * newton_tol
    }
}

/// Compares sup |u| with the sup of every datum the scheme sees: the initial
/// slice, the pinned box nodes, lattice points beyond the box within R_∞ and
/// the far value, at every stored time.
pub fn max_principle_check(traj: &Trajectory) -> MaxPrincipleReport {
    let grid = &traj.grid;
    let mask = &traj.omega_mask;
    let mut sup_data = traj.exterior.far_value().abs();
    if let Some(first) = traj.fields.first() {
        sup_data = first.iter().fold(sup_data, |m, v| m.max(v.abs()));
    }
    // lattice points beyond the box that some Ω node can reach
    let reach = (grid.r_inf() / grid.h()).floor() as i64;
    let shape = grid.shape();
    let (ylo, yhi) = if grid.dim() == 2 {
        (-reach, shape[1] as i64 - 1 + reach)
    } else {
        (0, 0)
    };
    let mut beyond = Vec::new();
    for iy in ylo..=yhi {
        for ix in -reach..=(shape[0] as i64 - 1 + reach) {
            if !grid.in_box([ix, iy]) {
                beyond.push(grid.lattice_coord([ix, iy]));
            }
        }
    }
    for (m, values) in traj.fields.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            if !mask[i] {
                sup_data = sup_data.max(v.abs());
            }
        }
        if traj.far_field == crate::lattice::FarField::Enabled {
            let t = traj.times[m];
            for &x in &beyond {
                sup_data = sup_data.max(traj.exterior.eval(x, t).abs());
            }
        }
    }
    let mut sup_u: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut worst_slice = 0;
    for (m, values) in traj.fields.iter().enumerate() {
        let s = values
            .iter()
            .zip(mask.iter())
            .filter(|(_, &inside)| inside)
            .fold(0.0f64, |acc, (v, _)| acc.max(v.abs()));
        sup_u = sup_u.max(s);
        let d = (s - sup_data).max(0.0);
        if d > defect {
            defect = d;
            worst_slice = m;
        }
    }
    MaxPrincipleReport {
        sup_u,
        sup_data,
        defect,
        worst_slice,
    }
}

/// max over shared samples of (lower − upper)₊; zero means the pair is
/// ordered nodewise.
pub fn comparison_defect(lower: &Trajectory, upper: &Trajectory) -> Result<f64> {
    if lower.grid != upper.grid || lower.times.len() != upper.times.len() {
        return Err(Error::InvalidParams(
            "trajectories must share grid and time samples".into(),
        ));
    }
    let mut defect: f64 = 0.0;
    for (a, b) in lower.fields.iter().zip(&upper.fields) {
        for (x, y) in a.iter().zip(b) {
            defect = defect.max(x - y);
        }
    }
    Ok(defect)
}

/// Solves `normalize(problem, m, (0, 0))` and returns the sup distance between
/// m·ū and the solution `reference` of the original problem.
pub fn normalization_defect(
    problem: &LatticeProblem,
    reference: &Trajectory,
    m: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let scaled = solve(&normalize(problem, m, ([0.0, 0.0], 0.0))?, config)?;
    if scaled.times.len() != reference.times.len() {
        return Err(Error::InvalidParams(
            "normalized run stored a different number of slices".into(),
        ));
    }
    let mut d: f64 = 0.0;
    for (a, b) in scaled.scaled_values(m).iter().zip(&reference.fields) {
        for (x, y) in a.iter().zip(b) {
            d = d.max((x - y).abs());
        }
    }
    Ok(d)
}

/// Discrete weak-form residual
///
/// ```text
/// W = −Σ_m Σ_i b(u^{m+1}_i)(φ^{m+1}_i − φ^m_i) hⁿ + [Σ_i b(u_i)φ_i hⁿ]_{t_0}^{t_M}
///     + Σ_m Δt_m D(u^{m+1}, φ^{m+1}),
/// D(u, φ) = ½ Σ_{i≠j} φ_p(u_i − u_j)(φ_i − φ_j) W_ij hⁿ + Σ_i Σ_ext φ_p(u_i − g)φ_i w hⁿ,
/// ```
///
/// returned in absolute value. The time term uses the right-endpoint rule, so
/// the scheme leaves an O(Δt) consistency defect rather than an exact zero.
pub fn weak_residual<F>(traj: &Trajectory, testfn: F) -> Result<f64>
where
    F: Fn(Point, f64) -> f64,
{
    let grid = &traj.grid;
    let mask = &traj.omega_mask;
    let hn = grid.cell_volume();
    let p = traj.exps.p;
    let enthalpy = &traj.enthalpy;
    if traj.len() < 2 {
        return Ok(0.0);
    }
    let phi: Vec<Vec<f64>> = traj
        .times
        .iter()
        .map(|&t| (0..grid.len()).map(|i| testfn(grid.coord(i), t)).collect())
        .collect();
    for row in &phi {
        for (i, v) in row.iter().enumerate() {
            if !mask[i] && *v != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "test function is nonzero at exterior node {i}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParams("test function is not finite".into()));
            }
        }
    }
    let pairing = |m: usize| -> f64 {
        traj.fields[m]
            .iter()
            .zip(&phi[m])
            .zip(mask.iter())
            .filter(|(_, &inside)| inside)
            .map(|((&u, &f), _)| enthalpy.b(u) * f * hn)
            .sum()
    };
    let last = traj.len() - 1;
    let mut total = pairing(last) - pairing(0);
    let mut op: Option<LatticeOperator> = None;
    for m in 0..last {
        let t_next = traj.times[m + 1];
        let dt = t_next - traj.times[m];
        let u = &traj.fields[m + 1];
        let time_term: f64 = (0..grid.len())
            .filter(|&i| mask[i])
            .map(|i| enthalpy.b(u[i]) * (phi[m + 1][i] - phi[m][i]) * hn)
            .sum();
        total -= time_term;
        if phi[m + 1].iter().all(|&v| v == 0.0) {
            continue;
        }
        let stale = match &op {
            Some(o) => !traj.kernel.time_independent() && o.time() != t_next,
            None => true,
        };
        if stale {
            op = Some(LatticeOperator::assemble(
                grid,
                mask,
                traj.kernel.clone(),
                traj.exps,
                traj.far_field,
                t_next,
            )?);
        }
        let o = op.as_ref().expect("assembled");
        let load = o.load_from_field(&traj.field(m + 1));
        let idx = o.interior();
        let v: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
        let f: Vec<f64> = idx.iter().map(|&i| phi[m + 1][i]).collect();
        let n = idx.len();
        let mut d = 0.0;
        for a in 0..n {
            let mut pair = 0.0;
            for b in 0..n {
                if a != b {
                    pair += crate::lattice::phi_p(v[a] - v[b], p) * (f[a] - f[b]) * o.weight(a, b);
                }
            }
            let mut ext = 0.0;
            for &(g, w) in load.node(a) {
                ext += crate::lattice::phi_p(v[a] - g, p) * w;
            }
            d += (0.5 * pair + ext * f[a]) * hn;
        }
        total += dt * d;
    }
    Ok(total.abs())
}

/// Nonnegative radial cutoff: 1 on B_inner, cos² taper to 0 at `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialCutoff {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
}

impl RadialCutoff {
    pub fn new(center: Point, inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner) {
            return Err(Error::InvalidParams(format!(
                "cutoff radii need 0 ≤ inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(Self { center, inner, outer })
    }

    fn phase(&self, d: f64) -> f64 {
        std::f64::consts::FRAC_PI_2 * (d - self.inner) / (self.outer - self.inner)
    }

    pub fn value(&self, d: f64) -> f64 {
        if d <= self.inner {
            1.0
        } else if d >= self.outer {
            0.0
        } else {
            self.phase(d).cos().powi(2)
        }
    }

    /// |∇φ| at distance d from the center.
    pub fn gradient_norm(&self, d: f64) -> f64 {
        if d <= self.inner || d >= self.outer {
            0.0
        } else {
            (2.0 * self.phase(d)).sin().abs() * std::f64::consts::FRAC_PI_2 / (self.outer - self.inner)
        }
    }
}

/// Discrete sides of the truncated Caccioppoli inequality on a cylinder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub level: f64,
    pub sign: Truncation,
    /// sup_t Σ φ^p [(u−k)_±² ± ∫_k^u β′_ε(ξ)(ξ−k)_± dξ] hⁿ.
    pub sup_energy: f64,
    /// ∫ Σ Σ_{B_R} |(w φ)(x) − (w φ)(y)|^p K/|x−y|^{n+sp}.
    pub seminorm: f64,
    /// ∫ Σ Σ_{B_R} (u−k)_∓^{p−1}(y) (w φ^p)(x) K/|x−y|^{n+sp}.
    pub mixed: f64,
    /// R^{p(1−s)} ∫ Σ w^p |∇φ|^p hⁿ.
    pub gradient_term: f64,
    /// The cutoff is time-independent, so the ∂ₜφ^p term is 0.
    pub time_term: f64,
    /// ∫ Σ_{B_R} Σ_{y ∉ B_R} w^{p−1}(y) (w φ^p)(x) K/|x−y|^{n+sp}, including the far field.
    pub exterior_term: f64,
    /// Σ φ^p [(u−k)_±² ± latent] hⁿ on the initial slice of the cylinder.
    pub initial_term: f64,
    /// Sum of |latent| contributions over all terms that carry one.
    pub latent_total: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs, defined as 0 when both vanish.
    pub ratio: f64,
}

impl CaccioppoliReport {
    pub fn passed(&self, c_audit: f64) -> bool {
        self.ratio <= c_audit
    }
}

/// Evaluates both sides of the truncated energy estimate for (u − k)_± on
/// the cylinder B_R(x₀) × (t₀ − θR^{sp}, t₀] with a radial cutoff supported in
/// B_R. Constants are taken as 1, so the ratio is an empirical constant.
pub fn caccioppoli_audit(
    traj: &Trajectory,
    level: f64,
    sign: Truncation,
    cutoff: &RadialCutoff,
    cyl: &Cylinder,
) -> Result<CaccioppoliReport> {
    let grid = &traj.grid;
    let exps = traj.exps;
    let sp = exps.sp();
    let p = exps.p;
    let r = cyl.rho;
    if cutoff.outer > r * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "cutoff radius {} exceeds the cylinder radius {r}",
            cutoff.outer
        )));
    }
    let enthalpy = &traj.enthalpy;
    let hn = grid.cell_volume();
    let power = grid.dim() as f64 + sp;
    let ball = cyl.ball_nodes(grid);
    let slices = cyl.slices(traj, sp);
    if ball.is_empty() || slices.is_empty() {
        return Err(Error::EmptyCylinder);
    }
    let dist: Vec<f64> = ball
        .iter()
        .map(|&i| grid.distance(grid.coord(i), cutoff.center))
        .collect();
    let phi: Vec<f64> = dist.iter().map(|&d| cutoff.value(d)).collect();
    if phi.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCutoff);
    }
    let grad: Vec<f64> = dist.iter().map(|&d| cutoff.gradient_norm(d)).collect();
    let phi_p: Vec<f64> = phi.iter().map(|v| v.powf(p)).collect();
    let mut latent_total = 0.0;

    let slice_energy = |values: &[f64], latent_total: &mut f64| -> f64 {
        ball.iter()
            .zip(&phi_p)
            .map(|(&i, &fp)| {
                let u = values[i];
                let w = sign.apply(u, level);
                let lat = enthalpy.truncated_latent_energy(u, level, sign);
                *latent_total += lat.abs() * fp * hn;
                fp * (w * w + lat) * hn
            })
            .sum()
    };

    // Initial slice: the latest stored time at or before the window start,
    // else the first slice inside the window.
    let (lo, _) = cyl.time_window(sp);
    let tol = 1e-12 * (1.0 + lo.abs());
    let initial_index = traj.times.iter().rposition(|&t| t <= lo + tol).unwrap_or(slices[0]);
    let initial_term = slice_energy(&traj.fields[initial_index], &mut latent_total);

    let reach = (grid.r_inf() / grid.h() * (1.0 + 1e-12)).floor() as i64;
    let far_mass = sphere_measure(grid.dim()) * grid.r_inf().powf(-sp) / sp;
    let x0 = cyl.x0;
    let mut sup_energy: f64 = 0.0;
    let mut seminorm = 0.0;
    let mut mixed = 0.0;
    let mut gradient_term = 0.0;
    let mut exterior_term = 0.0;
    for &m in &slices {
        if m == 0 {
            continue;
        }
        let t = traj.times[m];
        let dt = t - traj.times[m - 1];
        let values = &traj.fields[m];
        let field = traj.field(m);
        sup_energy = sup_energy.max(slice_energy(values, &mut latent_total));
        let w: Vec<f64> = ball.iter().map(|&i| sign.apply(values[i], level)).collect();
        let w_opp: Vec<f64> = ball.iter().map(|&i| sign.opposite().apply(values[i], level)).collect();
        let lattice: Vec<_> = ball.iter().map(|&i| grid.lattice_index(i)).collect();
        let coords: Vec<Point> = ball.iter().map(|&i| grid.coord(i)).collect();
        let mut semi_t = 0.0;
        let mut mixed_t = 0.0;
        let mut ext_t = 0.0;
        let mut grad_t = 0.0;
        for a in 0..ball.len() {
            grad_t += w[a].powf(p) * grad[a].powf(p) * hn;
            let wa = w[a] * phi[a];
            for b in 0..ball.len() {
                if a == b {
                    continue;
                }
                let d = grid.lattice_distance(lattice[a], lattice[b]);
                let k = traj.kernel.eval(coords[a], coords[b], t) * hn * hn / d.powf(power);
                semi_t += (wa - w[b] * phi[b]).abs().powf(p) * k;
                if w[a] > 0.0 && w_opp[b] > 0.0 {
                    mixed_t += w_opp[b].powf(p - 1.0) * w[a] * phi_p[a] * k;
                }
            }
            if w[a] == 0.0 || phi_p[a] == 0.0 {
                continue;
            }
            // y outside B_R(x₀): lattice points within R_∞ of x_a, then the far field
            let la = lattice[a];
            let (ylo, yhi) = if grid.dim() == 2 { (-reach, reach) } else { (0, 0) };
            let mut acc = 0.0;
            for dy in ylo..=yhi {
                for dx in -reach..=reach {
                    let lj = [la[0] + dx, la[1] + dy];
                    let d = grid.lattice_distance(la, lj);
                    if d == 0.0 || d > grid.r_inf() * (1.0 + 1e-12) {
                        continue;
                    }
                    let xj = grid.lattice_coord(lj);
                    if grid.distance(xj, x0) <= r * (1.0 + 1e-12) {
                        continue;
                    }
                    let val = match grid.flat_index(lj) {
                        Some(j) => values[j],
                        None => field.exterior.value(xj),
                    };
                    let wy = sign.apply(val, level);
                    if wy > 0.0 {
                        acc += wy.powf(p - 1.0) * traj.kernel.eval(coords[a], xj, t) * hn / d.powf(power);
                    }
                }
            }
            let w_far = sign.apply(field.exterior.far_value(), level);
            if w_far > 0.0 {
                let x_far = [coords[a][0] + grid.r_inf(), coords[a][1]];
                acc += w_far.powf(p - 1.0) * traj.kernel.eval(coords[a], x_far, t) * far_mass;
            }
            ext_t += acc * w[a] * phi_p[a] * hn;
        }
        seminorm += dt * semi_t;
        mixed += dt * mixed_t;
        gradient_term += dt * grad_t;
        exterior_term += dt * ext_t;
    }
    gradient_term *= r.powf(p * (1.0 - exps.s));
    let time_term = 0.0;
    let lhs = sup_energy + seminorm + mixed;
    let rhs = gradient_term + time_term + exterior_term + initial_term;
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    Ok(CaccioppoliReport {
        level,
        sign,
        sup_energy,
        seminorm,
        mixed,
        gradient_term,
        time_term,
        exterior_term,
        initial_term,
        latent_total,
        lhs,
        rhs,
        ratio,
    })
}

//! Intrinsic cylinders, oscillation and level-set diagnostics, the iteration
//! sequences with their algebraic lemmas, and modulus fitting.

mod modulus;
mod sequences;

pub use modulus::{
    cylinder_ladder, fit_log_modulus, fit_power_envelope, ladder_oscillations, sequence_table_csv,
    sequence_tail_report, ModulusModel, ModulusReport, PowerEnvelope, SequenceTailReport, TailRow,
};
pub use sequences::{
    boundary_sequences, geometric_cases, geometric_convergence, initial_sequences, interior_sequences,
    lemma_iter_epsilon, lemma_iter_grid, lemma_iter_verify, BoundaryConstants, GeometricReport, InitialConstants,
    InteriorConstants, IterationParams, LemmaIterVerdict, SequenceKind, SequenceLevel, SequenceTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Grid, Point};
use crate::solver::Trajectory;

/// B_ρ(x₀) × (t₀ − θρ^{sp}, t₀].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub x0: Point,
    pub t0: f64,
    pub rho: f64,
    pub theta: f64,
}

impl Cylinder {
    pub fn new(x0: Point, t0: f64, rho: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "cylinder radius must be positive, got {rho}"
            )));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "cylinder scaling must be positive, got {theta}"
            )));
        }
        Ok(Self { x0, t0, rho, theta })
    }

    pub fn duration(&self, sp: f64) -> f64 {
        self.theta * self.rho.powf(sp)
    }

    pub fn time_window(&self, sp: f64) -> (f64, f64) {
        (self.t0 - self.duration(sp), self.t0)
    }

    /// Half-open membership t ∈ (t₀ − θρ^{sp}, t₀], up to rounding.
    pub fn contains_time(&self, t: f64, sp: f64) -> bool {
        let (lo, hi) = self.time_window(sp);
        let tol = 1e-12 * (1.0 + hi.abs() + (hi - lo));
        t > lo + tol && t <= hi + tol
    }

    pub fn contains_point(&self, grid: &Grid, x: Point) -> bool {
        grid.distance(x, self.x0) <= self.rho * (1.0 + 1e-12)
    }

    /// Box nodes in the closed ball.
    pub fn ball_nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.len())
            .filter(|&i| self.contains_point(grid, grid.coord(i)))
            .collect()
    }

    /// Indices of the stored times inside the time interval.
    pub fn slices(&self, traj: &Trajectory, sp: f64) -> Vec<usize> {
        traj.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| self.contains_time(t, sp))
            .map(|(m, _)| m)
            .collect()
    }
}

fn samples<'a>(traj: &'a Trajectory, cyl: &Cylinder) -> Result<impl Iterator<Item = f64> + 'a> {
    let sp = traj.exps.sp();
    let nodes = cyl.ball_nodes(&traj.grid);
    let slices = cyl.slices(traj, sp);
    if nodes.is_empty() || slices.is_empty() {
        return Err(Error::EmptyCylinder);
    }
    Ok(slices.into_iter().flat_map(move |m| {
        let nodes = nodes.clone();
        nodes.into_iter().map(move |i| traj.fields[m][i])
    }))
}

/// (inf, sup) of the stored samples inside the cylinder.
pub fn extrema(traj: &Trajectory, cyl: &Cylinder) -> Result<(f64, f64)> {
    Ok(samples(traj, cyl)?.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// sup − inf over grid nodes and stored times inside the cylinder.
pub fn oscillation(traj: &Trajectory, cyl: &Cylinder) -> Result<f64> {
    let (lo, hi) = extrema(traj, cyl)?;
    Ok(hi - lo)
}

/// max{sup − inf over every stored sample, 1}, a computable stand-in for ω₀.
pub fn sample_omega0(traj: &Trajectory) -> f64 {
    let (lo, hi) = traj
        .fields
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    (hi - lo).max(1.0)
}

/// Interior scaling θ = (ω/4)^{2−p}.
pub fn intrinsic_theta(omega: f64, p: f64) -> f64 {
    (omega / 4.0).powf(2.0 - p)
}

/// Level-set predicate; a value equal to the level counts as `Below`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelPredicate {
    /// u ≤ ℓ
    Below(f64),
    /// u > ℓ
    Above(f64),
}

impl LevelPredicate {
    pub fn holds(&self, u: f64) -> bool {
        match *self {
            LevelPredicate::Below(l) => u <= l,
            LevelPredicate::Above(l) => u > l,
        }
    }
}

/// Fraction of space-time samples in the cylinder satisfying the predicate.
pub fn level_set_fraction(traj: &Trajectory, cyl: &Cylinder, predicate: LevelPredicate) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for v in samples(traj, cyl)? {
        total += 1;
        if predicate.holds(v) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    /// Lattice point nearest to the requested boundary point.
    pub x0: Point,
    /// (r, |B_r(x₀) ∖ Ω| / |B_r|) by node counting.
    pub fractions: Vec<(f64, f64)>,
    pub min_fraction: f64,
}

impl DensityReport {
    pub fn passed(&self, alpha0: f64) -> bool {
        self.min_fraction >= alpha0
    }
}

/// Exterior thickness at a boundary point: the share of lattice points of the
/// closed ball B_r(x₀) that lie outside Ω. Points beyond the box count as
/// exterior.
pub fn measure_density(grid: &Grid, omega_mask: &[bool], x0: Point, radii: &[f64]) -> Result<DensityReport> {
    if omega_mask.len() != grid.len() {
        return Err(Error::InvalidParams("mask does not match the grid".into()));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParams(
            "radii must be a nonempty list of positive lengths".into(),
        ));
    }
    let center = grid.lattice_coord(grid.nearest_lattice(x0));
    let mut fractions = Vec::with_capacity(radii.len());
    for &r in radii {
        let points = grid.lattice_points_in_ball(center, r);
        let outside = points
            .iter()
            .filter(|&&li| grid.flat_index(li).is_none_or(|i| !omega_mask[i]))
            .count();
        fractions.push((r, outside as f64 / points.len() as f64));
    }
    let min_fraction = fractions.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    Ok(DensityReport {
        x0: center,
        fractions,
        min_fraction,
    })
}

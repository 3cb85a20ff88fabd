use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sequences::SequenceTable;
use super::{extrema, level_set_fraction, oscillation, Cylinder, LevelPredicate};
use crate::error::{Error, Result};
use crate::lattice::io::fmt_f64;
use crate::lattice::{tail, Point, TimeSlice};
use crate::solver::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusModel {
    Interior,
    Lateral,
    Initial,
}

/// Fit of osc(r) ≈ c(1 + ln(ρ₀/r))^{−ς/2} + 4ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub model: ModulusModel,
    /// (r, osc) as measured.
    pub samples: Vec<(f64, f64)>,
    /// Number of samples above the floor 4ε that entered the fit.
    pub used: usize,
    pub c: f64,
    pub varsigma: f64,
    pub epsilon: f64,
    pub rho0: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Least squares of ln(osc − 4ε) on ln(1 + ln(ρ₀/r)): slope −ς̂/2, intercept ln c.
pub fn fit_log_modulus(samples: &[(f64, f64)], epsilon: f64, rho0: f64, model: ModulusModel) -> Result<ModulusReport> {
    if !(rho0 > 0.0) {
        return Err(Error::InvalidParams(format!("ρ₀ must be positive, got {rho0}")));
    }
    if samples.iter().any(|&(r, _)| !(r > 0.0 && r <= rho0 * (1.0 + 1e-12))) {
        return Err(Error::InvalidParams("sample radii must lie in (0, ρ₀]".into()));
    }
    let floor = 4.0 * epsilon;
    let kept: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, o)| o > floor + 1e-12).collect();
    if !samples.is_empty() && kept.is_empty() {
        return Err(Error::NonpositiveExcess { floor });
    }
    let mut radii: Vec<f64> = kept.iter().map(|s| s.0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} distinct radii above the floor, need 3",
            radii.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|&(r, _)| (1.0 + (rho0 / r).ln()).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|&(_, o)| (o - floor).ln()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    Ok(ModulusReport {
        model,
        samples: samples.to_vec(),
        used: kept.len(),
        c: intercept.exp(),
        varsigma: -2.0 * slope,
        epsilon,
        rho0,
        residual,
    })
}

/// ω_i ≤ c(1 + i)^{−ς̂}: ς̂ from least squares of ln ω_i on ln(1 + i), c the
/// smallest constant making the envelope hold at every level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerEnvelope {
    pub exponent: f64,
    pub c_fit: f64,
    pub c: f64,
    pub residual: f64,
}

impl PowerEnvelope {
    pub fn bounds(&self, values: &[f64]) -> bool {
        values
            .iter()
            .enumerate()
            .all(|(i, &w)| w <= self.c * (1.0 + i as f64).powf(-self.exponent) * (1.0 + 1e-12))
    }
}

pub fn fit_power_envelope(values: &[f64]) -> Result<PowerEnvelope> {
    if values.len() < 3 {
        return Err(Error::InsufficientSamples(format!("{} levels, need 3", values.len())));
    }
    if values.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParams("envelope fit needs positive values".into()));
    }
    let xs: Vec<f64> = (0..values.len()).map(|i| (1.0 + i as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|w| w.ln()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    let exponent = -slope;
    let c = values
        .iter()
        .enumerate()
        .map(|(i, &w)| w * (1.0 + i as f64).powf(exponent))
        .fold(0.0, f64::max);
    Ok(PowerEnvelope {
        exponent,
        c_fit: intercept.exp(),
        c,
        residual,
    })
}

/// Nested cylinders Q_{r_k}^{(θ)}(z₀), r_k = ρ₀q^k, k = 0..levels.
pub fn cylinder_ladder(x0: Point, t0: f64, rho0: f64, q: f64, levels: usize, theta: f64) -> Result<Vec<Cylinder>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParams(format!(
            "ladder ratio must lie in (0, 1), got {q}"
        )));
    }
    (0..levels)
        .map(|k| Cylinder::new(x0, t0, rho0 * q.powi(k as i32), theta))
        .collect()
}

/// (r, osc) per ladder rung, evaluated in parallel, returned in ladder order.
pub fn ladder_oscillations(traj: &Trajectory, ladder: &[Cylinder]) -> Result<Vec<(f64, f64)>> {
    ladder
        .par_iter()
        .map(|c| oscillation(traj, c).map(|o| (c.rho, o)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub level: usize,
    pub rho: f64,
    pub omega: f64,
    pub theta: f64,
    /// Oscillation on Q_i, if the cylinder holds samples.
    pub osc: Option<f64>,
    /// max{Tail((u − μ⁺)₊; Q_i), Tail((u − μ⁻)₋; Q_i)}/ω_i.
    pub tail_ratio: Option<f64>,
    /// |{u − μ⁻ ≤ ω_i/4} ∩ Q_i| / |Q_i| over samples.
    pub low_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceTailReport {
    pub x0: Point,
    pub t0: f64,
    pub rows: Vec<TailRow>,
    /// Empirical c₀: the largest tail ratio over the evaluated levels.
    pub max_ratio: f64,
}

/// Tail((u − μ_i^±)_±; Q_i)/ω_i along a sequence table anchored at z₀, with
/// μ_i⁺ = sup_{Q_i} u and μ_i⁻ = μ_i⁺ − ω_i.
pub fn sequence_tail_report(
    traj: &Trajectory,
    x0: Point,
    t0: f64,
    table: &SequenceTable,
) -> Result<SequenceTailReport> {
    let sp = traj.exps.sp();
    let rows: Vec<Result<TailRow>> = table
        .levels
        .par_iter()
        .map(|lvl| {
            let mut row = TailRow {
                level: lvl.level,
                rho: lvl.rho,
                omega: lvl.omega,
                theta: lvl.theta,
                osc: None,
                tail_ratio: None,
                low_fraction: None,
            };
            let cyl = Cylinder::new(x0, t0, lvl.rho, lvl.theta)?;
            let (lo, hi) = match extrema(traj, &cyl) {
                Ok(e) => e,
                Err(Error::EmptyCylinder) => return Ok(row),
                Err(e) => return Err(e),
            };
            row.osc = Some(hi - lo);
            let mu_plus = hi;
            let mu_minus = hi - lvl.omega;
            let slices = cyl.slices(traj, sp);
            let fields: Vec<_> = slices.iter().map(|&m| traj.field(m)).collect();
            let ts: Vec<TimeSlice<'_>> = slices
                .iter()
                .zip(&fields)
                .map(|(&m, f)| TimeSlice {
                    t: traj.times[m],
                    field: f,
                })
                .collect();
            let window = (traj.times[slices[0]], traj.times[*slices.last().expect("nonempty")]);
            let up = tail(&traj.grid, &ts, x0, lvl.rho, window, traj.exps, |u| {
                (u - mu_plus).max(0.0)
            })?;
            let down = tail(&traj.grid, &ts, x0, lvl.rho, window, traj.exps, |u| {
                (mu_minus - u).max(0.0)
            })?;
            row.tail_ratio = Some(up.max(down) / lvl.omega);
            row.low_fraction = Some(level_set_fraction(
                traj,
                &cyl,
                LevelPredicate::Below(mu_minus + lvl.omega / 4.0),
            )?);
            Ok(row)
        })
        .collect();
    let rows: Vec<TailRow> = rows.into_iter().collect::<Result<_>>()?;
    let max_ratio = rows.iter().filter_map(|r| r.tail_ratio).fold(0.0, f64::max);
    Ok(SequenceTailReport {
        x0,
        t0,
        rows,
        max_ratio,
    })
}

/// CSV with columns level, rho, omega, theta, osc, tail_ratio (empty cells
/// where a cylinder holds no samples).
pub fn sequence_table_csv(rows: &[TailRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::from("level,rho,omega,theta,osc,tail_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.level,
            fmt_f64(r.rho),
            fmt_f64(r.omega),
            fmt_f64(r.theta),
            opt(r.osc),
            opt(r.tail_ratio)
        );
    }
    out
}

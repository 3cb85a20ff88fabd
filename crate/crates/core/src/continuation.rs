//! The ε → 0 program: a family of regularized solves, their mutual sup
//! distances, and the computable surrogate of the limit pair (u, v).

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::ModulusReport;
use crate::enthalpy::RegularizedEnthalpy;
use crate::error::{Error, Result};
use crate::solver::{solve, DtPolicy, LatticeProblem, SolverConfig, Trajectory};

/// Default schedule ε = 1/i, i ∈ {5, 10, 20, 40}.
pub const DEFAULT_SCHEDULE: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

#[derive(Debug)]
pub struct FamilyResult {
    pub epsilons: Vec<f64>,
    pub entries: Vec<Result<Trajectory>>,
    /// d_ij = max over shared samples of |u_i − u_j|; `None` where an entry
    /// failed or the samples are not aligned. Empty for a single entry.
    pub distances: Vec<Vec<Option<f64>>>,
}

fn aligned(a: &Trajectory, b: &Trajectory) -> bool {
    a.grid == b.grid && a.times == b.times && a.omega_mask == b.omega_mask
}

fn sup_distance(a: &Trajectory, b: &Trajectory) -> Option<f64> {
    if !aligned(a, b) {
        return None;
    }
    let mut d: f64 = 0.0;
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        for (x, y) in fa.iter().zip(fb) {
            d = d.max((x - y).abs());
        }
    }
    Some(d)
}

impl FamilyResult {
    /// Assembles a family from already computed entries.
    pub fn from_entries(epsilons: Vec<f64>, entries: Vec<Result<Trajectory>>) -> Self {
        let n = entries.len();
        let distances = if n < 2 {
            Vec::new()
        } else {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match (&entries[i], &entries[j]) {
                            (Ok(a), Ok(b)) => sup_distance(a, b),
                            _ => None,
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            epsilons,
            entries,
            distances,
        }
    }

    /// d_{i,i+1}.
    pub fn successive(&self) -> Vec<Option<f64>> {
        (1..self.entries.len()).map(|i| self.distances[i - 1][i]).collect()
    }

    /// Entry with the smallest ε that solved successfully.
    pub fn finest(&self) -> Option<(f64, &Trajectory)> {
        self.epsilons
            .iter()
            .zip(&self.entries)
            .rev()
            .find_map(|(&e, r)| r.as_ref().ok().map(|t| (e, t)))
    }
}

fn check_schedule(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParams("ε list is empty".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidParams("every ε must lie in (0, 1)".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("ε list must be strictly decreasing".into()));
    }
    Ok(())
}

/// Solves the problem once per ε (entries run concurrently) with a fixed
/// time step so that all members share their time samples. Failed entries
/// are kept as errors.
pub fn run_family(problem: &LatticeProblem, eps_list: &[f64], config: &SolverConfig) -> Result<FamilyResult> {
    check_schedule(eps_list)?;
    if !matches!(config.dt, DtPolicy::Fixed { .. }) {
        return Err(Error::InvalidParams("family runs require a fixed time step".into()));
    }
    config.validate()?;
    let scale = problem.enthalpy.scale();
    let entries: Vec<Result<Trajectory>> = eps_list
        .par_iter()
        .map(|&eps| {
            let mut member = problem.clone();
            member.enthalpy = RegularizedEnthalpy::new(eps)?.rescaled(scale)?;
            solve(&member, config)
        })
        .collect();
    Ok(FamilyResult::from_entries(eps_list.to_vec(), entries))
}

/// Fraction of (Ω node, stored time) samples with |u| ≤ δ.
pub fn band_fraction(traj: &Trajectory, delta: f64) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for values in &traj.fields {
        for (v, &inside) in values.iter().zip(traj.omega_mask.iter()) {
            if inside {
                total += 1;
                if v.abs() <= delta {
                    hits += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Surrogate of the limit pair built from the finest member.
#[derive(Debug, Clone, Serialize)]
pub struct LimitPair {
    pub epsilon: f64,
    pub delta: f64,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    /// Values in [0, 1]: 1 on {u > δ}, 0 on {u < −δ}, β_ε(u) in between.
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub band_fraction: f64,
}

/// w = 1 on {u > δ}, 0 on {u < −δ}, clamp(β_{ε_min}(u), 0, 1) on the band;
/// v = u + w. Fails when the band covers more than `band_limit` of the Ω samples.
pub fn limit_pair(family: &FamilyResult, delta: f64, band_limit: f64) -> Result<LimitPair> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "δ_resolve must be nonnegative, got {delta}"
        )));
    }
    let (epsilon, traj) = family
        .finest()
        .ok_or_else(|| Error::InvalidParams("family has no successful entry".into()))?;
    let fraction = band_fraction(traj, delta);
    if fraction > band_limit {
        return Err(Error::UnresolvedBandTooWide {
            fraction,
            limit: band_limit,
        });
    }
    let enthalpy = &traj.enthalpy;
    let w: Vec<Vec<f64>> = traj
        .fields
        .iter()
        .map(|f| {
            f.iter()
                .map(|&u| {
                    if u > delta {
                        1.0
                    } else if u < -delta {
                        0.0
                    } else {
                        enthalpy.beta_eps(u).clamp(0.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    let v = traj
        .fields
        .iter()
        .zip(&w)
        .map(|(f, g)| f.iter().zip(g).map(|(a, b)| a + b).collect())
        .collect();
    Ok(LimitPair {
        epsilon,
        delta,
        times: traj.times.clone(),
        u: traj.fields.clone(),
        w,
        v,
        band_fraction: fraction,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub epsilon: f64,
    pub c: Option<f64>,
    pub varsigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub successive: Vec<Option<f64>>,
    pub fits: Vec<FitRow>,
    /// (max ς̂ − min ς̂)/mean ς̂ over the available fits.
    pub varsigma_spread: Option<f64>,
    pub spread_limit: f64,
    /// Members disagree on grid, Ω or time samples, or some entry failed.
    pub issues: Vec<String>,
}

impl ConvergenceReport {
    pub fn consistent(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn spread_ok(&self) -> bool {
        self.varsigma_spread.is_some_and(|s| s <= self.spread_limit)
    }

    pub fn successive_nonincreasing(&self, slack: f64) -> bool {
        let d: Option<Vec<f64>> = self.successive.iter().copied().collect();
        d.is_some_and(|d| d.windows(2).all(|w| w[1] <= w[0] + slack))
    }
}

/// Tabulates d_{i,i+1} and the per-ε fits; `fits[i]` belongs to entry i.
pub fn convergence_report(
    family: &FamilyResult,
    fits: &[Option<ModulusReport>],
    spread_limit: f64,
) -> Result<ConvergenceReport> {
    if family.entries.len() < 2 {
        return Err(Error::InsufficientSamples(
            "convergence report needs at least two entries".into(),
        ));
    }
    if fits.len() != family.entries.len() {
        return Err(Error::InvalidParams("one fit slot per family entry is required".into()));
    }
    let mut issues = Vec::new();
    let first_ok = family.entries.iter().position(|e| e.is_ok());
    for (i, e) in family.entries.iter().enumerate() {
        match e {
            Err(err) => issues.push(format!("entry {i} (ε = {}) failed: {err}", family.epsilons[i])),
            Ok(t) => {
                let reference = family.entries[first_ok.expect("an entry succeeded")]
                    .as_ref()
                    .expect("ok");
                if t.grid != reference.grid {
                    issues.push(format!("entry {i} uses a different grid"));
                } else if t.omega_mask != reference.omega_mask {
                    issues.push(format!("entry {i} uses a different domain"));
                }
                if t.times != reference.times {
                    issues.push(format!("entry {i} has different time samples"));
                }
            }
        }
    }
    let rows: Vec<FitRow> = family
        .epsilons
        .iter()
        .zip(fits)
        .map(|(&epsilon, f)| FitRow {
            epsilon,
            c: f.as_ref().map(|r| r.c),
            varsigma: f.as_ref().map(|r| r.varsigma),
        })
        .collect();
    let vs: Vec<f64> = rows.iter().filter_map(|r| r.varsigma).collect();
    let varsigma_spread = if vs.is_empty() {
        None
    } else {
        let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = vs.iter().sum::<f64>() / vs.len() as f64;
        Some(if max == min { 0.0 } else { (max - min) / mean.abs() })
    };
    Ok(ConvergenceReport {
        epsilons: family.epsilons.clone(),
        successive: family.successive(),
        fits: rows,
        varsigma_spread,
        spread_limit,
        issues,
    })
}

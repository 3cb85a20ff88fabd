use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::problem::{DtPolicy, LatticeProblem, SolverConfig};
use super::step::{StepDiagnostics, Stepper};
use crate::enthalpy::RegularizedEnthalpy;
use crate::error::{Error, Result};
use crate::lattice::io::{read_field_binary, write_field_binary, write_field_csv};
use crate::lattice::{Datum, Exponents, ExteriorRule, FarField, Field, Grid, KernelSpec};

/// Time-indexed lattice fields with the per-step solver record.
///
/// `fields[0]` is the initial datum; `diagnostics[m]` describes the step that
/// produced `fields[m + 1]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub omega_mask: Arc<Vec<bool>>,
    pub exterior: Datum,
    pub exps: Exponents,
    pub kernel: KernelSpec,
    pub far_field: FarField,
    pub enthalpy: RegularizedEnthalpy,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    fn start(problem: &LatticeProblem) -> Self {
        Self {
            grid: problem.grid.clone(),
            omega_mask: problem.omega_mask.clone(),
            exterior: problem.g.clone(),
            exps: problem.exps,
            kernel: problem.kernel.clone(),
            far_field: problem.far_field,
            enthalpy: problem.enthalpy.clone(),
            times: vec![problem.start_time],
            fields: vec![problem.u0.clone()],
            diagnostics: Vec::new(),
        }
    }

    /// Rebuilds a trajectory from stored samples of `problem` (for example
    /// the output of `read_trajectory`).
    pub fn from_samples(
        problem: &LatticeProblem,
        times: Vec<f64>,
        fields: Vec<Vec<f64>>,
        diagnostics: Vec<StepDiagnostics>,
    ) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::Malformed("need one field per stored time".into()));
        }
        if fields.iter().any(|f| f.len() != problem.grid.len()) {
            return Err(Error::Malformed("field length does not match the grid".into()));
        }
        Ok(Self {
            times,
            fields,
            diagnostics,
            ..Self::start(problem)
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.enthalpy.epsilon()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Stored slice `m` with the datum as exterior continuation.
    pub fn field(&self, m: usize) -> Field {
        Field::new(
            self.fields[m].clone(),
            ExteriorRule::Datum {
                datum: self.exterior.clone(),
                t: self.times[m],
            },
        )
    }

    pub fn last(&self) -> &[f64] {
        self.fields.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Oscillation over the Ω nodes of slice `m`.
    pub fn omega_oscillation(&self, m: usize) -> f64 {
        let (lo, hi) = self.fields[m]
            .iter()
            .zip(self.omega_mask.iter())
            .filter(|(_, &inside)| inside)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// Same trajectory with every field multiplied by `m` (undoes `normalize`
    /// on the values; the grid and times are left as stored).
    pub fn scaled_values(&self, m: f64) -> Vec<Vec<f64>> {
        self.fields.iter().map(|f| f.iter().map(|v| v * m).collect()).collect()
    }
}

/// Integrates the problem over its horizon.
pub fn solve(problem: &LatticeProblem, config: &SolverConfig) -> Result<Trajectory> {
    let mut stepper = Stepper::new(problem, *config)?;
    let mut traj = Trajectory::start(problem);
    let t_start = problem.start_time;
    let t_end = problem.end_time();
    let h_sp = problem.grid.h().powf(problem.exps.sp());
    let mut m = 0usize;
    loop {
        let t = *traj.times.last().expect("nonempty");
        let next = match config.dt {
            DtPolicy::Fixed { steps } => {
                if m == steps {
                    break;
                }
                if m + 1 == steps {
                    t_end
                } else {
                    t_start + problem.horizon * (m + 1) as f64 / steps as f64
                }
            }
            DtPolicy::Intrinsic { c_t, dt_min, dt_max } => {
                let remaining = t_end - t;
                if remaining <= 1e-12 * (1.0 + t_end.abs()) {
                    break;
                }
                let omega = traj.omega_oscillation(m);
                let raw = c_t * h_sp * (omega / 4.0).powf(2.0 - problem.exps.p);
                let dt = if raw.is_finite() {
                    raw.clamp(dt_min, dt_max)
                } else {
                    dt_max
                };
                if dt >= remaining {
                    t_end
                } else {
                    t + dt
                }
            }
        };
        let dt = next - t;
        let u_m = traj.fields.last().expect("nonempty").clone();
        match stepper.step(&u_m, t, dt) {
            Ok((v, diag)) => {
                traj.times.push(next);
                traj.fields.push(v);
                traj.diagnostics.push(diag);
            }
            Err(Error::NewtonDivergence {
                time,
                residual,
                iterations,
                last_iterate,
                diagnostics,
                ..
            }) => {
                return Err(Error::NewtonDivergence {
                    time,
                    residual,
                    iterations,
                    last_iterate,
                    diagnostics,
                    partial: Some(Box::new(traj)),
                });
            }
            Err(e) => return Err(e),
        }
        m += 1;
    }
    Ok(traj)
}

/// Contents of `manifest.json` in a trajectory directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub grid: Grid,
    pub exps: Exponents,
    pub epsilon: f64,
    pub omega_mask: Vec<bool>,
    pub times: Vec<f64>,
    pub csv_files: Vec<String>,
    pub binary_files: Vec<String>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub config: serde_json::Value,
}

/// Writes `step_NNNNN.csv`, `step_NNNNN.bin` per stored time and a manifest.
pub fn write_trajectory(traj: &Trajectory, dir: &Path, config: serde_json::Value) -> Result<TrajectoryManifest> {
    fs::create_dir_all(dir)?;
    let mut csv_files = Vec::with_capacity(traj.len());
    let mut binary_files = Vec::with_capacity(traj.len());
    for (m, values) in traj.fields.iter().enumerate() {
        let csv = format!("step_{m:05}.csv");
        let bin = format!("step_{m:05}.bin");
        write_field_csv(BufWriter::new(File::create(dir.join(&csv))?), &traj.grid, values)?;
        write_field_binary(BufWriter::new(File::create(dir.join(&bin))?), values)?;
        csv_files.push(csv);
        binary_files.push(bin);
    }
    let manifest = TrajectoryManifest {
        grid: traj.grid.clone(),
        exps: traj.exps,
        epsilon: traj.epsilon(),
        omega_mask: traj.omega_mask.to_vec(),
        times: traj.times.clone(),
        csv_files,
        binary_files,
        diagnostics: traj.diagnostics.clone(),
        config,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a trajectory directory back (fields from the binary dumps).
pub fn read_trajectory(dir: &Path) -> Result<(TrajectoryManifest, Vec<Vec<f64>>)> {
    let manifest: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.binary_files.len() != manifest.times.len() {
        return Err(Error::Malformed(
            "manifest lists a different number of files and times".into(),
        ));
    }
    let mut fields = Vec::with_capacity(manifest.times.len());
    for name in &manifest.binary_files {
        let values = read_field_binary(File::open(dir.join(name))?)?;
        if values.len() != manifest.grid.len() {
            return Err(Error::Malformed(format!(
                "{name} holds {} values for {} nodes",
                values.len(),
                manifest.grid.len()
            )));
        }
        fields.push(values);
    }
    Ok((manifest, fields))
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::enthalpy::RegularizedEnthalpy;
use crate::error::{Error, Result};
use crate::lattice::{Datum, Exponents, FarField, Grid, KernelSpec, Point, TransformedKernel};

/// Initial-boundary value problem on a lattice.
#[derive(Debug, Clone)]
pub struct LatticeProblem {
    pub exps: Exponents,
    pub kernel: KernelSpec,
    pub grid: Grid,
    pub omega_mask: Arc<Vec<bool>>,
    pub g: Datum,
    /// Initial values on every box node; equal to g(·, start_time) off Ω.
    pub u0: Vec<f64>,
    pub start_time: f64,
    pub horizon: f64,
    pub enthalpy: RegularizedEnthalpy,
    pub far_field: FarField,
}

impl LatticeProblem {
    /// Builds a problem whose initial values are `inside` on Ω and the datum
    /// elsewhere.
    #[allow(clippy::too_many_arguments)]
    pub fn new<F>(
        exps: Exponents,
        kernel: KernelSpec,
        grid: Grid,
        omega_mask: Vec<bool>,
        g: Datum,
        inside: F,
        horizon: f64,
        epsilon: f64,
    ) -> Result<Self>
    where
        F: Fn(Point) -> f64,
    {
        let u0 = (0..grid.len())
            .map(|i| {
                let x = grid.coord(i);
                if omega_mask.get(i).copied().unwrap_or(false) {
                    inside(x)
                } else {
                    g.eval(x, 0.0)
                }
            })
            .collect();
        let problem = Self {
            exps,
            kernel,
            grid,
            omega_mask: Arc::new(omega_mask),
            g,
            u0,
            start_time: 0.0,
            horizon,
            enthalpy: RegularizedEnthalpy::new(epsilon)?,
            far_field: FarField::Enabled,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn epsilon(&self) -> f64 {
        self.enthalpy.epsilon()
    }

    /// Same problem with u₀ and g raised by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let g = self.g.clone();
        Self {
            g: Datum::new(move |x, t| g.eval(x, t) + c, self.g.far_value() + c),
            u0: self.u0.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.horizon
    }

    pub fn interior_count(&self) -> usize {
        self.omega_mask.iter().filter(|&&m| m).count()
    }

    pub fn validate(&self) -> Result<()> {
        self.exps.validate()?;
        let n = self.grid.len();
        if self.omega_mask.len() != n || self.u0.len() != n {
            return Err(Error::InvalidParams("mask and initial data must cover the box".into()));
        }
        let inside = self.interior_count();
        if inside == 0 {
            return Err(Error::InvalidParams("Ω contains no lattice node".into()));
        }
        if inside == n {
            return Err(Error::InvalidParams(
                "Ω must leave exterior nodes inside the box".into(),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if let Some(i) = self.u0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("initial value at node {i} is not finite")));
        }
        for i in 0..n {
            if !self.omega_mask[i] {
                let gi = self.g.eval(self.grid.coord(i), self.start_time);
                if (gi - self.u0[i]).abs() > 1e-12 * (1.0 + gi.abs()) {
                    return Err(Error::InvalidParams(format!(
                        "initial value at exterior node {i} disagrees with the datum"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Translated and normalized copy of a problem: ū(x, t) = u(x + x₀, t + t₀)/M.
///
/// Data are divided by M, the kernel is multiplied by M^{p−2}, and the
/// enthalpy becomes ξ ↦ β_ε(Mξ)/M. Solving the result and multiplying by M
/// reproduces the original solution.
pub fn normalize(problem: &LatticeProblem, m: f64, z0: (Point, f64)) -> Result<LatticeProblem> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "normalization factor must be positive, got {m}"
        )));
    }
    let (x0, t0) = z0;
    let origin = problem.grid.origin();
    let grid = problem.grid.with_origin([origin[0] - x0[0], origin[1] - x0[1]]);
    let factor = m.powf(problem.exps.p - 2.0);
    let kernel: KernelSpec = if factor == 1.0 && x0 == [0.0, 0.0] && t0 == 0.0 {
        problem.kernel.clone()
    } else {
        Arc::new(TransformedKernel {
            inner: problem.kernel.clone(),
            factor,
            shift: x0,
            time_shift: t0,
        })
    };
    let g = if m == 1.0 && x0 == [0.0, 0.0] && t0 == 0.0 {
        problem.g.clone()
    } else {
        problem.g.transformed(m, x0, t0)
    };
    Ok(LatticeProblem {
        exps: problem.exps,
        kernel,
        grid,
        omega_mask: problem.omega_mask.clone(),
        g,
        u0: problem.u0.iter().map(|v| v / m).collect(),
        start_time: problem.start_time - t0,
        horizon: problem.horizon,
        enthalpy: problem.enthalpy.rescaled(m)?,
        far_field: problem.far_field,
    })
}

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DtPolicy {
    /// `steps` equal steps over the horizon.
    Fixed { steps: usize },
    /// Δt = c_t·h^{sp}·(ω/4)^{2−p} with ω the running oscillation over Ω,
    /// clipped to [dt_min, dt_max].
    Intrinsic { c_t: f64, dt_min: f64, dt_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: DtPolicy,
    /// Sup-norm residual threshold τ_N.
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Backtracking factor in (0, 1).
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: DtPolicy::Fixed { steps: 400 },
            newton_tol: 1e-10,
            newton_max: 60,
            damping: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn fixed(steps: usize) -> Self {
        Self {
            dt: DtPolicy::Fixed { steps },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.newton_tol > 0.0) {
            errs.push(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            errs.push(format!("damping must lie in (0, 1), got {}", self.damping));
        }
        if self.newton_max == 0 {
            errs.push("newton_max must be at least 1".to_string());
        }
        match self.dt {
            DtPolicy::Fixed { steps: 0 } => errs.push("steps must be at least 1".into()),
            DtPolicy::Intrinsic { c_t, dt_min, dt_max } if !(c_t > 0.0 && dt_min > 0.0 && dt_max >= dt_min) => {
                errs.push("intrinsic policy needs c_t > 0 and 0 < dt_min ≤ dt_max".into())
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs.join("; ")))
        }
    }
}

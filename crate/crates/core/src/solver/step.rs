use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{LatticeProblem, SolverConfig};
use crate::enthalpy::RegularizedEnthalpy;
use crate::error::{Error, Result};
use crate::lattice::{ExteriorLoad, LatticeOperator};

/// Per-step solver record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Time reached by the step.
    pub time: f64,
    pub dt: f64,
    /// Sup-norm residual of the accepted iterate.
    pub residual: f64,
    pub newton_iterations: usize,
    pub backtracks: usize,
    /// Objective at the initial guess minus objective at the accepted iterate.
    pub objective_decrease: f64,
    /// Objective value at every Newton iterate, starting with the guess.
    pub objective_trace: Vec<f64>,
    /// p-energy E(v) of the accepted state (exterior frozen at the new time).
    pub energy: f64,
}

/// The convex objective of one implicit step,
/// F(v) = Σ_i [B(v_i) − b(u_m,i)·v_i] + Δt·E(v), whose gradient is the
/// step residual b(v) − b(u_m) + Δt·𝓛v.
pub struct StepObjective<'a> {
    op: &'a LatticeOperator,
    load: ExteriorLoad,
    enthalpy: &'a RegularizedEnthalpy,
    b_prev: Vec<f64>,
    dt: f64,
}

impl StepObjective<'_> {
    pub fn unknowns(&self) -> usize {
        self.b_prev.len()
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        let local: f64 = v
            .iter()
            .zip(&self.b_prev)
            .map(|(&vi, &bi)| self.enthalpy.b_primitive(vi) - bi * vi)
            .sum();
        local + self.dt * self.op.energy(v, &self.load)
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let lv = self.op.apply(v, &self.load);
        v.iter()
            .zip(&self.b_prev)
            .zip(lv)
            .map(|((&vi, &bi), l)| self.enthalpy.b(vi) - bi + self.dt * l)
            .collect()
    }

    pub fn hessian(&self, v: &[f64]) -> DMatrix<f64> {
        let mut j = self.op.jacobian(v, &self.load);
        j *= self.dt;
        for (a, &vi) in v.iter().enumerate() {
            j[(a, a)] += self.enthalpy.b_prime(vi);
        }
        j
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        self.op.energy(v, &self.load)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Advances lattice fields by single implicit steps.
pub struct Stepper<'a> {
    problem: &'a LatticeProblem,
    config: SolverConfig,
    op: LatticeOperator,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a LatticeProblem, config: SolverConfig) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        let op = LatticeOperator::assemble(
            &problem.grid,
            &problem.omega_mask,
            problem.kernel.clone(),
            problem.exps,
            problem.far_field,
            problem.start_time,
        )?;
        Ok(Self { problem, config, op })
    }

    pub fn operator(&self) -> &LatticeOperator {
        &self.op
    }

    fn refresh_operator(&mut self, t: f64) -> Result<()> {
        if !self.problem.kernel.time_independent() && self.op.time() != t {
            self.op = LatticeOperator::assemble(
                &self.problem.grid,
                &self.problem.omega_mask,
                self.problem.kernel.clone(),
                self.problem.exps,
                self.problem.far_field,
                t,
            )?;
        }
        Ok(())
    }

    /// Box values at t + Δt before solving: Ω nodes keep u_m, the rest are
    /// pinned to the datum.
    fn pinned(&self, u_m: &[f64], t_new: f64) -> Vec<f64> {
        let grid = &self.problem.grid;
        u_m.iter()
            .enumerate()
            .map(|(i, &u)| {
                if self.problem.omega_mask[i] {
                    u
                } else {
                    self.problem.g.eval(grid.coord(i), t_new)
                }
            })
            .collect()
    }

    /// Objective of the step from `u_m` at `t` to `t + dt`.
    pub fn objective(&mut self, u_m: &[f64], t: f64, dt: f64) -> Result<StepObjective<'_>> {
        let t_new = t + dt;
        self.refresh_operator(t_new)?;
        let full = self.pinned(u_m, t_new);
        let g = &self.problem.g;
        let load = self.op.exterior_load(|j| full[j], |x| g.eval(x, t_new), g.far_value());
        let enthalpy = &self.problem.enthalpy;
        let b_prev = self.op.interior().iter().map(|&i| enthalpy.b(u_m[i])).collect();
        Ok(StepObjective {
            op: &self.op,
            load,
            enthalpy,
            b_prev,
            dt,
        })
    }

    /// One backward-Euler step; returns the full box field at `t + dt`.
    pub fn step(&mut self, u_m: &[f64], t: f64, dt: f64) -> Result<(Vec<f64>, StepDiagnostics)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        let config = self.config;
        let t_new = t + dt;
        let mut full = self.pinned(u_m, t_new);
        let interior: Vec<usize> = self.op.interior().to_vec();
        let objective = self.objective(u_m, t, dt)?;
        let mut v: Vec<f64> = interior.iter().map(|&i| u_m[i]).collect();

        let mut diag = StepDiagnostics {
            time: t_new,
            dt,
            ..Default::default()
        };
        let mut f = objective.value(&v);
        let f_start = f;
        diag.objective_trace.push(f);
        let mut r = objective.gradient(&v);
        let mut rn = sup_norm(&r);
        let mut iterations = 0;
        while rn > config.newton_tol {
            if iterations == config.newton_max {
                diag.residual = rn;
                diag.newton_iterations = iterations;
                diag.objective_decrease = f_start - f;
                diag.energy = objective.energy(&v);
                for (&i, &vi) in interior.iter().zip(&v) {
                    full[i] = vi;
                }
                return Err(Error::NewtonDivergence {
                    time: t_new,
                    residual: rn,
                    iterations,
                    last_iterate: full,
                    diagnostics: Box::new(diag),
                    partial: None,
                });
            }
            iterations += 1;
            let hess = objective.hessian(&v);
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
            let dir = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => hess
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::InvalidParams("singular Newton system".into()))?,
            };
            let slope: f64 = r.iter().zip(dir.iter()).map(|(a, b)| a * b).sum();
            let mut alpha = 1.0;
            let (next, f_next) = loop {
                let trial: Vec<f64> = v.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
                let f_trial = objective.value(&trial);
                if f_trial <= f + 1e-4 * alpha * slope {
                    break (trial, f_trial);
                }
                // Below the rounding floor of F the Armijo test is meaningless;
                // accept the step when it reduces the residual instead.
                let floor = 1e3 * f64::EPSILON * (f.abs() + 1.0);
                if (alpha * slope).abs() <= floor {
                    let rt = sup_norm(&objective.gradient(&trial));
                    if rt < rn || alpha < 1e-12 {
                        break (trial, f_trial);
                    }
                }
                alpha *= config.damping;
                diag.backtracks += 1;
                if alpha < 1e-14 {
                    break (trial, f_trial);
                }
            };
            v = next;
            f = f_next;
            diag.objective_trace.push(f);
            r = objective.gradient(&v);
            rn = sup_norm(&r);
        }
        diag.residual = rn;
        diag.newton_iterations = iterations;
        diag.objective_decrease = f_start - f;
        diag.energy = objective.energy(&v);
        for (&i, &vi) in interior.iter().zip(&v) {
            full[i] = vi;
        }
        Ok((full, diag))
    }
}

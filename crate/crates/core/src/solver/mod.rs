//! Backward-Euler integration of ∂ₜ(u + β_ε(u)) + 𝓛u = 0 with exterior datum.
//!
//! Each step solves b(v) − b(u_m) + Δt·𝓛v = 0 on the Ω nodes, with the box
//! nodes outside Ω pinned to g(·, t + Δt). The system is the optimality
//! condition of the strictly convex objective
//! Σ_i [B(v_i) − b(u_m,i)·v_i] + Δt·E(v), so damped Newton with backtracking
//! on that objective converges from any starting point.

mod checks;
mod problem;
mod step;
mod trajectory;

pub use checks::{
    caccioppoli_audit, comparison_defect, max_principle_check, normalization_defect, weak_residual, CaccioppoliReport,
    MaxPrincipleReport, RadialCutoff,
};
pub use problem::{normalize, DtPolicy, LatticeProblem, SolverConfig};
pub use step::{StepDiagnostics, StepObjective, Stepper};
pub use trajectory::{read_trajectory, solve, write_trajectory, Trajectory, TrajectoryManifest};

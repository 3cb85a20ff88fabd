//! Numerical laboratory for the regularized nonlocal two-phase Stefan problem
//! ∂ₜ(u + β_ε(u)) + 𝓛u = 0, with 𝓛 a fractional p-Laplacian (p > 2, 0 < s < 1).

// `!(x > 0.0)` is how parameters reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod continuation;
pub mod enthalpy;
pub mod error;
pub mod lattice;
pub mod solver;

pub use analysis::{Cylinder, IterationParams, ModulusReport, SequenceTable};
pub use enthalpy::{MollifierSpec, RegularizedEnthalpy, Truncation};
pub use error::{Error, Result};
pub use lattice::{Datum, Exponents, ExteriorRule, Field, Grid, KernelSpec, LatticeOperator, Point};
pub use solver::{LatticeProblem, SolverConfig, StepDiagnostics, Trajectory};

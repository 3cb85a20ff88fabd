use thiserror::Error;

use crate::solver::{StepDiagnostics, Trajectory};

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty time window for tail evaluation")]
    EmptyWindow,

    #[error("no lattice sample falls inside the cylinder")]
    EmptyCylinder,

    #[error("inverse of b did not converge for y = {y} (residual {residual:e})")]
    NoConvergence { y: f64, residual: f64 },

    #[error("Newton iteration diverged at t = {time}: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence {
        time: f64,
        residual: f64,
        iterations: usize,
        last_iterate: Vec<f64>,
        diagnostics: Box<StepDiagnostics>,
        partial: Option<Box<Trajectory>>,
    },

    #[error("insufficient samples for fit: {0}")]
    InsufficientSamples(String),

    #[error("all oscillation samples lie in the regularization floor 4ε = {floor}")]
    NonpositiveExcess { floor: f64 },

    #[error("cutoff vanishes identically on the cylinder")]
    DegenerateCutoff,

    #[error("unresolved band fraction {fraction} exceeds the limit {limit}")]
    UnresolvedBandTooWide { fraction: f64, limit: f64 },

    #[error("inconsistent family: {0}")]
    InconsistentFamily(String),

    #[error("configuration rejected:\n{}", .0.join("\n"))]
    SchemaViolation(Vec<String>),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file: {0}")]
    Malformed(String),
}

impl Error {
    /// Short machine-readable tag used in error objects emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidExponent(_) => "invalid-exponent",
            Error::InvalidParams(_) => "invalid-params",
            Error::EmptyWindow => "empty-window",
            Error::EmptyCylinder => "empty-cylinder",
            Error::NoConvergence { .. } => "no-convergence",
            Error::NewtonDivergence { .. } => "newton-divergence",
            Error::InsufficientSamples(_) => "insufficient-samples",
            Error::NonpositiveExcess { .. } => "nonpositive-excess",
            Error::DegenerateCutoff => "degenerate-cutoff",
            Error::UnresolvedBandTooWide { .. } => "unresolved-band-too-wide",
            Error::InconsistentFamily(_) => "inconsistent-family",
            Error::SchemaViolation(_) => "schema-violation",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Malformed(_) => "malformed",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

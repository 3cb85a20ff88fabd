use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ConstantKernel, Datum, Exponents, Grid, KernelSpec, Point, SinSumKernel};
use crate::solver::LatticeProblem;

pub const PRESET_NAMES: [&str; 4] = ["melt1d", "twophase1d", "logbdy", "constant1d"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant { value: f64, lambda: f64 },
    SinSum { amplitude: f64, lambda: f64 },
}

impl KernelConfig {
    pub fn build(&self) -> KernelSpec {
        match *self {
            KernelConfig::Constant { value, lambda } => Arc::new(ConstantKernel { value, lambda }),
            KernelConfig::SinSum { amplitude, lambda } => Arc::new(SinSumKernel { amplitude, lambda }),
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            KernelConfig::Constant { lambda, .. } | KernelConfig::SinSum { lambda, .. } => lambda,
        }
    }
}

/// Lattice box: `nodes[d]` points per axis starting at `origin[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub origin: Vec<f64>,
    pub h: f64,
    pub nodes: Vec<usize>,
    pub r_inf: f64,
}

/// Open region Ω inside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// lo < x₀ < hi (first coordinate only).
    Interval { lo: f64, hi: f64 },
    /// |x − center| < radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// lo[d] < x_d < hi[d] for every axis.
    Rect { lo: Vec<f64>, hi: Vec<f64> },
}

impl RegionSpec {
    /// A few points of ∂Ω for measure-density reports.
    pub fn boundary_points(&self, dim: usize) -> Vec<Point> {
        match self {
            RegionSpec::Interval { lo, hi } => vec![[*lo, 0.0], [*hi, 0.0]],
            RegionSpec::Ball { center, radius } => {
                let c = [
                    center.first().copied().unwrap_or(0.0),
                    center.get(1).copied().unwrap_or(0.0),
                ];
                let mut pts = vec![[c[0] + radius, c[1]], [c[0] - radius, c[1]]];
                if dim == 2 {
                    pts.push([c[0], c[1] + radius]);
                }
                pts
            }
            RegionSpec::Rect { lo, hi } => {
                let mid = |k: usize| 0.5 * (lo.get(k).copied().unwrap_or(0.0) + hi.get(k).copied().unwrap_or(0.0));
                if dim == 2 {
                    vec![[lo[0], mid(1)], [hi[0], mid(1)], [lo[0], lo[1]]]
                } else {
                    vec![[lo[0], 0.0], [hi[0], 0.0]]
                }
            }
        }
    }

    pub fn contains(&self, x: Point, dim: usize) -> bool {
        match self {
            RegionSpec::Interval { lo, hi } => x[0] > *lo && x[0] < *hi,
            RegionSpec::Ball { center, radius } => {
                let d2: f64 = (0..dim)
                    .map(|k| (x[k] - center.get(k).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                d2.sqrt() < *radius
            }
            RegionSpec::Rect { lo, hi } => (0..dim).all(|k| x[k] > lo[k] && x[k] < hi[k]),
        }
    }
}

/// Scalar data g(x) or u₀(x) (time-independent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    Constant {
        value: f64,
    },
    /// amplitude·sin(2π·frequency·x₀).
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// −c_g(1 + ln(radius/|x − anchor|))^{−delta}, equal to −c_g for
    /// |x − anchor| ≥ radius and 0 at the anchor.
    LogModulus {
        c_g: f64,
        delta: f64,
        radius: f64,
        anchor: Vec<f64>,
    },
}

impl DatumSpec {
    pub fn eval(&self, x: Point, dim: usize) -> f64 {
        match self {
            DatumSpec::Constant { value } => *value,
            DatumSpec::Sine { amplitude, frequency } => {
                amplitude * (2.0 * std::f64::consts::PI * frequency * x[0]).sin()
            }
            DatumSpec::LogModulus {
                c_g,
                delta,
                radius,
                anchor,
            } => {
                let d: f64 = (0..dim)
                    .map(|k| (x[k] - anchor.get(k).copied().unwrap_or(0.0)).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d == 0.0 {
                    0.0
                } else {
                    -c_g * (1.0 + (radius / d.min(*radius)).ln()).powf(-delta)
                }
            }
        }
    }

    /// Value assumed beyond the truncation radius.
    pub fn far_value(&self) -> Result<f64> {
        match self {
            DatumSpec::Constant { value } => Ok(*value),
            DatumSpec::LogModulus { c_g, .. } => Ok(-c_g),
            DatumSpec::Sine { .. } => Err(Error::InvalidParams(
                "a sine datum has no far-field value; use it for u0 only".into(),
            )),
        }
    }

    /// Modulus of continuity ω_g(r) of the datum near its anchor, if known.
    pub fn modulus(&self, r: f64) -> Option<f64> {
        match self {
            DatumSpec::Constant { .. } => Some(0.0),
            DatumSpec::LogModulus { c_g, delta, radius, .. } => {
                Some(c_g * (1.0 + (radius / r.min(*radius)).ln()).powf(-delta))
            }
            DatumSpec::Sine { .. } => None,
        }
    }
}

/// Inline problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub s: f64,
    pub p: f64,
    pub kernel: KernelConfig,
    pub epsilon: f64,
    #[serde(rename = "box")]
    pub lattice: BoxSpec,
    pub omega: RegionSpec,
    pub g: DatumSpec,
    pub u0: DatumSpec,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.lattice.nodes.len()
    }

    pub fn exponents(&self) -> Result<Exponents> {
        Exponents::new(self.s, self.p)
    }

    pub fn grid(&self) -> Result<Grid> {
        let b = &self.lattice;
        match b.nodes.len() {
            1 if b.origin.len() == 1 => Grid::new_1d(b.origin[0], b.h, b.nodes[0], b.r_inf),
            2 if b.origin.len() == 2 => Grid::new_2d([b.origin[0], b.origin[1]], b.h, b.nodes[0], b.nodes[1], b.r_inf),
            _ => Err(Error::InvalidParams(
                "box needs matching origin and nodes of length 1 or 2".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<LatticeProblem> {
        let exps = self.exponents()?;
        let grid = self.grid()?;
        let dim = grid.dim();
        let mask: Vec<bool> = (0..grid.len())
            .map(|i| self.omega.contains(grid.coord(i), dim))
            .collect();
        let g_spec = self.g.clone();
        let far = g_spec.far_value()?;
        let g = Datum::new(move |x, _| g_spec.eval(x, dim), far);
        let u0 = self.u0.clone();
        LatticeProblem::new(
            exps,
            self.kernel.build(),
            grid,
            mask,
            g,
            move |x| u0.eval(x, dim),
            self.horizon,
            self.epsilon,
        )
    }
}

fn interval_1d(
    epsilon: f64,
    g: DatumSpec,
    u0: DatumSpec,
    omega: (f64, f64),
    origin: f64,
    nodes: usize,
    horizon: f64,
) -> ProblemSpec {
    ProblemSpec {
        s: 0.5,
        p: 3.0,
        kernel: KernelConfig::Constant {
            value: 1.0,
            lambda: 1.0,
        },
        epsilon,
        lattice: BoxSpec {
            origin: vec![origin],
            h: 1.0 / 128.0,
            nodes: vec![nodes],
            r_inf: 2.0,
        },
        omega: RegionSpec::Interval {
            lo: omega.0,
            hi: omega.1,
        },
        g,
        u0,
        horizon,
    }
}

/// Named problem presets.
pub fn preset(name: &str) -> Result<ProblemSpec> {
    match name {
        // Cold slab (u = −1) in a hot exterior (g = +1): a melting front
        // enters from both sides.
        "melt1d" => Ok(interval_1d(
            0.05,
            DatumSpec::Constant { value: 1.0 },
            DatumSpec::Constant { value: -1.0 },
            (-0.5, 0.5),
            -1.0,
            257,
            MELT1D_HORIZON,
        )),
        // Sign-changing initial temperature with a zero exterior: one
        // phase freezes while the other melts.
        "twophase1d" => Ok(interval_1d(
            0.05,
            DatumSpec::Constant { value: 0.0 },
            DatumSpec::Sine {
                amplitude: 0.8,
                frequency: 1.0,
            },
            (-0.5, 0.5),
            -1.0,
            257,
            MELT1D_HORIZON,
        )),
        // Ω = (0, 1/2) with a lateral datum whose modulus at x = 0 is
        // c_g(1 + ln(1/r))^{−0.9}.
        "logbdy" => Ok(interval_1d(
            0.05,
            DatumSpec::LogModulus {
                c_g: 0.5,
                delta: 0.9,
                radius: 1.0,
                anchor: vec![0.0],
            },
            DatumSpec::Constant { value: 0.0 },
            (0.0, 0.5),
            -0.75,
            257,
            MELT1D_HORIZON,
        )),
        "constant1d" => {
            let mut spec = interval_1d(
                0.05,
                DatumSpec::Constant { value: 0.3 },
                DatumSpec::Constant { value: 0.3 },
                (-0.5, 0.5),
                -1.0,
                65,
                0.1,
            );
            spec.lattice.h = 1.0 / 32.0;
            Ok(spec)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

pub const MELT1D_HORIZON: f64 = 0.1;

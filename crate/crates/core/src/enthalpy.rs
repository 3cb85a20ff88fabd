//! The latent-heat graph β and its mollification.
//!
//! β is the Heaviside-type maximal monotone graph (0 for ξ < 0, 1 for ξ > 0,
//! the whole interval [0, 1] at ξ = 0). It is smoothed by convolution with
//! ψ_ε(ξ) = ψ(ξ/ε)/ε where ψ is the normalized even bump
//! `Z·exp(−1/(1−t²))` on (−1, 1). Since β is a step, the convolution is the
//! cumulative mollifier: β_ε(ξ) = Ψ(ξ/ε) with Ψ(x) = ∫_{−1}^{x} ψ.
//!
//! Ψ and its first moment are tabulated once on a uniform panel grid of
//! [−1, 0]; values inside a panel are completed with a 10-point
//! Gauss–Legendre rule, and the right half follows from the evenness of ψ.
//!
//! The diffeomorphism b(ξ) = ξ + β_ε(ξ) satisfies 1 ≤ b′ ≤ 1 + sup ψ_ε, and
//! B(ξ) = ξ²/2 + ∫_{−∞}^{ξ} β_ε is the convex antiderivative of b used by the
//! implicit step objective.

use std::sync::Arc;

use crate::error::{Error, Result};

// 10-point Gauss–Legendre rule on [−1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Default number of panels on the half support [−1, 0].
pub const DEFAULT_HALF_PANELS: usize = 1024;

/// Unnormalized bump exp(−1/(1−t²)) on (−1, 1), zero elsewhere.
pub fn raw_bump(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Parameters of the mollifier ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierSpec {
    /// Half-width of the support; ψ vanishes for |t| ≥ 1.
    pub support_halfwidth: f64,
    /// Z such that Z·∫exp(−1/(1−t²)) dt = 1.
    pub normalization_constant: f64,
    /// Number of bump evaluations used to build the tables.
    pub quadrature_nodes: usize,
}

#[derive(Debug)]
struct CumulativeTable {
    panel: f64,
    // Unnormalized ∫_{-1}^{-1+kΔ} ψ̃ and ∫_{-1}^{-1+kΔ} tψ̃, k = 0..=panels.
    mass: Vec<f64>,
    moment: Vec<f64>,
    // 2·mass[panels], the full unnormalized integral.
    total: f64,
}

impl CumulativeTable {
    fn build(half_panels: usize) -> Self {
        let panel = 1.0 / half_panels as f64;
        let mut mass = Vec::with_capacity(half_panels + 1);
        let mut moment = Vec::with_capacity(half_panels + 1);
        let (mut m, mut mo) = (0.0, 0.0);
        mass.push(0.0);
        moment.push(0.0);
        for k in 0..half_panels {
            let a = -1.0 + k as f64 * panel;
            let b = if k + 1 == half_panels { 0.0 } else { a + panel };
            m += gauss_legendre(a, b, raw_bump);
            mo += gauss_legendre(a, b, |t| t * raw_bump(t));
            mass.push(m);
            moment.push(mo);
        }
        let total = 2.0 * m;
        Self {
            panel,
            mass,
            moment,
            total,
        }
    }

    fn panels(&self) -> usize {
        self.mass.len() - 1
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let k = (((x + 1.0) / self.panel).floor() as usize).min(self.panels() - 1);
        (k, -1.0 + k as f64 * self.panel)
    }

    /// Normalized Ψ(x) for x ≤ 0.
    fn cdf_left(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        let (k, a) = self.locate(x);
        let raw = self.mass[k] + gauss_legendre(a, x, raw_bump);
        raw.clamp(self.mass[k], self.mass[k + 1]) / self.total
    }

    /// Normalized ∫_{−1}^{x} tψ(t) dt for x ≤ 0.
    fn moment_left(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        let (k, a) = self.locate(x);
        (self.moment[k] + gauss_legendre(a, x, |t| t * raw_bump(t))) / self.total
    }

    fn cdf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            1.0
        } else if x <= 0.0 {
            self.cdf_left(x)
        } else {
            1.0 - self.cdf_left(-x)
        }
    }

    fn moment(&self, x: f64) -> f64 {
        if x >= 1.0 || x <= -1.0 {
            0.0
        } else {
            self.moment_left(-x.abs())
        }
    }

    /// G(x) = ∫_{−1}^{x} Ψ = xΨ(x) − ∫_{−1}^{x} tψ.
    fn cdf_primitive(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            x
        } else {
            x * self.cdf(x) - self.moment(x)
        }
    }
}

/// Value of the set-valued graph β at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphValue {
    pub lo: f64,
    pub hi: f64,
}

impl GraphValue {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// β(ξ): {1} for ξ > 0, {0} for ξ < 0, [0, 1] at ξ = 0.
pub fn beta_graph(xi: f64) -> GraphValue {
    if xi > 0.0 {
        GraphValue { lo: 1.0, hi: 1.0 }
    } else if xi < 0.0 {
        GraphValue { lo: 0.0, hi: 0.0 }
    } else {
        GraphValue { lo: 0.0, hi: 1.0 }
    }
}

/// Sign of a De Giorgi truncation: `Plus` is (u − k)₊, `Minus` is (u − k)₋.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    Plus,
    Minus,
}

impl Truncation {
    pub fn apply(self, u: f64, k: f64) -> f64 {
        match self {
            Truncation::Plus => (u - k).max(0.0),
            Truncation::Minus => (k - u).max(0.0),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Truncation::Plus => Truncation::Minus,
            Truncation::Minus => Truncation::Plus,
        }
    }
}

/// The mollified enthalpy β_ε together with b = id + β_ε.
///
/// `scale` implements the normalized graph ξ ↦ β_ε(Mξ)/M; it is 1 for the
/// physical problem.
#[derive(Debug, Clone)]
pub struct RegularizedEnthalpy {
    epsilon: f64,
    scale: f64,
    mollifier: MollifierSpec,
    table: Arc<CumulativeTable>,
}

impl RegularizedEnthalpy {
    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_resolution(epsilon, DEFAULT_HALF_PANELS)
    }

    pub fn with_resolution(epsilon: f64, half_panels: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if half_panels < 2 {
            return Err(Error::InvalidParams("need at least two table panels".into()));
        }
        let table = CumulativeTable::build(half_panels);
        let mollifier = MollifierSpec {
            support_halfwidth: 1.0,
            normalization_constant: 1.0 / table.total,
            quadrature_nodes: 2 * 10 * half_panels,
        };
        Ok(Self {
            epsilon,
            scale: 1.0,
            mollifier,
            table: Arc::new(table),
        })
    }

    /// The graph ξ ↦ β_ε(Mξ)/M used after normalizing the solution by M.
    pub fn rescaled(&self, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParams(format!("scale must be positive, got {m}")));
        }
        let mut out = self.clone();
        out.scale *= m;
        Ok(out)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mollifier(&self) -> &MollifierSpec {
        &self.mollifier
    }

    /// Spacing of the lookup table in ξ units.
    pub fn lookup_resolution(&self) -> f64 {
        self.table.panel * self.epsilon / self.scale
    }

    pub fn normalization_constant(&self) -> f64 {
        self.mollifier.normalization_constant
    }

    /// ψ(t), normalized to unit mass.
    pub fn psi(&self, t: f64) -> f64 {
        raw_bump(t) / self.table.total
    }

    /// ψ_ε(ξ) = ψ(ξ/ε)/ε.
    pub fn psi_eps(&self, xi: f64) -> f64 {
        self.psi(xi / self.epsilon) / self.epsilon
    }

    /// Half-width of the transition layer in ξ units.
    pub fn layer_halfwidth(&self) -> f64 {
        self.epsilon / self.scale
    }

    pub fn beta_eps(&self, xi: f64) -> f64 {
        self.table.cdf(self.scale * xi / self.epsilon) / self.scale
    }

    pub fn beta_eps_prime(&self, xi: f64) -> f64 {
        self.psi_eps(self.scale * xi)
    }

    pub fn b(&self, xi: f64) -> f64 {
        xi + self.beta_eps(xi)
    }

    pub fn b_prime(&self, xi: f64) -> f64 {
        1.0 + self.beta_eps_prime(xi)
    }

    /// ∫_{−∞}^{ξ} β_ε.
    pub fn beta_primitive(&self, xi: f64) -> f64 {
        let m = self.scale;
        self.epsilon / (m * m) * self.table.cdf_primitive(m * xi / self.epsilon)
    }

    /// B(ξ) = ξ²/2 + ∫_{−∞}^{ξ} β_ε, an antiderivative of b.
    pub fn b_primitive(&self, xi: f64) -> f64 {
        0.5 * xi * xi + self.beta_primitive(xi)
    }

    /// Solves b(ξ) = y by safeguarded Newton inside the bracket [y − 1/M, y].
    pub fn b_inverse(&self, y: f64) -> Result<f64> {
        self.b_inverse_from(y, y)
    }

    /// As [`Self::b_inverse`], starting Newton from `guess`.
    pub fn b_inverse_from(&self, y: f64, guess: f64) -> Result<f64> {
        const MAX_ITER: usize = 200;
        let mut lo = y - 1.0 / self.scale;
        let mut hi = y;
        let mut x = if guess.is_finite() {
            guess.clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        };
        let tol = 1e-15 * (1.0 + y.abs());
        for _ in 0..MAX_ITER {
            let f = self.b(x) - y;
            if f.abs() <= tol {
                return Ok(x);
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - f / self.b_prime(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == x || hi - lo <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                break;
            }
            x = next;
        }
        let residual = (self.b(x) - y).abs();
        if residual > 1e-10 {
            Err(Error::NoConvergence { y, residual })
        } else {
            Ok(x)
        }
    }

    /// ±∫_k^u β′_ε(ξ)(ξ − k)_± dξ, the latent contribution to the truncated
    /// energy. Exactly zero when the integration range misses the layer.
    pub fn truncated_latent_energy(&self, u: f64, k: f64, sign: Truncation) -> f64 {
        let w = self.layer_halfwidth();
        let (a, b) = match sign {
            Truncation::Plus => (k.max(-w), u.min(w)),
            Truncation::Minus => (u.max(-w), k.min(w)),
        };
        if a >= b {
            return 0.0;
        }
        // ∫_a^b β′(ξ)(ξ − k) dξ = [(ξ − k)β(ξ)]_a^b − ∫_a^b β
        let first =
            (b - k) * self.beta_eps(b) - (a - k) * self.beta_eps(a) - (self.beta_primitive(b) - self.beta_primitive(a));
        let val = match sign {
            Truncation::Plus => first,
            Truncation::Minus => -first,
        };
        val.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enthalpy(eps: f64) -> RegularizedEnthalpy {
        RegularizedEnthalpy::new(eps).unwrap()
    }

    #[test]
    fn graph_values() {
        assert_eq!(beta_graph(1.0), GraphValue { lo: 1.0, hi: 1.0 });
        assert_eq!(beta_graph(-1.0), GraphValue { lo: 0.0, hi: 0.0 });
        let z = beta_graph(0.0);
        assert!(z.contains(0.0) && z.contains(1.0) && !z.is_singleton());
    }

    #[test]
    fn beta_eps_saturates_outside_layer() {
        let e = enthalpy(0.1);
        assert_eq!(e.beta_eps(0.2), 1.0);
        assert_eq!(e.beta_eps(-0.2), 0.0);
        assert_eq!(e.beta_eps(0.1), 1.0);
        assert_eq!(e.beta_eps(-0.1), 0.0);
        assert_eq!(e.beta_eps(0.0), 0.5);
    }

    #[test]
    fn derivative_vanishes_outside_support() {
        let e = enthalpy(0.1);
        assert_eq!(e.beta_eps_prime(0.15), 0.0);
        assert_eq!(e.beta_eps_prime(-0.1), 0.0);
        let z = e.normalization_constant();
        let expected = z * (-1.0f64).exp() / 0.1;
        assert!((e.beta_eps_prime(0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn b_examples() {
        let e = enthalpy(0.1);
        assert_eq!(e.b(0.5), 1.5);
        assert_eq!(e.b(-0.5), -0.5);
        assert!((e.b_inverse(1.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn b_inverse_rejects_nothing_on_wide_range() {
        let e = enthalpy(0.05);
        for i in -2000..=2000 {
            let xi = i as f64 * 0.005;
            let back = e.b_inverse(e.b(xi)).unwrap();
            assert!((back - xi).abs() <= 1e-10, "xi={xi} back={back}");
        }
    }

    #[test]
    fn primitive_matches_beta_by_differences() {
        let e = enthalpy(0.1);
        let h = 1e-5;
        for i in -30..=30 {
            let xi = i as f64 * 0.005 + 0.0013;
            let fd = (e.beta_primitive(xi + h) - e.beta_primitive(xi - h)) / (2.0 * h);
            assert!((fd - e.beta_eps(xi)).abs() < 1e-8, "xi={xi}");
        }
        // Far to the right the primitive is ξ exactly up to rounding.
        assert!((e.beta_primitive(3.0) - 3.0).abs() < 1e-14);
        assert_eq!(e.beta_primitive(-3.0), 0.0);
    }

    #[test]
    fn rescaled_graph_matches_definition() {
        let e = enthalpy(0.1);
        let m = 2.5;
        let r = e.rescaled(m).unwrap();
        for i in -50..=50 {
            let xi = i as f64 * 0.002;
            assert!((r.beta_eps(xi) - e.beta_eps(m * xi) / m).abs() < 1e-15);
            assert!((r.b(xi) - e.b(m * xi) / m).abs() < 1e-15);
        }
    }

    #[test]
    fn latent_energy_vanishes_beyond_layer() {
        let e = enthalpy(0.05);
        assert_eq!(e.truncated_latent_energy(0.7, 0.05, Truncation::Plus), 0.0);
        assert_eq!(e.truncated_latent_energy(-0.7, -0.05, Truncation::Minus), 0.0);
        // Crossing the whole layer from below releases ∫β′(ξ)(ξ−k) = −k for even ψ.
        let k = -0.2;
        let v = e.truncated_latent_energy(0.4, k, Truncation::Plus);
        assert!((v - (-k)).abs() < 1e-12, "{v}");
        let v = e.truncated_latent_energy(-0.4, 0.3, Truncation::Minus);
        assert!((v - 0.3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(RegularizedEnthalpy::new(0.0).is_err());
        assert!(RegularizedEnthalpy::new(1.0).is_err());
        assert!(RegularizedEnthalpy::new(f64::NAN).is_err());
    }
}

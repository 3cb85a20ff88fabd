use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Exponents;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorConstants {
    pub m1: f64,
    pub n1: f64,
    pub m2: f64,
    pub n2: f64,
}

impl Default for InteriorConstants {
    fn default() -> Self {
        Self {
            m1: 4.0,
            n1: 16.0,
            m2: 4.0,
            n2: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConstants {
    pub m1: f64,
    pub n1: f64,
    pub l1: f64,
    pub m2: f64,
    pub n2: f64,
    pub l2: f64,
    pub n0: f64,
}

impl Default for BoundaryConstants {
    fn default() -> Self {
        Self {
            m1: 4.0,
            n1: 4.0,
            l1: 4.0,
            m2: 4.0,
            n2: 4.0,
            l2: 4.0,
            n0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConstants {
    pub n: f64,
}

impl Default for InitialConstants {
    fn default() -> Self {
        Self { n: 4.0 }
    }
}

/// Inputs of the interior, lateral and initial iteration sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationParams {
    pub exps: Exponents,
    pub epsilon: f64,
    pub omega0: f64,
    pub rho0: f64,
    /// Maximal number of generated levels after level 0.
    pub levels: usize,
    #[serde(default)]
    pub interior: InteriorConstants,
    #[serde(default)]
    pub boundary: BoundaryConstants,
    #[serde(default)]
    pub initial: InitialConstants,
}

impl IterationParams {
    pub fn new(exps: Exponents, epsilon: f64, omega0: f64, rho0: f64, levels: usize) -> Self {
        Self {
            exps,
            epsilon,
            omega0,
            rho0,
            levels,
            interior: InteriorConstants::default(),
            boundary: BoundaryConstants::default(),
            initial: InitialConstants::default(),
        }
    }

    /// m = max{7/8, 2^{−s}}.
    pub fn m(&self) -> f64 {
        (7.0f64 / 8.0).max(2f64.powf(-self.exps.s))
    }

    fn validate_common(&self) -> Result<()> {
        self.exps.validate()?;
        if !(self.omega0 >= 1.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "ω₀ must be at least 1, got {}",
                self.omega0
            )));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidParams(format!("ρ₀ must be positive, got {}", self.rho0)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "ε must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn require_at_least_4(names: &[(&str, f64)]) -> Result<()> {
    let bad: Vec<String> = names
        .iter()
        .filter(|(_, v)| !(*v >= 4.0))
        .map(|(n, v)| format!("{n} = {v} is below 4"))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(bad.join("; ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Interior,
    Boundary,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceLevel {
    pub level: usize,
    pub rho: f64,
    pub omega: f64,
    /// θ_i for interior and initial levels, θ̄_i for boundary levels.
    pub theta: f64,
}

impl SequenceLevel {
    /// Time length of the cylinder, θρ^{sp}.
    pub fn duration(&self, sp: f64) -> f64 {
        self.theta * self.rho.powf(sp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceTable {
    pub kind: SequenceKind,
    pub levels: Vec<SequenceLevel>,
    /// Levels i with ρ_{i}^{sp}θ_{i} > ρ_{i−1}^{sp}θ_{i−1} or ρ_i > ρ_{i−1}.
    pub nesting_violations: Vec<usize>,
    /// True when the recursion stopped because ω reached its floor.
    pub stabilized: bool,
}

impl SequenceTable {
    pub fn nested(&self) -> bool {
        self.nesting_violations.is_empty()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.omega).collect()
    }
}

fn nesting_violations(levels: &[SequenceLevel], sp: f64) -> Vec<usize> {
    levels
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0], w[1]);
            b.rho > a.rho || b.duration(sp) > a.duration(sp) * (1.0 + 1e-12)
        })
        .map(|w| w[1].level)
        .collect()
}

fn build<F>(params: &IterationParams, kind: SequenceKind, floor: f64, theta_exp: f64, mut next: F) -> SequenceTable
where
    F: FnMut(&SequenceLevel) -> (f64, f64),
{
    let theta = |omega: f64| (omega / 4.0).powf(theta_exp);
    let mut levels = vec![SequenceLevel {
        level: 0,
        rho: params.rho0,
        omega: params.omega0,
        theta: theta(params.omega0),
    }];
    let mut stabilized = false;
    for i in 0..params.levels {
        let cur = levels[i];
        let (rho, omega) = next(&cur);
        levels.push(SequenceLevel {
            level: i + 1,
            rho,
            omega,
            theta: theta(omega),
        });
        if floor > 0.0 && omega == cur.omega && omega <= floor {
            stabilized = true;
            break;
        }
    }
    let nesting_violations = nesting_violations(&levels, params.exps.sp());
    SequenceTable {
        kind,
        levels,
        nesting_violations,
        stabilized,
    }
}

/// ρ_{i+1} = f₁(ω_i)ρ_i, ω_{i+1} = max{ω_i f₂(ω_i), ω_i/2^s, 4ε}, θ_i = (ω_i/4)^{2−p},
/// with f₁(x) = x^{M₁}/(N₁ω₀^{M₁}) and f₂(x) = 1 − x^{M₂}/(N₂ω₀^{M₂}).
pub fn interior_sequences(params: &IterationParams) -> Result<SequenceTable> {
    params.validate_common()?;
    let c = params.interior;
    require_at_least_4(&[("M1", c.m1), ("N1", c.n1), ("M2", c.m2), ("N2", c.n2)])?;
    let (w0, s, floor) = (params.omega0, params.exps.s, 4.0 * params.epsilon);
    let f1 = |x: f64| x.powf(c.m1) / (c.n1 * w0.powf(c.m1));
    let f2 = |x: f64| 1.0 - x.powf(c.m2) / (c.n2 * w0.powf(c.m2));
    let scale = 2f64.powf(-s);
    Ok(build(
        params,
        SequenceKind::Interior,
        floor,
        2.0 - params.exps.p,
        |cur| {
            let w = cur.omega;
            (f1(w) * cur.rho, (w * f2(w)).max(w * scale).max(floor))
        },
    ))
}

/// ρ_{i+1} = f₁(ω_i)ρ_i, ω_{i+1} = max{ω_i f₂(ω_i), ω_i/2^s, 2 osc_{Q_i} g, 4ε},
/// θ̄_i = (ω_i/4)^{1−p}, with f₁(x) = x^{M₁}/(N₀N₁ω₀^{L₁}) and
/// f₂(x) = 1 − x^{M₂}/(N₂ω₀^{L₂}). `osc_g` receives (ρ_i, θ̄_i).
pub fn boundary_sequences<G>(params: &IterationParams, osc_g: G) -> Result<SequenceTable>
where
    G: Fn(f64, f64) -> f64,
{
    params.validate_common()?;
    let c = params.boundary;
    require_at_least_4(&[
        ("M1", c.m1),
        ("N1", c.n1),
        ("L1", c.l1),
        ("M2", c.m2),
        ("N2", c.n2),
        ("L2", c.l2),
    ])?;
    if !(c.n0 >= 1.0) {
        return Err(Error::InvalidParams(format!("N0 must be at least 1, got {}", c.n0)));
    }
    if c.m1 > c.l1 || c.m2 > c.l2 {
        return Err(Error::InvalidParams(
            "boundary constants need M1 ≤ L1 and M2 ≤ L2".into(),
        ));
    }
    let (w0, s, floor) = (params.omega0, params.exps.s, 4.0 * params.epsilon);
    let f1 = |x: f64| x.powf(c.m1) / (c.n0 * c.n1 * w0.powf(c.l1));
    let f2 = |x: f64| 1.0 - x.powf(c.m2) / (c.n2 * w0.powf(c.l2));
    let scale = 2f64.powf(-s);
    Ok(build(
        params,
        SequenceKind::Boundary,
        floor,
        1.0 - params.exps.p,
        |cur| {
            let w = cur.omega;
            let g = 2.0 * osc_g(cur.rho, cur.theta);
            (f1(w) * cur.rho, (w * f2(w)).max(w * scale).max(g).max(floor))
        },
    ))
}

/// ρ_{i+1} = ρ_i/N, ω_{i+1} = max{mω_i, 2 osc_{Q_i} g}, θ_i = (ω_i/4)^{2−p},
/// m = max{7/8, 2^{−s}}. `osc_g` receives (ρ_i, θ_i).
pub fn initial_sequences<G>(params: &IterationParams, osc_g: G) -> Result<SequenceTable>
where
    G: Fn(f64, f64) -> f64,
{
    params.validate_common()?;
    let n = params.initial.n;
    require_at_least_4(&[("N", n)])?;
    let m = params.m();
    Ok(build(params, SequenceKind::Initial, 0.0, 2.0 - params.exps.p, |cur| {
        (cur.rho / n, (m * cur.omega).max(2.0 * osc_g(cur.rho, cur.theta)))
    }))
}

fn check_lemma_constants(m2: f64, n2: f64, l2: f64) -> Result<()> {
    require_at_least_4(&[("M2", m2), ("N2", n2), ("L2", l2)])?;
    if l2 < m2 {
        return Err(Error::InvalidParams(format!("need L2 ≥ M2, got L2 = {l2}, M2 = {m2}")));
    }
    Ok(())
}

/// ε = ½ min{1/(2M₂), log₂(M₂N₂√(N₂²−1) / (M₂N₂√(N₂²−1) − 1))}.
pub fn lemma_iter_epsilon(m2: f64, n2: f64, l2: f64) -> Result<f64> {
    check_lemma_constants(m2, n2, l2)?;
    let q = m2 * n2 * (n2 * n2 - 1.0).sqrt();
    let log_term = (q / (q - 1.0)).log2();
    Ok(0.5 * (1.0 / (2.0 * m2)).min(log_term))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaIterVerdict {
    pub m2: f64,
    pub n2: f64,
    pub l2: f64,
    pub omega0: f64,
    pub epsilon: f64,
    pub checked: usize,
    /// First n with a_n < a_{n−1} g(a_{n−1}).
    pub first_violation: Option<usize>,
    /// min over n of a_n / (a_{n−1} g(a_{n−1})) − 1.
    pub min_margin: f64,
}

impl LemmaIterVerdict {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Brute-force check of a_n ≥ a_{n−1} g(a_{n−1}) for n = 1..n_max with
/// a_n = ω₀^{L₂/M₂}(1 + n)^{−ε} and g(x) = 1 − x^{M₂}/(N₂ω₀^{L₂}).
/// `epsilon` overrides the closed-form value when given.
pub fn lemma_iter_verify(
    m2: f64,
    n2: f64,
    l2: f64,
    omega0: f64,
    n_max: usize,
    epsilon: Option<f64>,
) -> Result<LemmaIterVerdict> {
    let closed = lemma_iter_epsilon(m2, n2, l2)?;
    if !(omega0 >= 1.0 && omega0.is_finite()) {
        return Err(Error::InvalidParams(format!("ω₀ must be at least 1, got {omega0}")));
    }
    let eps = epsilon.unwrap_or(closed);
    let base = omega0.powf(l2 / m2);
    let denom = n2 * omega0.powf(l2);
    let a = |n: usize| base * (1.0 + n as f64).powf(-eps);
    let mut first_violation = None;
    let mut min_margin = f64::INFINITY;
    let mut prev = a(0);
    for n in 1..=n_max {
        let cur = a(n);
        let rhs = prev * (1.0 - prev.powf(m2) / denom);
        let margin = cur / rhs - 1.0;
        min_margin = min_margin.min(margin);
        if cur < rhs && first_violation.is_none() {
            first_violation = Some(n);
        }
        prev = cur;
    }
    Ok(LemmaIterVerdict {
        m2,
        n2,
        l2,
        omega0,
        epsilon: eps,
        checked: n_max,
        first_violation,
        min_margin,
    })
}

/// Every (M₂, N₂, L₂) ∈ {4, 8, 16}³ with L₂ ≥ M₂ crossed with ω₀ ∈ {1, 2, 10}.
pub fn lemma_iter_grid(n_max: usize) -> Result<Vec<LemmaIterVerdict>> {
    const VALUES: [f64; 3] = [4.0, 8.0, 16.0];
    let mut cases = Vec::new();
    for m2 in VALUES {
        for n2 in VALUES {
            for l2 in VALUES.into_iter().filter(|&l| l >= m2) {
                for omega0 in [1.0, 2.0, 10.0] {
                    cases.push((m2, n2, l2, omega0));
                }
            }
        }
    }
    cases
        .into_par_iter()
        .map(|(m2, n2, l2, w)| lemma_iter_verify(m2, n2, l2, w, n_max, None))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricReport {
    pub c: f64,
    pub b: f64,
    pub alpha: f64,
    pub a0: f64,
    /// c^{−1/α} b^{−1/α²}.
    pub threshold: f64,
    /// A_0, …, A_n of the worst-case recursion A_{i+1} = c bⁱ A_i^{1+α}
    /// (∞ once the iterate overflows).
    pub sequence: Vec<f64>,
    /// First i with A_i > A₀ b^{−i/α}.
    pub first_violation: Option<usize>,
    /// Some iterate exceeded the largest finite double.
    pub diverged: bool,
    /// b = 1: the bound A₀b^{−i/α} = A₀ certifies boundedness only.
    pub boundedness_only: bool,
}

impl GeometricReport {
    pub fn below_threshold(&self) -> bool {
        self.a0 <= self.threshold * (1.0 + 1e-12)
    }

    /// Pass iff A₀ is at most the threshold and the decay bound holds.
    pub fn passed(&self) -> bool {
        self.below_threshold() && self.first_violation.is_none()
    }
}

/// Seeded draws (c, b, α) with c ∈ [1, 10], b ∈ (1, 4], α ∈ [0.1, 2].
pub fn geometric_cases(seed: u64, count: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = rng.gen_range(1.0..=10.0);
            let b = 4.0 - rng.gen_range(0.0..3.0);
            let alpha = rng.gen_range(0.1..=2.0);
            (c, b, alpha)
        })
        .collect()
}

/// Iterates the equality case of A_{i+1} ≤ c bⁱ A_i^{1+α} in log space.
pub fn geometric_convergence(c: f64, b: f64, alpha: f64, a0: f64, n_max: usize) -> Result<GeometricReport> {
    if !(c >= 1.0 && b >= 1.0 && alpha > 0.0 && a0 >= 0.0) || ![c, b, alpha, a0].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need c, b ≥ 1, α > 0, A₀ ≥ 0; got c = {c}, b = {b}, α = {alpha}, A₀ = {a0}"
        )));
    }
    let (lc, lb) = (c.ln(), b.ln());
    let l_thr = -lc / alpha - lb / (alpha * alpha);
    let threshold = l_thr.exp();
    let mut sequence = Vec::with_capacity(n_max + 1);
    let mut first_violation = None;
    let mut diverged = false;
    if a0 == 0.0 {
        sequence.resize(n_max + 1, 0.0);
    } else {
        // Write l_i = ln A_i = l₀ − i·ln b/α + δ_i. Substituting into the
        // recursion gives δ₀ = 0, δ_{i+1} = (1 + α)δ_i + κ with
        // κ = α(l₀ − ln threshold), so the bound is exactly δ_i ≤ 0. The
        // equality case is an unstable orbit that amplifies a one-ulp offset
        // by (1 + α)^i, hence κ is snapped to 0 within rounding of the threshold.
        let l0 = a0.ln();
        let mut kappa = alpha * (l0 - l_thr);
        if kappa.abs() <= 1e-12 * alpha * (1.0 + l_thr.abs()) {
            kappa = 0.0;
        }
        let mut delta = 0.0f64;
        for i in 0..=n_max {
            let l = l0 - i as f64 * lb / alpha + delta;
            if delta > 0.0 && first_violation.is_none() {
                first_violation = Some(i);
            }
            if l > f64::MAX.ln() {
                diverged = true;
            }
            sequence.push(l.exp());
            if l == f64::INFINITY || delta == f64::INFINITY {
                sequence.resize(n_max + 1, f64::INFINITY);
                diverged = true;
                break;
            }
            delta = (1.0 + alpha) * delta + kappa;
        }
    }
    Ok(GeometricReport {
        c,
        b,
        alpha,
        a0,
        threshold,
        sequence,
        first_violation,
        diverged,
        boundedness_only: b == 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> IterationParams {
        IterationParams::new(Exponents::new(0.5, 3.0).unwrap(), 0.01, 1.0, 1.0, 30)
    }

    #[test]
    fn interior_first_level() {
        let t = interior_sequences(&params()).unwrap();
        let l1 = t.levels[1];
        assert!((l1.omega - 0.875).abs() < 1e-15);
        assert!((l1.rho - 1.0 / 16.0).abs() < 1e-15);
        assert!((t.levels[0].theta - 4.0).abs() < 1e-15);
        assert!(t.nested());
    }

    #[test]
    fn interior_monotone_and_floored() {
        let mut p = params();
        p.epsilon = 0.1;
        p.levels = 400;
        let t = interior_sequences(&p).unwrap();
        for w in t.levels.windows(2) {
            assert!(w[1].omega <= w[0].omega);
            assert!(w[1].rho < w[0].rho);
            assert!(w[1].omega >= 0.4 - 1e-15);
            assert!(w[1].omega >= w[0].omega * 2f64.powf(-0.5) - 1e-15);
        }
        assert!(t.stabilized);
    }

    #[test]
    fn constants_below_four_are_rejected() {
        let mut p = params();
        p.interior.n2 = 3.0;
        assert!(matches!(interior_sequences(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn boundary_theta_and_constant_datum() {
        let t = boundary_sequences(&params(), |_, _| 0.0).unwrap();
        assert!((t.levels[0].theta - 16.0).abs() < 1e-12);
        assert!(t.nested());
    }

    #[test]
    fn initial_geometric_decay() {
        let t = initial_sequences(&params(), |_, _| 0.0).unwrap();
        for (i, l) in t.levels.iter().enumerate() {
            let expect = 0.875f64.powi(i as i32);
            assert!((l.omega - expect).abs() < 1e-14 * expect.max(1.0));
            assert!((l.rho - 4f64.powi(-(i as i32))).abs() < 1e-15);
        }
        let forced = initial_sequences(&params(), |rho, _| if rho < 0.02 && rho > 0.01 { 0.4 } else { 0.0 }).unwrap();
        // ρ₃ = 1/64 triggers the datum branch at level 4
        assert_eq!(forced.levels[4].omega, 0.8);
    }

    #[test]
    fn lemma_epsilon_values() {
        let e = lemma_iter_epsilon(4.0, 4.0, 4.0).unwrap();
        let q = 16.0 * 15f64.sqrt();
        let oracle = 0.5 * (q / (q - 1.0)).ln() / 2f64.ln();
        assert!((e - oracle).abs() < 1e-15);
        assert!((e - 0.0117355).abs() < 2e-7);
        assert!(lemma_iter_epsilon(4.0, 8.0, 4.0).unwrap() < e);
        assert!(lemma_iter_epsilon(8.0, 4.0, 4.0).is_err());
    }

    #[test]
    fn tech1_examples() {
        let r = geometric_convergence(1.0, 2.0, 1.0, 0.5, 20).unwrap();
        for (i, a) in r.sequence.iter().enumerate() {
            assert!((a - 2f64.powi(-(i as i32 + 1))).abs() < 1e-12 * a);
        }
        assert!(r.passed());
        let z = geometric_convergence(3.0, 2.0, 0.5, 0.0, 10).unwrap();
        assert!(z.sequence.iter().all(|&a| a == 0.0));
        let bad = geometric_convergence(1.0, 2.0, 1.0, 0.75, 50).unwrap();
        assert!(bad.diverged && !bad.passed());
    }
}

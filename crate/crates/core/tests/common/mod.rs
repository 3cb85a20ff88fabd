#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stefan_core::config::{preset, ProblemSpec};
use stefan_core::LatticeProblem;

/// A preset on a coarser box: `nodes` points spanning [−1, 1].
pub fn coarse_spec(name: &str, nodes: usize, horizon: f64) -> ProblemSpec {
    let mut spec = preset(name).unwrap();
    spec.lattice.origin = vec![-1.0];
    spec.lattice.h = 2.0 / (nodes - 1) as f64;
    spec.lattice.nodes = vec![nodes];
    spec.horizon = horizon;
    spec
}

pub fn coarse(name: &str, nodes: usize, horizon: f64) -> LatticeProblem {
    coarse_spec(name, nodes, horizon).build().unwrap()
}

/// Uniform samples in [lo, hi] for the Ω nodes, data elsewhere.
pub fn random_state(problem: &LatticeProblem, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem
        .u0
        .iter()
        .zip(problem.omega_mask.iter())
        .map(|(&u, &inside)| if inside { rng.gen_range(lo..=hi) } else { u })
        .collect()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

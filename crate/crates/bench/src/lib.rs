//! Fixtures shared by the benchmarks.

use stefan_core::config::preset;
use stefan_core::LatticeProblem;

/// melt1d with `nodes` lattice points over the same box [−1, 1].
pub fn melt_problem(nodes: usize) -> LatticeProblem {
    let mut spec = preset("melt1d").expect("preset exists");
    spec.lattice.h = 2.0 / (nodes - 1) as f64;
    spec.lattice.nodes = vec![nodes];
    spec.build().expect("preset builds")
}

/// A smooth field on the Ω nodes of `problem`, exterior nodes at the datum.
pub fn wavy_field(problem: &LatticeProblem) -> Vec<f64> {
    (0..problem.grid.len())
        .map(|i| {
            if problem.omega_mask[i] {
                (7.0 * problem.grid.coord(i)[0]).sin() * 0.8
            } else {
                problem.u0[i]
            }
        })
        .collect()
}

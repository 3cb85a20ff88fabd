mod common;

use proptest::prelude::*;

use common::{coarse, random_state, sup_diff};
use stefan_core::analysis::Cylinder;
use stefan_core::lattice::apply_operator;
use stefan_core::solver::{
    caccioppoli_audit, comparison_defect, max_principle_check, normalization_defect, read_trajectory, solve,
    weak_residual, write_trajectory, RadialCutoff, Stepper,
};
use stefan_core::{Error, SolverConfig, Truncation};

#[test]
fn constants_are_stationary() {
    let problem = coarse("constant1d", 33, 0.05);
    let traj = solve(&problem, &SolverConfig::fixed(10)).unwrap();
    for f in &traj.fields {
        assert!(f.iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }
}

#[test]
fn residual_recomputed_from_the_operator() {
    let problem = coarse("twophase1d", 41, 0.02);
    let config = SolverConfig::fixed(8);
    let traj = solve(&problem, &config).unwrap();
    let enthalpy = &problem.enthalpy;
    for m in 0..traj.len() - 1 {
        let t = traj.times[m + 1];
        let dt = t - traj.times[m];
        let lu = apply_operator(
            &traj.grid,
            &traj.field(m + 1),
            &traj.omega_mask,
            t,
            traj.kernel.clone(),
            traj.exps,
            traj.far_field,
        )
        .unwrap();
        let nodes = (0..traj.grid.len()).filter(|&i| traj.omega_mask[i]);
        let r = nodes
            .zip(&lu)
            .map(|(i, l)| (enthalpy.b(traj.fields[m + 1][i]) - enthalpy.b(traj.fields[m][i]) + dt * l).abs())
            .fold(0.0, f64::max);
        assert!(r <= 10.0 * config.newton_tol, "step {m}: {r}");
        assert!(traj.diagnostics[m].residual <= config.newton_tol);
    }
}

/// One implicit step against the explicit update b(v) = b(u) − Δt·𝓛u: the
/// two agree to O(Δt²), so halving Δt divides the gap by about four.
#[test]
fn single_step_is_consistent_to_second_order() {
    let mut problem = coarse("twophase1d", 33, 0.01);
    problem.enthalpy = stefan_core::RegularizedEnthalpy::new(0.3).unwrap();
    let u0 = problem.u0.clone();
    let lu = apply_operator(
        &problem.grid,
        &stefan_core::Field::new(
            u0.clone(),
            stefan_core::ExteriorRule::Datum {
                datum: problem.g.clone(),
                t: 0.0,
            },
        ),
        &problem.omega_mask,
        0.0,
        problem.kernel.clone(),
        problem.exps,
        problem.far_field,
    )
    .unwrap();
    let idx: Vec<usize> = (0..problem.grid.len()).filter(|&i| problem.omega_mask[i]).collect();
    let mut stepper = Stepper::new(&problem, SolverConfig::default()).unwrap();
    let mut gaps = Vec::new();
    for dt in [2e-4, 1e-4, 5e-5] {
        let (v, _) = stepper.step(&u0, 0.0, dt).unwrap();
        let gap = idx
            .iter()
            .zip(&lu)
            .map(|(&i, l)| {
                let explicit = problem.enthalpy.b_inverse(problem.enthalpy.b(u0[i]) - dt * l).unwrap();
                (v[i] - explicit).abs()
            })
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{gaps:?}");
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let problem = coarse("twophase1d", 25, 0.01);
    let mut stepper = Stepper::new(&problem, SolverConfig::default()).unwrap();
    for seed in 0..10 {
        let u = random_state(&problem, seed, -1.0, 1.0);
        let objective = stepper.objective(&problem.u0, 0.0, 1e-3).unwrap();
        let v: Vec<f64> = (0..u.len()).filter(|&i| problem.omega_mask[i]).map(|i| u[i]).collect();
        let grad = objective.gradient(&v);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for a in 0..v.len() {
            let mut hi = v.clone();
            let mut lo = v.clone();
            hi[a] += h;
            lo[a] -= h;
            let fd = (objective.value(&hi) - objective.value(&lo)) / (2.0 * h);
            worst = worst.max((fd - grad[a]).abs() / grad[a].abs().max(1.0));
        }
        assert!(worst < 1e-6, "seed {seed}: {worst}");
    }
}

#[test]
fn hessian_is_symmetric_positive_definite() {
    let problem = coarse("twophase1d", 25, 0.01);
    let mut stepper = Stepper::new(&problem, SolverConfig::default()).unwrap();
    let u = random_state(&problem, 3, -0.2, 0.2);
    let objective = stepper.objective(&problem.u0, 0.0, 1e-3).unwrap();
    let v: Vec<f64> = (0..u.len()).filter(|&i| problem.omega_mask[i]).map(|i| u[i]).collect();
    let hess = objective.hessian(&v);
    assert!((&hess - hess.transpose()).amax() < 1e-12 * hess.amax());
    assert!(hess.clone().cholesky().is_some());
}

#[test]
fn p_energy_never_increases() {
    let problem = coarse("melt1d", 41, 0.05);
    let traj = solve(&problem, &SolverConfig::fixed(20)).unwrap();
    for w in traj.diagnostics.windows(2) {
        assert!(
            w[1].energy <= w[0].energy * (1.0 + 1e-12) + 1e-14,
            "{} > {}",
            w[1].energy,
            w[0].energy
        );
    }
    assert!(traj.diagnostics.iter().all(|d| d.objective_decrease >= -1e-14));
}

#[test]
fn maximum_principle_and_normalization() {
    let problem = coarse("twophase1d", 33, 0.02);
    let config = SolverConfig::fixed(10);
    let traj = solve(&problem, &config).unwrap();
    let report = max_principle_check(&traj);
    assert!(report.passed(config.newton_tol), "{report:?}");
    assert!(report.sup_u <= 0.8 + 1e-9);
    for m in [0.5, 1.0, 2.0, 5.0] {
        let d = normalization_defect(&problem, &traj, m, &config).unwrap();
        assert!(d <= 1e-9, "M = {m}: {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ordered_data_give_ordered_solutions(seed in 0u64..1000, lift in 0.0f64..0.3, shift in 0.0f64..0.3) {
        let lower_problem = coarse("twophase1d", 25, 0.01);
        let mut upper_problem = lower_problem.shifted(shift);
        let bumps = random_state(&lower_problem, seed, 0.0, lift);
        for (i, u) in upper_problem.u0.iter_mut().enumerate() {
            if lower_problem.omega_mask[i] {
                *u += bumps[i];
            }
        }
        let config = SolverConfig::fixed(5);
        let lower = solve(&lower_problem, &config).unwrap();
        let upper = solve(&upper_problem, &config).unwrap();
        prop_assert!(comparison_defect(&lower, &upper).unwrap() <= 1e-9);
    }
}

fn interior_bump(x: stefan_core::Point) -> f64 {
    let r = x[0].abs();
    if r < 0.4 {
        (1.0 - (r / 0.4).powi(2)).powi(3)
    } else {
        0.0
    }
}

#[test]
fn weak_residual_vanishes_for_static_test_functions() {
    // summation by parts turns the identity into the scheme itself
    let problem = coarse("twophase1d", 33, 0.02);
    let traj = solve(&problem, &SolverConfig::fixed(8)).unwrap();
    assert!(weak_residual(&traj, |x, _| interior_bump(x)).unwrap() < 1e-12);
}

#[test]
fn weak_residual_is_first_order_in_time() {
    let problem = coarse("melt1d", 33, 0.02);
    let phi = |x: stefan_core::Point, t: f64| interior_bump(x) * (1.0 + 50.0 * t);
    let r: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| weak_residual(&solve(&problem, &SolverConfig::fixed(n)).unwrap(), phi).unwrap())
        .collect();
    assert!(r[0] > 1e-8, "{r:?}");
    for w in r.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.5).contains(&ratio), "{r:?}");
    }
}

#[test]
fn weak_residual_rejects_exterior_support() {
    let problem = coarse("twophase1d", 33, 0.02);
    let traj = solve(&problem, &SolverConfig::fixed(2)).unwrap();
    let err = weak_residual(&traj, |_, _| 1.0);
    assert!(matches!(err, Err(Error::InvalidParams(_))));
}

#[test]
fn caccioppoli_above_the_layer_has_no_latent_part() {
    let problem = coarse("melt1d", 41, 0.05);
    let traj = solve(&problem, &SolverConfig::fixed(20)).unwrap();
    let eps = problem.epsilon();
    let cutoff = RadialCutoff::new([0.3, 0.0], 0.1, 0.2).unwrap();
    let cyl = Cylinder::new([0.3, 0.0], 0.05, 0.2, 1.0).unwrap();
    let above = caccioppoli_audit(&traj, eps, Truncation::Plus, &cutoff, &cyl).unwrap();
    assert_eq!(above.latent_total, 0.0);
    let inside = caccioppoli_audit(&traj, 0.0, Truncation::Minus, &cutoff, &cyl).unwrap();
    assert!(inside.latent_total > 0.0);
    assert!(inside.ratio.is_finite() && inside.lhs >= 0.0 && inside.rhs >= 0.0);
}

#[test]
fn trajectory_directory_round_trip() {
    let problem = coarse("twophase1d", 33, 0.01);
    let traj = solve(&problem, &SolverConfig::fixed(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_trajectory(&traj, dir.path(), serde_json::json!({"note": "x"})).unwrap();
    let (manifest, fields) = read_trajectory(dir.path()).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(manifest.times, traj.times);
    for (a, b) in fields.iter().zip(&traj.fields) {
        assert_eq!(sup_diff(a, b), 0.0);
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

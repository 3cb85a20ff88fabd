mod common;

use proptest::prelude::*;

use common::coarse;
use stefan_core::analysis::{
    boundary_sequences, cylinder_ladder, fit_log_modulus, fit_power_envelope, initial_sequences, interior_sequences,
    ladder_oscillations, level_set_fraction, measure_density, oscillation, sample_omega0, LevelPredicate, ModulusModel,
};
use stefan_core::lattice::{tail, TimeSlice};
use stefan_core::solver::solve;
use stefan_core::{Cylinder, Exponents, ExteriorRule, Field, Grid, IterationParams, SolverConfig, Trajectory};

fn shell_field(grid: &Grid, x0: f64, rho: f64) -> Field {
    let values = (0..grid.len())
        .map(|i| {
            let d = (grid.coord(i)[0] - x0).abs();
            if d >= rho && d <= 2.0 * rho {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Field::new(values, ExteriorRule::Zero)
}

/// Tail of the indicator of ρ ≤ |y − x₀| ≤ 2ρ in one dimension:
/// ((2/sp)(1 − 2^{−sp}))^{1/(p−1)}.
fn shell_tail(exps: Exponents) -> f64 {
    let sp = exps.s * exps.p;
    (2.0 / sp * (1.0 - 2f64.powf(-sp))).powf(1.0 / (exps.p - 1.0))
}

#[test]
fn tail_converges_under_refinement() {
    let exps = Exponents::new(0.5, 3.0).unwrap();
    let rho = 0.1;
    let exact = shell_tail(exps);
    let mut errors = Vec::new();
    for k in [8usize, 16, 32, 64] {
        let h = rho / k as f64;
        let half = 4 * k;
        let grid = Grid::new_1d(-(half as f64) * h, h, 2 * half + 1, 1.0).unwrap();
        let field = shell_field(&grid, 0.0, rho);
        let slices = [TimeSlice { t: 0.0, field: &field }];
        let got = tail(&grid, &slices, [0.0, 0.0], rho, (0.0, 0.0), exps, |v| v).unwrap();
        errors.push((got - exact).abs() / exact);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[3] < 0.02, "{errors:?}");
}

#[test]
fn tail_takes_the_supremum_over_the_window() {
    let grid = Grid::new_1d(-1.0, 1.0 / 64.0, 129, 4.0).unwrap();
    let exps = Exponents::new(0.5, 3.0).unwrap();
    let small = Field::constant(129, 0.5);
    let large = Field::constant(129, 1.0);
    let slices = [TimeSlice { t: 0.0, field: &small }, TimeSlice { t: 1.0, field: &large }];
    let both = tail(&grid, &slices, [0.0, 0.0], 0.1, (0.0, 1.0), exps, |v| v).unwrap();
    let first = tail(&grid, &slices, [0.0, 0.0], 0.1, (0.0, 0.5), exps, |v| v).unwrap();
    assert!((both - 2.0 * first).abs() < 1e-12 * both);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tail_is_absolutely_homogeneous(values in prop::collection::vec(-1.0f64..1.0, 65), lambda in -4.0f64..4.0, far in -1.0f64..1.0) {
        let grid = Grid::new_1d(-1.0, 1.0 / 32.0, 65, 3.0).unwrap();
        let exps = Exponents::new(0.4, 2.5).unwrap();
        let base = Field::new(values.clone(), ExteriorRule::Constant(far));
        let scaled = Field::new(values.iter().map(|v| lambda * v).collect(), ExteriorRule::Constant(lambda * far));
        let a = tail(&grid, &[TimeSlice { t: 0.0, field: &base }], [0.1, 0.0], 0.2, (0.0, 0.0), exps, |v| v).unwrap();
        let b = tail(&grid, &[TimeSlice { t: 0.0, field: &scaled }], [0.1, 0.0], 0.2, (0.0, 0.0), exps, |v| v).unwrap();
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn half_line_density(k in 2usize..40) {
        let h = 1.0 / 64.0;
        let grid = Grid::new_1d(-1.0, h, 129, 2.0).unwrap();
        let mask: Vec<bool> = (0..129).map(|i| grid.coord(i)[0] > 0.0).collect();
        let r = k as f64 * h * 1.37;
        let report = measure_density(&grid, &mask, [0.0, 0.0], &[r]).unwrap();
        prop_assert!((report.fractions[0].1 - 0.5).abs() <= 2.0 * h / r);
    }

    #[test]
    fn nested_cylinders_have_nonincreasing_oscillation(seed in 0u64..10_000, theta in 0.2f64..5.0) {
        let problem = coarse("twophase1d", 33, 0.04);
        let fields: Vec<Vec<f64>> = (0..9).map(|m| common::random_state(&problem, seed + m, -1.0, 1.0)).collect();
        let times: Vec<f64> = (0..9).map(|m| m as f64 * 0.005).collect();
        let traj = Trajectory::from_samples(&problem, times, fields, Vec::new()).unwrap();
        let ladder = cylinder_ladder([0.1, 0.0], 0.04, 0.5, 0.8, 8, theta).unwrap();
        let osc = ladder_oscillations(&traj, &ladder).unwrap();
        prop_assert!(osc.windows(2).all(|w| w[1].1 <= w[0].1));
        for (cyl, (r, o)) in ladder.iter().zip(&osc) {
            prop_assert_eq!(cyl.rho, *r);
            prop_assert_eq!(oscillation(&traj, cyl).unwrap(), *o);
        }
    }

    #[test]
    fn level_sets_partition_the_cylinder(seed in 0u64..10_000, level in -1.0f64..1.0) {
        let problem = coarse("twophase1d", 33, 0.04);
        let fields: Vec<Vec<f64>> = (0..5).map(|m| common::random_state(&problem, seed + m, -1.0, 1.0)).collect();
        let times: Vec<f64> = (0..5).map(|m| m as f64 * 0.01).collect();
        let traj = Trajectory::from_samples(&problem, times, fields, Vec::new()).unwrap();
        let cyl = Cylinder::new([0.0, 0.0], 0.04, 0.3, 1.0).unwrap();
        let below = level_set_fraction(&traj, &cyl, LevelPredicate::Below(level)).unwrap();
        let above = level_set_fraction(&traj, &cyl, LevelPredicate::Above(level)).unwrap();
        prop_assert!((below + above - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_modulus_fit_recovers_exact_samples(c in 0.2f64..5.0, varsigma in 0.05f64..3.0, eps in 0.0f64..0.02) {
        let rho0 = 0.2;
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let r = rho0 * 0.7f64.powi(k);
                (r, c * (1.0 + (rho0 / r).ln()).powf(-varsigma / 2.0) + 4.0 * eps)
            })
            .collect();
        let fit = fit_log_modulus(&samples, eps, rho0, ModulusModel::Interior).unwrap();
        prop_assert!((fit.c - c).abs() < 1e-9 * c);
        prop_assert!((fit.varsigma - varsigma).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn sequences_nest_for_every_omega0(omega0 in 1.0f64..20.0, eps in 0.0f64..0.2) {
        let exps = Exponents::new(0.5, 3.0).unwrap();
        let params = IterationParams::new(exps, eps, omega0, 0.1, 10);
        let interior = interior_sequences(&params).unwrap();
        prop_assert!(interior.nested());
        let omegas = interior.omegas();
        prop_assert!(omegas.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(omegas.iter().all(|&w| w >= 4.0 * eps - 1e-15));
        let initial = initial_sequences(&params, |_, _| 0.0).unwrap();
        prop_assert!(initial.nested());
        let boundary = boundary_sequences(&params, |_, _| 0.0).unwrap();
        prop_assert!(boundary.omegas().windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn power_envelope_bounds_its_data() {
    let values: Vec<f64> = (0..10)
        .map(|i| 3.0 * (1.0 + i as f64).powf(-0.7) * (1.0 + 0.05 * (i as f64).sin()))
        .collect();
    let env = fit_power_envelope(&values).unwrap();
    assert!(env.bounds(&values));
    assert!((env.exponent - 0.7).abs() < 0.05);
    assert!(fit_power_envelope(&values[..2]).is_err());
}

#[test]
fn empty_cylinders_are_reported() {
    let problem = coarse("twophase1d", 33, 0.02);
    let traj = solve(&problem, &SolverConfig::fixed(4)).unwrap();
    let future = Cylinder::new([0.0, 0.0], 5.0, 0.1, 1.0).unwrap();
    assert!(matches!(
        oscillation(&traj, &future),
        Err(stefan_core::Error::EmptyCylinder)
    ));
    assert!(sample_omega0(&traj) >= 1.0);
}

use std::sync::Arc;

use proptest::prelude::*;

use stefan_core::lattice::{apply_operator, phi_p, ConstantKernel, FarField, KernelSpec, SinSumKernel};
use stefan_core::{Exponents, ExteriorRule, Field, Grid};

fn unit() -> KernelSpec {
    Arc::new(ConstantKernel::unit())
}

/// Direct summation over every lattice point of ℝ: all box nodes, points
/// beyond the box within R_∞ of x_i, and the closed-form far tail
/// 2R_∞^{−sp}/sp carrying the far value.
fn brute_force_1d(grid: &Grid, field: &Field, mask: &[bool], exps: Exponents) -> Vec<f64> {
    let h = grid.h();
    let r_inf = grid.r_inf();
    let sp = exps.s * exps.p;
    let n = grid.len() as i64;
    let reach = (r_inf / h + 1e-9).floor() as i64;
    let mut out = Vec::new();
    for (i, _) in mask.iter().enumerate().filter(|(_, &inside)| inside) {
        let ui = field.values[i];
        let mut acc = 0.0;
        for j in (i as i64 - reach - n)..=(i as i64 + reach + n) {
            if j == i as i64 {
                continue;
            }
            let d = ((j - i as i64).abs()) as f64 * h;
            let inside = (0..n).contains(&j);
            if !inside && d > r_inf * (1.0 + 1e-12) {
                continue;
            }
            let uj = if inside {
                field.values[j as usize]
            } else {
                field.exterior.value([grid.origin()[0] + j as f64 * h, 0.0])
            };
            acc += phi_p(ui - uj, exps.p) * h / d.powf(1.0 + sp);
        }
        let far = field.exterior.far_value();
        acc += phi_p(ui - far, exps.p) * 2.0 * r_inf.powf(-sp) / sp;
        out.push(acc);
    }
    out
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn setup_1d(values: &[f64]) -> (Grid, Vec<bool>) {
    let n = values.len();
    let grid = Grid::new_1d(-1.0, 2.0 / (n - 1) as f64, n, 2.5).unwrap();
    let mask: Vec<bool> = (0..n).map(|i| i > 1 && i + 2 < n).collect();
    (grid, mask)
}

#[test]
fn matches_direct_summation_with_far_field() {
    let n = 21;
    let (grid, mask) = setup_1d(&vec![0.0; n]);
    let values: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).sin() + 0.1 * i as f64).collect();
    let field = Field::new(values, ExteriorRule::Constant(0.4));
    for exps in [
        Exponents::new(0.5, 3.0).unwrap(),
        Exponents::new(0.3, 2.5).unwrap(),
        Exponents::new(0.8, 4.0).unwrap(),
    ] {
        let got = apply_operator(&grid, &field, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        let want = brute_force_1d(&grid, &field, &mask, exps);
        assert_eq!(got.len(), want.len());
        assert!(rel_close(&got, &want, 1e-12), "{exps:?}: {got:?} vs {want:?}");
    }
}

#[test]
fn two_dimensional_box_sum() {
    let grid = Grid::new_2d([0.0, 0.0], 0.25, 5, 5, 10.0).unwrap();
    let values: Vec<f64> = (0..25).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.5).collect();
    let mask: Vec<bool> = (0..25).map(|i| i == 12 || i == 7).collect();
    let field = Field::new(values.clone(), ExteriorRule::Zero);
    let exps = Exponents::new(0.5, 3.0).unwrap();
    let got = apply_operator(&grid, &field, &mask, 0.0, unit(), exps, FarField::Disabled).unwrap();
    let hn = 0.0625;
    let mut want = Vec::new();
    for i in [7usize, 12] {
        let xi = grid.coord(i);
        let mut acc = 0.0;
        for j in 0..25 {
            if j != i {
                let xj = grid.coord(j);
                let d = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
                acc += phi_p(values[i] - values[j], 3.0) * hn / d.powf(3.5);
            }
        }
        want.push(acc);
    }
    assert!(rel_close(&got, &want, 1e-12), "{got:?} vs {want:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn odd_under_negation(values in prop::collection::vec(-2.0f64..2.0, 15), g in -1.0f64..1.0, s in 0.1f64..0.9, p in 2.1f64..4.0) {
        let (grid, mask) = setup_1d(&values);
        let exps = Exponents::new(s, p).unwrap();
        let kernel: KernelSpec = Arc::new(SinSumKernel { amplitude: 0.3, lambda: 1.0 });
        let plus = Field::new(values.clone(), ExteriorRule::Constant(g));
        let minus = Field::new(values.iter().map(|v| -v).collect(), ExteriorRule::Constant(-g));
        let a = apply_operator(&grid, &plus, &mask, 0.0, kernel.clone(), exps, FarField::Enabled).unwrap();
        let b = apply_operator(&grid, &minus, &mask, 0.0, kernel, exps, FarField::Enabled).unwrap();
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        prop_assert!(rel_close(&a, &neg, 1e-13));
    }

    #[test]
    fn invariant_under_constant_shift(values in prop::collection::vec(-2.0f64..2.0, 15), g in -1.0f64..1.0, c in -3.0f64..3.0) {
        let (grid, mask) = setup_1d(&values);
        let exps = Exponents::new(0.5, 3.0).unwrap();
        let base = Field::new(values.clone(), ExteriorRule::Constant(g));
        let shifted = Field::new(values.iter().map(|v| v + c).collect(), ExteriorRule::Constant(g + c));
        let a = apply_operator(&grid, &base, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        let b = apply_operator(&grid, &shifted, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        prop_assert!(rel_close(&a, &b, 1e-9));
    }

    #[test]
    fn homogeneous_of_degree_p_minus_one(values in prop::collection::vec(-2.0f64..2.0, 15), lambda in 0.1f64..5.0, p in 2.1f64..4.0) {
        let (grid, mask) = setup_1d(&values);
        let exps = Exponents::new(0.5, p).unwrap();
        let base = Field::new(values.clone(), ExteriorRule::Constant(0.3));
        let scaled = Field::new(values.iter().map(|v| lambda * v).collect(), ExteriorRule::Constant(lambda * 0.3));
        let a = apply_operator(&grid, &base, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        let b = apply_operator(&grid, &scaled, &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        let expect: Vec<f64> = a.iter().map(|v| v * lambda.powf(p - 1.0)).collect();
        prop_assert!(rel_close(&b, &expect, 1e-11));
    }

    #[test]
    fn monotone_in_the_exterior(values in prop::collection::vec(-2.0f64..2.0, 15), g in -1.0f64..1.0, bump in 0.0f64..1.0) {
        // raising the exterior datum lowers 𝓛u at every Ω node
        let (grid, mask) = setup_1d(&values);
        let exps = Exponents::new(0.5, 3.0).unwrap();
        let mut raised = values.clone();
        for (v, &inside) in raised.iter_mut().zip(&mask) {
            if !inside {
                *v += bump;
            }
        }
        let a = apply_operator(&grid, &Field::new(values.clone(), ExteriorRule::Constant(g)), &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        let b = apply_operator(&grid, &Field::new(raised, ExteriorRule::Constant(g + bump)), &mask, 0.0, unit(), exps, FarField::Enabled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(*y <= *x + 1e-12 * (1.0 + x.abs()));
        }
    }
}

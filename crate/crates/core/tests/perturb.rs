use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use punctura::bsop::SearchRange;
use punctura::geometry::{Curve, CurveSpec};
use punctura::perturb::{self, StateGroup, SweepConfig, SweepReport, Verdict};
use punctura::Error;

fn group(values: &[f64]) -> StateGroup {
    let m = values.len();
    StateGroup {
        mu: -1.0,
        values: values.to_vec(),
        gram: DMatrix::identity(m, m),
    }
}

/// A one-state report for `lambda(eps)`, with the first-order law
/// predicting `slope` per unit measure. Derived fields follow their
/// definitions.
fn synthetic(beta: f64, slope: f64, levels: usize, lambda: impl Fn(f64) -> f64) -> SweepReport {
    let mu = lambda(0.0);
    let epsilons: Vec<f64> = (0..levels).map(|k| 0.05 / (1u64 << k) as f64).collect();
    let measures: Vec<f64> = epsilons.iter().map(|e| 2.0 * e).collect();
    let lambdas: Vec<Vec<Option<f64>>> = epsilons.iter().map(|&e| vec![Some(lambda(e))]).collect();
    let predicted: Vec<Vec<f64>> = measures.iter().map(|m| vec![mu + slope * m]).collect();
    let residuals: Vec<Vec<Option<f64>>> = (0..levels)
        .map(|k| vec![Some(lambdas[k][0].unwrap() - predicted[k][0])])
        .collect();
    let remainder_ratios = (0..levels)
        .map(|k| vec![Some(residuals[k][0].unwrap().abs() / measures[k])])
        .collect();
    let series: Vec<(f64, f64)> = epsilons.iter().map(|&e| (e, lambda(e) - mu)).collect();
    SweepReport {
        beta,
        epsilons,
        measures,
        mu: vec![mu],
        groups: vec![vec![0]],
        s_values: vec![slope / beta],
        predicted_slopes: vec![slope],
        group_slopes: vec![slope],
        lambdas,
        predicted,
        residuals,
        remainder_ratios,
        fitted_slope: vec![perturb::fit_slope(&series)],
        raw_slope: vec![perturb::raw_slope(&series)],
        group_fitted_slopes: vec![perturb::fit_slope(&series)],
        truncated: vec![false],
    }
}

#[test]
fn coupling_examples() {
    let v = 0.37;
    let cm = perturb::coupling_matrix(&group(&[v])).unwrap();
    assert_eq!(cm.s_values, vec![v * v]);
    assert_eq!(cm.entries[(0, 0)], v * v);

    let cm = perturb::coupling_matrix(&group(&[v, 0.0])).unwrap();
    assert!(cm.s_values[0].abs() < 1e-16 && (cm.s_values[1] - v * v).abs() < 1e-16);

    let r = v / 2f64.sqrt();
    let cm = perturb::coupling_matrix(&group(&[r, r])).unwrap();
    assert!(cm.s_values[0].abs() < 1e-16);
    assert!((cm.s_values[1] - v * v).abs() < 1e-15);
    assert!((cm.trace() - v * v).abs() < 1e-15);
    // The rotated basis puts all of phi(0) on the last member.
    let w = cm.rotation.transpose() * DVector::from_column_slice(&[r, r]);
    assert!(w[0].abs() < 1e-15 && (w[1].abs() - v).abs() < 1e-15);
}

#[test]
fn coupling_refuses_non_orthonormal_groups() {
    let mut g = group(&[0.1, 0.2]);
    g.gram[(0, 1)] = 1e-6;
    g.gram[(1, 0)] = 1e-6;
    assert!(matches!(perturb::coupling_matrix(&g), Err(Error::Precondition(_))));
    let mut g = group(&[0.1, 0.2]);
    g.gram = DMatrix::identity(3, 3);
    assert!(matches!(perturb::coupling_matrix(&g), Err(Error::Precondition(_))));
}

#[test]
fn predict_examples() {
    let cm = perturb::coupling_matrix(&group(&[0.2])).unwrap();
    let p = perturb::predict(5.0, &cm);
    assert!((p[0].s - 0.04).abs() < 1e-16);
    assert!((p[0].slope_vs_measure - 0.2).abs() < 1e-15);

    let cm = perturb::coupling_matrix(&group(&[0.0, 0.3])).unwrap();
    let p1 = perturb::predict(2.0, &cm);
    let p2 = perturb::predict(4.0, &cm);
    assert_eq!(p1[0].slope_vs_measure, 0.0);
    for (a, b) in p1.iter().zip(&p2) {
        assert_eq!(2.0 * a.slope_vs_measure, b.slope_vs_measure);
        assert!(a.slope_vs_measure >= 0.0);
    }
}

#[test]
fn linear_data_pass() {
    let r = synthetic(1.0, 0.5, 5, |e| -1.0 + e);
    let v = &perturb::remainder_diagnostic(&r).unwrap()[0];
    assert_eq!(v.verdict, Verdict::Pass);
    assert!((v.fitted_slope.unwrap() - 0.5).abs() < 1e-12);
    assert!(v.relative_error.unwrap() < 1e-12);
}

#[test]
fn quadratic_remainder_passes_with_exponent_two() {
    let r = synthetic(1.0, 0.5, 5, |e| -1.0 + e + 3.0 * e * e);
    let v = &perturb::remainder_diagnostic(&r).unwrap()[0];
    assert_eq!(v.verdict, Verdict::Pass);
    let p = v.remainder_exponent.unwrap();
    assert!((p - 2.0).abs() < 1e-10, "p = {p}");
}

#[test]
fn slowly_vanishing_remainder_is_a_threshold_case() {
    // c eps / |ln eps| is o(eps), but only just: the ratios decrease
    // (like 1 / |ln eps|) while staying far above 10% of the slope.
    let r = synthetic(1.0, 0.5, 5, |e| -1.0 + e + e / e.ln().abs());
    let ratios: Vec<f64> = r.remainder_ratios.iter().map(|x| x[0].unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    let v = &perturb::remainder_diagnostic(&r).unwrap()[0];
    assert_eq!(v.verdict, Verdict::Fail);
    // Local exponent 1 + log2(ln eps_k / ln eps_k+1), about 1.2 here.
    assert!(v.remainder_exponent.unwrap() < 1.3);
    // The same shape with a small constant clears the threshold.
    let r = synthetic(1.0, 0.5, 5, |e| -1.0 + e + 0.05 * e / e.ln().abs());
    assert_eq!(perturb::remainder_diagnostic(&r).unwrap()[0].verdict, Verdict::Pass);
}

#[test]
fn diagnostic_needs_four_levels() {
    let r = synthetic(1.0, 0.5, 3, |e| -1.0 + e);
    assert!(matches!(perturb::remainder_diagnostic(&r), Err(Error::Precondition(_))));
}

#[test]
fn truncated_branches_are_reported_as_such() {
    let mut r = synthetic(1.0, 0.5, 5, |e| -1.0 + e + 10.0 * e * e);
    r.lambdas[0][0] = None;
    r.residuals[0][0] = None;
    r.remainder_ratios[0][0] = None;
    r.truncated[0] = true;
    assert_eq!(perturb::remainder_diagnostic(&r).unwrap()[0].verdict, Verdict::Truncated);
}

#[test]
fn sweep_config_and_segment_are_refused() {
    let seg = CurveSpec::Segment { half_length: 10.0 };
    assert!(matches!(perturb::default_eps0(&seg), Err(Error::Hypothesis(_))));
    let c = Curve::build(seg, perturb::sweep_mesh(32, 0.1, 4, 16)).unwrap();
    let cfg = SweepConfig {
        eps0: 0.1,
        levels: 4,
        search: SearchRange::for_curve(&seg, 1.0),
    };
    assert!(matches!(perturb::sweep(&c, 1.0, &cfg), Err(Error::Hypothesis(_))));
    for levels in [2, 13] {
        let bad = SweepConfig { levels, ..cfg };
        assert!(matches!(bad.validate(), Err(Error::Precondition(_))));
    }
}

#[test]
fn circle_ground_state_sweep() {
    // beta R < 2 binds only m = 0.
    let spec = CurveSpec::Circle { radius: 1.0 };
    let eps0 = perturb::default_eps0(&spec).unwrap();
    assert!((eps0 - 2.0 * PI / 64.0).abs() < 1e-16);
    let levels = 5;
    let curve = Curve::build(spec, perturb::sweep_mesh(16, eps0, levels, 16)).unwrap();
    let cfg = SweepConfig {
        eps0,
        levels,
        search: SearchRange::for_curve(&spec, 1.5),
    };
    let r = perturb::sweep(&curve, 1.5, &cfg).unwrap();
    assert_eq!(r.mu.len(), 1);
    // Definition echoes.
    for k in 0..levels {
        assert_eq!(r.measures[k], 2.0 * r.epsilons[k]);
        assert_eq!(r.predicted[k][0], r.mu[0] + r.predicted_slopes[0] * r.measures[k]);
        assert_eq!(r.residuals[k][0], Some(r.lambdas[k][0].unwrap() - r.predicted[k][0]));
    }
    // Removing attractive support raises the energy, more for larger eps.
    let chain: Vec<f64> = r.lambdas.iter().map(|x| x[0].unwrap()).chain([r.mu[0]]).collect();
    assert!(chain.windows(2).all(|w| w[1] <= w[0]));
    let v = &perturb::remainder_diagnostic(&r).unwrap()[0];
    assert_eq!(v.verdict, Verdict::Pass, "{v:?}");
    assert!(v.relative_error.unwrap() < 0.05, "{v:?}");
}

#[test]
fn form_defect_is_second_order() {
    let spec = CurveSpec::Circle { radius: 1.0 };
    let eps0 = 2.0 * PI / 64.0;
    let curve = Curve::build(spec, perturb::sweep_mesh(32, eps0, 4, 16)).unwrap();
    // A constant vanishes identically: the removed arc has length 2 eps.
    let d = perturb::form_defect(&curve, 5.0, |_| 1.0, eps0).unwrap();
    assert!(d.abs() < 1e-13, "{d:e}");
    let check = perturb::form_level_check(&curve, 5.0, |x| (x[0] + 2.0 * x[1]).cos(), eps0, 4).unwrap();
    assert!(check.exponent.unwrap() >= 1.9, "{check:?}");
}

fn rotation(m: usize, seed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |r, c| seed[(r * m + c) % seed.len()] + if r == c { 2.0 } else { 0.0 }).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coupling_is_rank_one_and_basis_free(
        values in prop::collection::vec(-1.0f64..1.0, 1..5),
        seed in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let g = group(&values);
        let cm = perturb::coupling_matrix(&g).unwrap();
        let m = values.len();
        let trace: f64 = values.iter().map(|v| v * v).sum();
        prop_assert!((cm.trace() - trace).abs() <= 1e-14);
        prop_assert!(cm.s_values.iter().all(|&s| s >= 0.0));
        prop_assert!((cm.s_values[m - 1] - trace).abs() <= 1e-10 * trace.max(1e-300));
        if m > 1 {
            prop_assert!(cm.s_values[m - 2] <= 1e-8 * trace);
        }
        let rot = rotation(m, &seed);
        let other = perturb::coupling_matrix(&g.rotated(&rot)).unwrap();
        for (a, b) in cm.s_values.iter().zip(&other.s_values) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn fit_recovers_any_log_corrected_series(
        slope in 0.01f64..5.0, a in -10.0f64..10.0, b in -10.0f64..10.0,
    ) {
        let data: Vec<(f64, f64)> = (0..5)
            .map(|k| 0.1 / (1u64 << k) as f64)
            .map(|e| (e, 2.0 * e * (slope + a * e * e.ln() + b * e)))
            .collect();
        let fit = perturb::fit_slope(&data).unwrap();
        prop_assert!((fit - slope).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
    }
}

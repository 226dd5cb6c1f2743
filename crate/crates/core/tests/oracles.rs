use std::f64::consts::PI;

use proptest::prelude::*;

use punctura::bsop::{self, SearchRange};
use punctura::geometry::{Curve, CurveSpec, MeshParams};
use punctura::oracles::{self, GridSpec};
use punctura::{specfun, Error};

// Roots of beta R I_m(kappa R) K_m(kappa R) = 1, frozen from mpmath at 30 digits.
const CIRCLE_BETA5: [f64; 3] = [2.5608613440339274, 2.2894577803410515, 1.4396039240184819];

fn circle(radius: f64, panels: usize) -> Curve {
    let mesh = MeshParams {
        base_panels: panels,
        min_spacing: 2.0 * PI * radius / panels as f64,
        ..MeshParams::default()
    };
    Curve::build(CurveSpec::Circle { radius }, mesh).unwrap()
}

#[test]
fn circle_roots_match_frozen_values() {
    for (m, &k) in CIRCLE_BETA5.iter().enumerate() {
        let got = oracles::circle_exact(1.0, 5.0, m as u32).unwrap();
        assert!((got / k - 1.0).abs() < 1e-13, "m = {m}: {got}");
    }
    assert_eq!(oracles::circle_exact(1.0, 5.0, 3), None);
    let weak = oracles::circle_exact(1.0, 0.1, 0).unwrap();
    assert!((weak / 5.098_044_293_245_211_9e-5 - 1.0).abs() < 1e-12);
    let big = oracles::circle_exact(2.0, 1.5, 0).unwrap();
    assert!((big / 0.789_961_765_621_220_15 - 1.0).abs() < 1e-13);
    // beta R <= 2m: no mode.
    assert_eq!(oracles::circle_exact(1.0, 2.0, 1), None);
    assert_eq!(oracles::circle_exact(0.5, 4.0, 1), None);
    assert_eq!(oracles::circle_exact(1.0, 0.0, 0), None);
}

#[test]
fn circle_spectrum_lists_modes_deepest_first() {
    let modes = oracles::circle_spectrum(1.0, 5.0);
    assert_eq!(modes.len(), 3);
    assert_eq!(modes.iter().map(|m| m.multiplicity).sum::<usize>(), 5);
    assert!(modes.windows(2).all(|w| w[0].lambda < w[1].lambda));
    for m in &modes {
        assert_eq!(m.lambda, -m.kappa * m.kappa);
    }
    assert!((oracles::line_threshold(1.0) + 0.25).abs() < 1e-16);
}

#[test]
fn empty_box_matches_discrete_laplacian() {
    let grid = GridSpec { half_width: 3.0, h: 0.1 };
    let c = circle(1.0, 8);
    let ev = oracles::grid_spectrum(&grid, &c, 0.0, &c.puncture(0.0).unwrap(), 2).unwrap();
    let t = |j: f64| 4.0 / (grid.h * grid.h) * (j * PI * grid.h / (4.0 * grid.half_width)).sin().powi(2);
    let exact = [2.0 * t(1.0), t(1.0) + t(2.0)];
    for (a, b) in ev.iter().zip(exact) {
        assert!((a / b - 1.0).abs() < 1e-7, "{a} vs {b}");
    }
    // And the continuum value to O(h^2).
    assert!((ev[0] / (2.0 * (PI / 6.0).powi(2)) - 1.0).abs() < 1e-3);
}

#[test]
fn grid_binds_the_segment_between_threshold_and_zero() {
    let spec = CurveSpec::Segment { half_length: 10.0 };
    let c = Curve::build(spec, MeshParams::default()).unwrap();
    let grid = GridSpec { half_width: 14.0, h: 0.1 };
    let ev = oracles::grid_spectrum(&grid, &c, 1.0, &c.puncture(0.0).unwrap(), 1).unwrap();
    assert!(ev[0] > -0.25 && ev[0] < 0.0, "{}", ev[0]);
    let s = bsop::solve_spectrum(&c, 1.0, &c.puncture(0.0).unwrap(), SearchRange::for_curve(&spec, 1.0)).unwrap();
    assert!((ev[0] - s.states[0].lambda).abs() < 0.05 * s.states[0].lambda.abs());
}

#[test]
fn grid_input_errors() {
    let c = circle(1.0, 8);
    let p = c.puncture(0.0).unwrap();
    let bad = [
        GridSpec { half_width: 3.0, h: 0.0 },
        GridSpec { half_width: 3.0, h: 0.07 },
        GridSpec { half_width: 0.1, h: 0.2 },
    ];
    for g in bad {
        assert!(matches!(g.validate(), Err(Error::Domain(_))), "{g:?}");
    }
    // The curve must stay clear of the walls.
    let small = GridSpec { half_width: 2.0, h: 0.1 };
    assert!(matches!(oracles::grid_spectrum(&small, &c, 1.0, &p, 1), Err(Error::Domain(_))));
    let grid = GridSpec { half_width: 3.0, h: 0.1 };
    assert!(matches!(oracles::grid_spectrum(&grid, &c, 1.0, &p, 0), Err(Error::Domain(_))));
    assert!(matches!(oracles::grid_spectrum(&grid, &c, -1.0, &p, 1), Err(Error::Domain(_))));
}

#[test]
fn potential_norm_matches_the_plane_quadrature() {
    let c = circle(1.0, 32);
    let s = bsop::solve_spectrum(&c, 5.0, &c.puncture(0.0).unwrap(), SearchRange::for_curve(&CurveSpec::Circle { radius: 1.0 }, 5.0)).unwrap();
    let st = &s.states[0];
    let coarse = oracles::norm_crosscheck(&c, st, &GridSpec { half_width: 5.0, h: 0.05 }).unwrap();
    let fine = oracles::norm_crosscheck(&c, st, &GridSpec { half_width: 5.0, h: 0.025 }).unwrap();
    assert!(fine < 1e-2 && fine < coarse, "{coarse:e} -> {fine:e}");
    // The quadrature is quadratic in the density.
    let grid = GridSpec { half_width: 5.0, h: 0.1 };
    let a = oracles::grid_norm_sq(&c, st, &grid).unwrap();
    let b = oracles::grid_norm_sq(&c, &st.scaled(3.0), &grid).unwrap();
    assert!((b / a - 9.0).abs() < 1e-12);
}

#[test]
fn plane_quadrature_refuses_ray_tails() {
    let spec = CurveSpec::SmoothedBrokenLine {
        half_angle: 0.3,
        smoothing_radius: 1.0,
        half_length: 20.0,
    };
    let c = Curve::build(spec, MeshParams::default()).unwrap();
    let s = bsop::solve_spectrum(&c, 1.0, &c.puncture(0.0).unwrap(), SearchRange::for_curve(&spec, 1.0)).unwrap();
    let grid = GridSpec { half_width: 25.0, h: 0.5 };
    assert!(matches!(
        oracles::norm_crosscheck(&c, &s.states[0], &grid),
        Err(Error::Precondition(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circle_roots_solve_their_equation(r in 0.2f64..5.0, beta in 0.05f64..20.0, m in 0u32..4) {
        match oracles::circle_exact(r, beta, m) {
            Some(k) => {
                let x = k * r;
                let g = beta * r * specfun::in_(m, x) * specfun::kn(m, x);
                prop_assert!((g - 1.0).abs() < 1e-10, "g = {}", g);
            }
            None => prop_assert!(m >= 1 && beta * r <= 2.0 * m as f64),
        }
    }

    #[test]
    fn circle_roots_scale(r in 0.2f64..5.0, beta in 2.5f64..20.0) {
        // kappa(R, beta) = kappa(1, beta R) / R.
        let a = oracles::circle_exact(r, beta, 1).unwrap();
        let b = oracles::circle_exact(1.0, beta * r, 1).unwrap() / r;
        prop_assert!((a / b - 1.0).abs() < 1e-12);
    }
}

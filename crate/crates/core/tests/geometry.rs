use std::f64::consts::PI;

use proptest::prelude::*;

use punctura::geometry::{validate_hypotheses, Curve, CurveSpec, MeshParams, Smoothness, StraightnessParams};
use punctura::perturb::sweep_mesh;
use punctura::Error;

const BROKEN: CurveSpec = CurveSpec::SmoothedBrokenLine {
    half_angle: 0.3,
    smoothing_radius: 1.0,
    half_length: 20.0,
};

fn weight_sum(c: &Curve) -> f64 {
    c.nodes().iter().map(|n| n.w).sum()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn circle_length_and_nodes() {
    let mesh = MeshParams {
        base_panels: 256,
        ..MeshParams::default()
    };
    let c = Curve::build(CurveSpec::Circle { radius: 1.0 }, mesh).unwrap();
    assert!((c.total_length() - 2.0 * PI).abs() < 1e-12);
    assert!((weight_sum(&c) - 2.0 * PI).abs() < 1e-12);
    assert!(c.nodes().windows(2).all(|w| w[1].s > w[0].s));
    for n in c.nodes() {
        // Centre (0, 1): every node lies exactly on the circle.
        assert!((dist(n.x, [0.0, 1.0]) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn segment_length_and_straightness() {
    let c = Curve::build(CurveSpec::Segment { half_length: 10.0 }, MeshParams::default()).unwrap();
    assert!((c.total_length() - 20.0).abs() < 1e-13);
    assert!((weight_sum(&c) - 20.0).abs() < 1e-12);
    let params = StraightnessParams { d: 1.0, rho: 1.0, w: 0.5 };
    let rep = validate_hypotheses(&c, 1000, params).unwrap();
    assert_eq!(rep.c_estimate, 1.0);
    assert!(rep.is_straight_line);
    assert_eq!(rep.smoothness, Smoothness::Analytic);
}

#[test]
fn broken_line_length_matches_polyline() {
    // Oracle: chord sum over 10^6 samples of the parametrization.
    let spec = BROKEN;
    let half = spec.half_extent();
    let n = 1_000_000;
    let mut prev = spec.position(-half);
    let mut length = 0.0;
    for i in 1..=n {
        let p = spec.position(-half + 2.0 * half * i as f64 / n as f64);
        length += dist(p, prev);
        prev = p;
    }
    assert!((length - spec.total_length()).abs() < 1e-8, "{length} vs {}", spec.total_length());
    let closed = 2.0 * (20.0 - 0.3f64.tan()) + 2.0 * 0.3;
    assert!((spec.total_length() - closed).abs() < 1e-12);
    let c = Curve::build(spec, MeshParams::default()).unwrap();
    assert!((weight_sum(&c) - closed).abs() < 1e-12 * closed);
}

#[test]
fn broken_line_hypotheses() {
    let c = Curve::build(BROKEN, MeshParams::default()).unwrap();
    // 1415 samples give about 10^6 pairs.
    let rep = validate_hypotheses(&c, 1415, StraightnessParams { d: 1.0, rho: 1.0, w: 0.5 }).unwrap();
    assert!(rep.straightness_margin >= 0.0, "{rep:?}");
    assert!(rep.c_estimate >= 0.3f64.cos() - 1e-3 && rep.c_estimate <= 1.0, "{rep:?}");
    assert!(!rep.is_straight_line);
    assert_eq!(rep.smoothness, Smoothness::C11);
}

#[test]
fn hypotheses_refuse_closed_curves_and_bad_input() {
    let circle = Curve::build(CurveSpec::Circle { radius: 1.0 }, MeshParams::default()).unwrap();
    let p = StraightnessParams { d: 1.0, rho: 1.0, w: 0.5 };
    assert!(matches!(validate_hypotheses(&circle, 1000, p), Err(Error::Precondition(_))));
    let seg = Curve::build(CurveSpec::Segment { half_length: 10.0 }, MeshParams::default()).unwrap();
    assert!(matches!(validate_hypotheses(&seg, 999, p), Err(Error::Precondition(_))));
}

#[test]
fn invalid_curves_and_meshes_are_rejected() {
    let bad = [
        CurveSpec::Circle { radius: 0.0 },
        CurveSpec::Segment { half_length: -1.0 },
        CurveSpec::SmoothedBrokenLine {
            half_angle: 1.6,
            smoothing_radius: 1.0,
            half_length: 20.0,
        },
        CurveSpec::SmoothedBrokenLine {
            half_angle: 0.3,
            smoothing_radius: 30.0,
            half_length: 20.0,
        },
    ];
    for spec in bad {
        assert!(matches!(Curve::build(spec, MeshParams::default()), Err(Error::Geometry(_))), "{spec:?}");
    }
    let mesh = MeshParams {
        grading_ratio: 5.0,
        ..MeshParams::default()
    };
    assert!(matches!(Curve::build(CurveSpec::Circle { radius: 1.0 }, mesh), Err(Error::Mesh(_))));
}

#[test]
fn puncture_examples() {
    let seg = Curve::build(CurveSpec::Segment { half_length: 10.0 }, sweep_mesh(32, 0.1, 4, 16)).unwrap();
    let none = seg.puncture(0.0).unwrap();
    assert_eq!(none.active.len(), seg.len());
    assert!((none.retained_weight - 20.0).abs() < 1e-12);
    let p = seg.puncture(0.1).unwrap();
    assert_eq!(p.measure, 0.2);
    assert!((p.retained_weight - 19.8).abs() < 1e-12);

    let circle = Curve::build(CurveSpec::Circle { radius: 1.0 }, sweep_mesh(32, 0.01, 3, 16)).unwrap();
    let p = circle.puncture(0.01).unwrap();
    assert!((p.measure - 0.02).abs() < 1e-18);
    let removed: Vec<_> = (0..circle.len()).filter(|i| !p.active.contains(i)).collect();
    assert!(!removed.is_empty());
    let sup = removed.iter().map(|&i| dist(circle.nodes()[i].x, [0.0, 0.0])).fold(0.0, f64::max);
    assert!(sup <= 2.0 * (0.005f64).sin() * 2.0);
}

#[test]
fn unresolvable_puncture_is_a_mesh_error() {
    let c = Curve::build(CurveSpec::Circle { radius: 1.0 }, sweep_mesh(32, 0.01, 3, 16)).unwrap();
    assert!(matches!(c.puncture(0.0123), Err(Error::Mesh(_))));
    assert!(matches!(c.puncture(4.0), Err(Error::Mesh(_))));
    assert!(matches!(c.puncture(-0.01), Err(Error::Mesh(_))));
}

#[test]
fn refinement_is_consistent() {
    let spec = CurveSpec::Circle { radius: 1.0 };
    let build = |panels| {
        let mesh = MeshParams {
            base_panels: panels,
            order: 4,
            min_spacing: 2.0 * PI / panels as f64,
            ..MeshParams::default()
        };
        Curve::build(spec, mesh).unwrap()
    };
    let (coarse, fine) = (build(16), build(32));
    assert!((coarse.total_length() - fine.total_length()).abs() <= 1e-12);
    let err = |c: &Curve| {
        (0..997)
            .map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / 997.0)
            .map(|s| dist(c.interpolate_position(s), spec.position(s)))
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(&coarse), err(&fine));
    // Interpolation of degree 3 on panels of size h: at least O(h^2).
    assert!(e2 <= e1 / 4.0, "{e1:e} -> {e2:e}");
}

#[test]
fn curve_csv_export() {
    let c = Curve::build(CurveSpec::Segment { half_length: 1.0 }, MeshParams::default()).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,x,y,w"));
    assert_eq!(lines.count(), c.len());
}

fn specs() -> impl Strategy<Value = CurveSpec> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|radius| CurveSpec::Circle { radius }),
        (2.0f64..20.0).prop_map(|half_length| CurveSpec::Segment { half_length }),
        (0.1f64..1.2, 0.5f64..2.0).prop_map(|(half_angle, smoothing_radius)| CurveSpec::SmoothedBrokenLine {
            half_angle,
            smoothing_radius,
            half_length: 15.0,
        }),
        (0.1f64..1.2, 0.5f64..2.0).prop_map(|(half_angle, smoothing_radius)| CurveSpec::MollifiedBrokenLine {
            half_angle,
            smoothing_radius,
            half_length: 15.0,
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn puncture_is_additive_and_local(spec in specs(), frac in 0.01f64..0.2) {
        let levels = 5;
        let eps0 = frac * spec.half_extent();
        let c = Curve::build(spec, sweep_mesh(16, eps0, levels, 8)).unwrap();
        let total = c.total_length();
        prop_assert!((weight_sum(&c) - total).abs() <= 1e-12 * total);
        // One fitted constant per curve bounds how far removed nodes sit
        // from the origin; chord <= arc gives 1.
        for k in 0..levels {
            let eps = eps0 / (1u64 << k) as f64;
            let p = c.puncture(eps).unwrap();
            prop_assert!((p.retained_weight + 2.0 * eps - total).abs() <= 1e-12 * total);
            let mut keep = vec![false; c.len()];
            for &i in &p.active { keep[i] = true; }
            for (n, kept) in c.nodes().iter().zip(&keep) {
                prop_assert_eq!(*kept, n.s.abs() >= eps);
                if !kept {
                    prop_assert!(dist(n.x, [0.0, 0.0]) <= eps * (1.0 + 1e-12));
                }
            }
        }
    }
}

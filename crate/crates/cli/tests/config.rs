use std::path::PathBuf;

use proptest::prelude::*;

use punctura::geometry::CurveSpec;
use punctura_cli::config::ExperimentConfig;

const CIRCLE: &str = "beta = 5\noutputs = out\n\n[curve]\nkind = circle\nradius = 1\n";

fn error_of(text: &str) -> (Option<usize>, String) {
    let e = ExperimentConfig::parse(text).unwrap_err();
    (e.line, e.field)
}

#[test]
fn minimal_config_takes_defaults() {
    let cfg = ExperimentConfig::parse(CIRCLE).unwrap();
    assert_eq!(cfg.curve, CurveSpec::Circle { radius: 1.0 });
    assert_eq!(cfg.beta, 5.0);
    assert_eq!(cfg.outputs, PathBuf::from("out"));
    assert_eq!(cfg.sweep.levels, 5);
    assert!(cfg.sweep.eps0 > 0.0);
    assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = format!("# experiment\n\n{CIRCLE}  # trailing\n[sweep]\nlevels = 4 # fewer\n");
    assert_eq!(ExperimentConfig::parse(&text).unwrap().sweep.levels, 4);
}

#[test]
fn malformed_configs_name_line_and_field() {
    let cases = [
        (format!("{CIRCLE}[sweep]\nlevels = 2\n"), Some(8), "sweep.levels"),
        (format!("{CIRCLE}[sweep]\nlevels = 13\n"), Some(8), "sweep.levels"),
        (format!("{CIRCLE}[sweep]\nlevels = three\n"), Some(8), "sweep.levels"),
        (format!("{CIRCLE}[mesh]\norder = 0\n"), Some(8), "mesh.order"),
        (format!("{CIRCLE}[grid]\nh = -0.1\n"), Some(8), "grid.h"),
        (format!("{CIRCLE}[mesh]\ncolour = red\n"), Some(8), "mesh.colour"),
        (format!("{CIRCLE}[meshes]\n"), Some(7), "meshes"),
        (format!("{CIRCLE}[mesh\n"), Some(7), "[mesh"),
        (format!("{CIRCLE}radius = 2\n"), Some(7), "curve.radius"),
        (format!("{CIRCLE}half_length = 2\n"), Some(7), "curve.half_length"),
        (format!("{CIRCLE}just words\n"), Some(7), "just words"),
        ("beta = 5\n[curve]\nkind = spiral\n".to_string(), Some(3), "curve.kind"),
        ("beta = 5\n[curve]\nkind = circle\nradius = 0\n".to_string(), Some(4), "curve.radius"),
        ("beta = nan\n[curve]\nkind = circle\nradius = 1\n".to_string(), Some(1), "beta"),
        ("[curve]\nkind = circle\nradius = 1\n".to_string(), None, "beta"),
        ("beta = 1\n".to_string(), None, "curve.kind"),
    ];
    for (text, line, field) in cases {
        assert_eq!(error_of(&text), (line, field.to_string()), "{text}");
    }
    let e = ExperimentConfig::parse(&format!("{CIRCLE}[sweep]\nlevels = 2\n")).unwrap_err();
    assert_eq!(e.to_string(), "line 8, field `sweep.levels`: must lie in [3, 12], got 2");
}

#[test]
fn segment_needs_no_sweep_settings() {
    let cfg = ExperimentConfig::parse("beta = 1\n[curve]\nkind = segment\nhalf_length = 10\n").unwrap();
    assert_eq!(cfg.sweep.eps0, 20.0 / 64.0);
}

fn specs() -> impl Strategy<Value = CurveSpec> {
    prop_oneof![
        (0.1f64..10.0).prop_map(|radius| CurveSpec::Circle { radius }),
        (1.0f64..50.0).prop_map(|half_length| CurveSpec::Segment { half_length }),
        (0.05f64..1.0, 0.2f64..3.0, 10.0f64..40.0).prop_map(|(a, r, l)| CurveSpec::SmoothedBrokenLine {
            half_angle: a,
            smoothing_radius: r,
            half_length: l,
        }),
        (0.05f64..1.0, 0.2f64..3.0, 10.0f64..40.0).prop_map(|(a, r, l)| CurveSpec::MollifiedBrokenLine {
            half_angle: a,
            smoothing_radius: r,
            half_length: l,
        }),
    ]
}

proptest! {
    #[test]
    fn echoed_configs_reparse_to_equal(
        spec in specs(),
        beta in 0.01f64..50.0,
        levels in 3usize..=12,
        eps_frac in 0.001f64..0.3,
        panels in 4usize..200,
        dir in "[a-z][a-z0-9_/]{0,12}",
    ) {
        let head = format!(
            "beta = {beta:e}\noutputs = {dir}\n[mesh]\nbase_panels = {panels}\n[sweep]\nlevels = {levels}\neps0 = {:e}\n[curve]\n",
            eps_frac * spec.half_extent()
        );
        let curve = match spec {
            CurveSpec::Circle { radius } => format!("kind = circle\nradius = {radius:e}\n"),
            CurveSpec::Segment { half_length } => format!("kind = segment\nhalf_length = {half_length:e}\n"),
            CurveSpec::SmoothedBrokenLine { half_angle, smoothing_radius, half_length } => format!(
                "kind = smoothed_broken_line\nhalf_angle = {half_angle:e}\nsmoothing_radius = {smoothing_radius:e}\nhalf_length = {half_length:e}\n"
            ),
            CurveSpec::MollifiedBrokenLine { half_angle, smoothing_radius, half_length } => format!(
                "kind = mollified_broken_line\nhalf_angle = {half_angle:e}\nsmoothing_radius = {smoothing_radius:e}\nhalf_length = {half_length:e}\n"
            ),
        };
        let mut cfg = ExperimentConfig::parse(&(head + &curve)).unwrap();
        prop_assert_eq!(cfg.curve, spec);
        prop_assert_eq!(cfg.beta, beta);
        let text = cfg.to_text();
        prop_assert_eq!(&ExperimentConfig::parse(&text).unwrap(), &cfg);
        // Idempotent echo.
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap().to_text(), text);
        cfg.search.tol = 1e-10;
        prop_assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

//! Product weights against closed-form integrals of `ln|t0 - t| t^d`.

use proptest::prelude::*;
use punctura::quadrature::{log_weights, GaussLegendre};

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// Antiderivative of u^j ln|u|, continuous through u = 0.
fn prim(j: u32, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let p = (j + 1) as f64;
    u.powi(j as i32 + 1) * (u.abs().ln() / p - 1.0 / (p * p))
}

// Returns the integral and the magnitude of the cancelling terms, which
// bounds the rounding error of the binomial expansion.
fn exact(t0: f64, d: u32) -> (f64, f64) {
    (0..=d)
        .map(|j| binom(d, j) * t0.powi((d - j) as i32) * (prim(j, 1.0 - t0) - prim(j, -1.0 - t0)))
        .fold((0.0, 0.0), |(s, a), v| (s + v, a + v.abs()))
}

fn check(rule: &GaussLegendre, t0: f64, tol: f64) {
    let w = log_weights(rule, t0);
    for d in 0..rule.len() as u32 {
        let got: f64 = rule.nodes.iter().zip(&w).map(|(t, wj)| wj * t.powi(d as i32)).sum();
        let (want, scale) = exact(t0, d);
        assert!((got - want).abs() < tol + 1e-14 * scale, "t0={t0} d={d}: {got} vs {want}");
    }
}

#[test]
fn exact_at_special_targets() {
    let rule = GaussLegendre::new(12);
    for t0 in [-1.0, 1.0, 0.0, 0.5, -0.999, 1.0 + 1e-6, -1.3, 3.0, 1.02] {
        check(&rule, t0, 1e-11);
    }
}

proptest! {
    #[test]
    fn exact_for_polynomials_inside(t0 in -1.0f64..1.0) {
        check(&GaussLegendre::new(10), t0, 1e-11);
    }

    #[test]
    fn exact_for_polynomials_outside(d in 1e-6f64..4.0, left in any::<bool>()) {
        let t0 = if left { -1.0 - d } else { 1.0 + d };
        check(&GaussLegendre::new(10), t0, 1e-11);
    }
}

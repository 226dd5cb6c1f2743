//! Gauss-Legendre rules and logarithmic product weights.
//!
//! For a target `t0` and the `n`-point rule on `[-1, 1]` the product weights
//! `omega_j` integrate `ln|t0 - t| p(t)` exactly for every polynomial `p` of
//! degree below `n`. They come from the Legendre moments of the logarithm.

use std::f64::consts::LN_2;

/// `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(c + h * t))
            .sum();
        h * s
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// `P_0(t), ..., P_{out.len()-1}(t)`.
pub fn legendre_values(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Moments `m_k = int_{-1}^{1} ln|t0 - t| P_k(t) dt` for `k < n`.
pub fn log_moments(t0: f64, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n];
    if n == 0 {
        return m;
    }
    if t0 == 1.0 || t0 == -1.0 {
        m[0] = 2.0 * LN_2 - 2.0;
        for (k, mk) in m.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let sign = if t0 < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            *mk = -2.0 / (kf * (kf + 1.0)) * sign;
        }
    } else if t0.abs() < 1.0 {
        // Q_k(t0), Legendre functions of the second kind; forward recurrence
        // is stable inside the interval.
        let mut q = vec![0.0; n + 1];
        q[0] = 0.5 * ((1.0 + t0) / (1.0 - t0)).ln();
        if n >= 1 {
            q[1] = t0 * q[0] - 1.0;
        }
        for k in 1..n {
            let kf = k as f64;
            q[k + 1] = ((2.0 * kf + 1.0) * t0 * q[k] - kf * q[k - 1]) / (kf + 1.0);
        }
        let a = 1.0 + t0;
        let b = 1.0 - t0;
        m[0] = a * a.ln() + b * b.ln() - 2.0;
        for k in 1..n {
            m[k] = 2.0 * (q[k + 1] - q[k - 1]) / (2.0 * k as f64 + 1.0);
        }
    } else {
        outside_moments(t0, &mut m);
    }
    m
}

// Outside the interval the recurrence for Q_k is unstable, so integrate
// directly on subintervals graded toward the endpoint nearest to t0.
fn outside_moments(t0: f64, m: &mut [f64]) {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(20);
    }
    let d = t0.abs() - 1.0;
    let near = t0.signum();
    let mut breaks = vec![0.0];
    let mut u = d.min(2.0);
    while u < 2.0 {
        breaks.push(u);
        u *= 2.0;
    }
    breaks.push(2.0);
    let mut p = vec![0.0; m.len()];
    RULE.with(|rule| {
        for w in breaks.windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let dist = c + h * x;
                let t = near * (1.0 - dist);
                legendre_values(t, &mut p);
                let f = wt * h * (d + dist).ln();
                for (mk, pk) in m.iter_mut().zip(&p) {
                    *mk += f * pk;
                }
            }
        }
    });
}

/// Product weights for `int_{-1}^{1} ln|t0 - t| f(t) dt` on `rule`'s nodes.
pub fn log_weights(rule: &GaussLegendre, t0: f64) -> Vec<f64> {
    let n = rule.len();
    let m = log_moments(t0, n);
    let coef: Vec<f64> = m
        .iter()
        .enumerate()
        .map(|(k, mk)| (k as f64 + 0.5) * mk)
        .collect();
    let mut p = vec![0.0; n];
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| {
            legendre_values(*t, &mut p);
            w * coef.iter().zip(&p).map(|(c, pk)| c * pk).sum::<f64>()
        })
        .collect()
}

//! Closure of truncated broken lines by exponential ray tails.
//!
//! A bound state below `-beta^2/4` decays along each ray like
//! `exp(-gamma tau)` with `gamma = sqrt(k^2 - beta^2/4)`, which is the
//! decay of the transverse line mode at that energy. Near threshold the
//! decay length `1/gamma` is far longer than any affordable truncation, so
//! plain truncation drops the state altogether. Instead each ray beyond
//! the truncation point carries one extra unknown: the amplitude of the
//! normalized profile `t(tau) = sqrt(2 gamma) exp(-gamma tau)`.
//!
//! Same-ray interactions of two profiles are known in closed form. Curve
//! to ray and ray to ray terms are integrated numerically on panels
//! growing geometrically away from the nearest point.

use std::f64::consts::PI;

use crate::geometry::CurveSpec;
use crate::kernel::Kernel;
use crate::quadrature::GaussLegendre;

// Beyond this many decay lengths the kernel is below 1e-21.
const CUTOFF: f64 = 48.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RayTails {
    /// Ray origins for the `-S` and `+S` ends.
    pub origins: [[f64; 2]; 2],
    /// Outward unit directions.
    pub dirs: [[f64; 2]; 2],
    rule: GaussLegendre,
}

/// Decay rate along the rays for a state at `-kappa^2`.
pub fn decay_rate(kappa: f64, beta: f64) -> f64 {
    let q = kappa * kappa - 0.25 * beta * beta;
    if q > 0.0 {
        q.sqrt()
    } else {
        0.0
    }
}

impl RayTails {
    pub fn new(spec: &CurveSpec) -> Option<Self> {
        if !spec.has_ray_tails() {
            return None;
        }
        let s = spec.half_extent();
        let mut origins = [[0.0; 2]; 2];
        let mut dirs = [[0.0; 2]; 2];
        for (k, sigma) in [-1.0, 1.0].into_iter().enumerate() {
            origins[k] = spec.position(sigma * s);
            let t = spec.tangent(sigma * s);
            dirs[k] = [sigma * t[0], sigma * t[1]];
        }
        Some(Self {
            origins,
            dirs,
            rule: GaussLegendre::new(16),
        })
    }

    fn point(&self, arm: usize, tau: f64) -> [f64; 2] {
        let (p, u) = (self.origins[arm], self.dirs[arm]);
        [p[0] + tau * u[0], p[1] + tau * u[1]]
    }

    /// Panels on `[0, tau_max]` starting at width `first` and doubling up to `cap`.
    fn panels(first: f64, cap: f64, tau_max: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut a = 0.0;
        let mut h = first.min(cap);
        while a < tau_max {
            let b = (a + h).min(tau_max);
            out.push((a, b));
            a = b;
            h = (2.0 * h).min(cap);
        }
        out
    }

    /// `int_0^inf K(|x - p(tau)|) t(tau) dtau` along ray `arm`.
    pub fn against_point(&self, kernel: Kernel, kappa: f64, gamma: f64, arm: usize, x: [f64; 2]) -> f64 {
        let p = self.origins[arm];
        let d0 = (x[0] - p[0]).hypot(x[1] - p[1]);
        let u = self.dirs[arm];
        // Distance to the ray, which lower-bounds the kernel argument.
        let along = (x[0] - p[0]) * u[0] + (x[1] - p[1]) * u[1];
        let perp = if along > 0.0 {
            ((x[0] - p[0]) * u[1] - (x[1] - p[1]) * u[0]).abs()
        } else {
            d0
        };
        if kappa * perp > CUTOFF {
            return 0.0;
        }
        let norm = (2.0 * gamma).sqrt();
        let tau_max = along.max(0.0) + d0 + CUTOFF / kappa;
        let mut acc = 0.0;
        for (a, b) in Self::panels(d0.max(1e-9 / kappa), 4.0 / kappa, tau_max) {
            acc += self.rule.integrate(a, b, |tau| {
                let y = self.point(arm, tau);
                let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                kernel.eval(kappa, r) * (-gamma * tau).exp()
            });
        }
        norm * acc
    }

    /// 2x2 block of profile-profile interactions, arms ordered `-S`, `+S`.
    pub fn block(&self, kernel: Kernel, kappa: f64, gamma: f64) -> [[f64; 2]; 2] {
        let diag = same_ray(kernel, kappa, gamma);
        let off = self.cross(kernel, kappa, gamma);
        [[diag, off], [off, diag]]
    }

    fn cross(&self, kernel: Kernel, kappa: f64, gamma: f64) -> f64 {
        let (p, q) = (self.origins[0], self.origins[1]);
        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
        if kappa * d > CUTOFF {
            return 0.0;
        }
        let tau_max = CUTOFF / kappa;
        let panels = Self::panels(4.0 / kappa, 4.0 / kappa, tau_max);
        let g = &self.rule;
        let mut acc = 0.0;
        for &(a, b) in &panels {
            let (ca, ha) = (0.5 * (a + b), 0.5 * (b - a));
            for (ta, wa) in g.nodes.iter().zip(&g.weights) {
                let tau = ca + ha * ta;
                let x = self.point(0, tau);
                let outer = wa * ha * (-gamma * tau).exp();
                let inner: f64 = panels
                    .iter()
                    .map(|&(c, e)| {
                        g.integrate(c, e, |sig| {
                            let y = self.point(1, sig);
                            let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                            kernel.eval(kappa, r) * (-gamma * sig).exp()
                        })
                    })
                    .sum();
                acc += outer * inner;
            }
        }
        2.0 * gamma * acc
    }
}

/// `int int K(|tau - sigma|) t(tau) t(sigma)` over a single ray.
pub fn same_ray(kernel: Kernel, kappa: f64, gamma: f64) -> f64 {
    let q = (kappa * kappa - gamma * gamma).sqrt();
    let acos = (gamma / kappa).acos();
    match kernel {
        Kernel::Green => acos / (PI * q),
        Kernel::Norm => (kappa * acos / (q * q * q) - gamma / (kappa * q * q)) / (2.0 * PI * kappa),
    }
}

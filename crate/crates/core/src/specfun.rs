//! Modified Bessel functions of integer order.
//!
//! Orders 0 and 1 have dedicated fast paths since the kernel assembly and
//! grid potentials evaluate them hundreds of millions of times:
//!
//! * `I0`, `I1`: ascending series up to x = 20, Hankel asymptotics beyond.
//! * `K0`, `K1`: ascending series up to x = 2. Beyond that a Chebyshev
//!   expansion of `exp(x) sqrt(x) K(x)` in `4/x - 1`, fitted once on first
//!   use against Steed's continued fraction.
//!
//! Higher orders use forward recurrence for `K` (stable) and Miller's
//! backward recurrence for `I`.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_K_MAX: f64 = 2.0;
const SERIES_I_MAX: f64 = 20.0;
const CHEB_NODES: usize = 48;
// Coefficients past this index sit at the rounding floor of the fit data.
const CHEB_KEEP: usize = 24;

/// Accuracy contract for the checked entry points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFun {
    max_order: u32,
    target_rel_err: f64,
}

impl Default for SpecFun {
    fn default() -> Self {
        Self {
            max_order: 8,
            target_rel_err: 1e-12,
        }
    }
}

impl SpecFun {
    /// Tightest relative accuracy the implementation can promise.
    pub const BEST_REL_ERR: f64 = 1e-14;

    pub fn new(max_order: u32, target_rel_err: f64) -> Result<Self> {
        if !(target_rel_err.is_finite() && target_rel_err > 0.0) {
            return Err(Error::Domain(format!(
                "target relative error must be positive, got {target_rel_err}"
            )));
        }
        if target_rel_err < Self::BEST_REL_ERR {
            return Err(Error::Domain(format!(
                "target relative error {target_rel_err:e} is below the attainable {:e}",
                Self::BEST_REL_ERR
            )));
        }
        if max_order > 64 {
            return Err(Error::Domain(format!(
                "max_order {max_order} exceeds the supported 64"
            )));
        }
        Ok(Self {
            max_order,
            target_rel_err,
        })
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn target_rel_err(&self) -> f64 {
        self.target_rel_err
    }

    fn check(&self, m: u32, x: f64, strict: bool) -> Result<()> {
        if m > self.max_order {
            return Err(Error::Domain(format!(
                "order {m} exceeds max_order {}",
                self.max_order
            )));
        }
        if !x.is_finite() || x < 0.0 || (strict && x == 0.0) {
            return Err(Error::Domain(format!("argument {x} out of domain")));
        }
        Ok(())
    }

    /// `K_m(x)` for `x > 0`.
    pub fn bessel_k(&self, m: u32, x: f64) -> Result<f64> {
        self.check(m, x, true)?;
        Ok(kn(m, x))
    }

    /// `I_m(x)` for `x >= 0`. Overflows to an error above x ~ 700.
    pub fn bessel_i(&self, m: u32, x: f64) -> Result<f64> {
        self.check(m, x, false)?;
        let v = in_(m, x);
        if !v.is_finite() {
            return Err(Error::Domain(format!("I_{m}({x}) overflows")));
        }
        Ok(v)
    }
}

/// Regular part of `K0`: `K0(x) + ln(x) I0(x)`.
pub fn k0_regular(x: f64) -> f64 {
    if x <= SERIES_K_MAX {
        let t = 0.25 * x * x;
        let mut term = 1.0;
        let mut h = 0.0;
        let mut s_i = 1.0;
        let mut s_h = 0.0;
        let mut k = 1.0;
        loop {
            term *= t / (k * k);
            h += 1.0 / k;
            s_i += term;
            s_h += term * h;
            if term * h < 1e-17 * s_h.max(1.0) {
                break;
            }
            k += 1.0;
        }
        (LN_2 - EULER_GAMMA) * s_i + s_h
    } else {
        k0(x) + x.ln() * i0(x)
    }
}

/// Regular part of `x K1(x)`: `x K1(x) - x I1(x) ln(x)`. Equals 1 at 0.
pub fn xk1_regular(x: f64) -> f64 {
    if x <= SERIES_K_MAX {
        let t = 0.25 * x * x;
        let mut c = 1.0;
        let mut h = 0.0;
        let mut s_c = 1.0;
        let mut s_psi = 1.0 - 2.0 * EULER_GAMMA;
        let mut k = 1.0;
        loop {
            c *= t / (k * (k + 1.0));
            h += 1.0 / k;
            let psi = -2.0 * EULER_GAMMA + 2.0 * h + 1.0 / (k + 1.0);
            s_c += c;
            s_psi += psi * c;
            if c * psi.abs().max(1.0) < 1e-17 * s_psi.abs().max(1.0) {
                break;
            }
            k += 1.0;
        }
        1.0 - LN_2 * 2.0 * t * s_c - t * s_psi
    } else {
        x * (k1(x) - i1(x) * x.ln())
    }
}

/// Ascending series for `I0` and `I1` together.
fn i01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let mut a = 1.0;
    let mut b = 1.0;
    let mut s0 = 1.0;
    let mut s1 = 1.0;
    let mut k = 1.0;
    loop {
        a *= t / (k * k);
        b *= t / (k * (k + 1.0));
        s0 += a;
        s1 += b;
        if a < 1e-17 * s0 {
            break;
        }
        k += 1.0;
    }
    (s0, 0.5 * x * s1)
}

/// Hankel expansion of `I_nu(x)`, large x.
fn i_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (odd * odd - mu) / (8.0 * kf * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    // Split the exponential so x near 709 does not overflow early.
    let e = (0.5 * x).exp();
    e * (e / (2.0 * PI * x).sqrt()) * sum
}

/// `(I0(x), I1(x))` sharing the work.
pub fn i01(x: f64) -> (f64, f64) {
    if x <= SERIES_I_MAX {
        i01_series(x)
    } else {
        (i_asymptotic(0.0, x), i_asymptotic(1.0, x))
    }
}

pub fn i0(x: f64) -> f64 {
    if x <= SERIES_I_MAX {
        i01_series(x).0
    } else {
        i_asymptotic(0.0, x)
    }
}

pub fn i1(x: f64) -> f64 {
    if x <= SERIES_I_MAX {
        i01_series(x).1
    } else {
        i_asymptotic(1.0, x)
    }
}

/// Steed's CF2 with order 0. Returns `exp(x) sqrt(x) K0`, `exp(x) sqrt(x) K1`.
fn k01_scaled_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..100_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0s = (0.5 * PI).sqrt() / s;
    (k0s, k0s * (x + 0.5 - h) / x)
}

struct ChebFit {
    k0: Vec<f64>,
    k1: Vec<f64>,
}

fn cheb_fit() -> &'static ChebFit {
    static FIT: OnceLock<ChebFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let n = CHEB_NODES;
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        for (j, (a, b)) in f0.iter_mut().zip(f1.iter_mut()).enumerate() {
            let u = (PI * (j as f64 + 0.5) / n as f64).cos();
            let (p, q) = k01_scaled_steed(4.0 / (1.0 + u));
            *a = p;
            *b = q;
        }
        let coeffs = |f: &[f64]| -> Vec<f64> {
            (0..CHEB_KEEP)
                .map(|k| {
                    let s: f64 = f
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                        .sum();
                    2.0 * s / n as f64
                })
                .collect()
        };
        ChebFit {
            k0: coeffs(&f0),
            k1: coeffs(&f1),
        }
    })
}

fn clenshaw(c: &[f64], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + 0.5 * c[0]
}

/// `exp(x) sqrt(x) K0(x)` and the same for `K1`, for `x > 2`.
fn k01_scaled_large(x: f64) -> (f64, f64) {
    let fit = cheb_fit();
    let u = 4.0 / x - 1.0;
    (clenshaw(&fit.k0, u), clenshaw(&fit.k1, u))
}

pub fn k0(x: f64) -> f64 {
    if x <= SERIES_K_MAX {
        k0_regular(x) - x.ln() * i01_series(x).0
    } else {
        let (a, _) = k01_scaled_large(x);
        a * (-x).exp() / x.sqrt()
    }
}

pub fn k1(x: f64) -> f64 {
    if x <= SERIES_K_MAX {
        (xk1_regular(x) + x * i01_series(x).1 * x.ln()) / x
    } else {
        let (_, b) = k01_scaled_large(x);
        b * (-x).exp() / x.sqrt()
    }
}

/// `(K0(x), K1(x))` sharing the work.
pub fn k01(x: f64) -> (f64, f64) {
    if x <= SERIES_K_MAX {
        let (a, b) = i01_series(x);
        let l = x.ln();
        (k0_regular(x) - l * a, (xk1_regular(x) + x * b * l) / x)
    } else {
        let (a, b) = k01_scaled_large(x);
        let e = (-x).exp() / x.sqrt();
        (a * e, b * e)
    }
}

/// `K_m(x)` by forward recurrence from orders 0 and 1.
pub fn kn(m: u32, x: f64) -> f64 {
    let (k0v, k1v) = k01(x);
    match m {
        0 => k0v,
        1 => k1v,
        _ => {
            let (mut km1, mut k) = (k0v, k1v);
            for j in 1..m {
                let next = km1 + 2.0 * j as f64 / x * k;
                km1 = k;
                k = next;
            }
            k
        }
    }
}

/// `I_m(x)`; orders above 1 use Miller's algorithm normalized by `I0`.
pub fn in_(m: u32, x: f64) -> f64 {
    match m {
        0 => i0(x),
        1 => i1(x),
        _ if x == 0.0 => 0.0,
        _ => {
            let mf = m as f64;
            let start = 2 * (m as usize + (40.0 * mf.max(x)).sqrt() as usize) + 20;
            let tox = 2.0 / x;
            let (mut bip, mut bi) = (0.0f64, 1.0f64);
            let mut ans = 0.0;
            for j in (1..=start).rev() {
                let bim = bip + j as f64 * tox * bi;
                bip = bi;
                bi = bim;
                if bi.abs() > 1e250 {
                    ans *= 1e-250;
                    bi *= 1e-250;
                    bip *= 1e-250;
                }
                if j == m as usize {
                    ans = bip;
                }
            }
            ans * (i0(x) / bi)
        }
    }
}

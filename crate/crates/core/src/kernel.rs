//! Nystrom discretization of the two kernels living on the curve:
//!
//! * `Green`: `G(r) = K0(k r) / 2pi`, the free resolvent at energy `-k^2`;
//! * `Norm`: `N(r) = r K1(k r) / (4 pi k)`, the kernel of `-dG/d(k^2)`,
//!   whose quadratic form is the squared L2 norm of a single-layer potential.
//!
//! Both split as `c(r) ln|s - s'| + R(r, s - s')` with smooth `c` and `R`.
//! Panels near a target get product weights for the log part; the rest
//! use the plain Gauss rule. Matrices are written in the symmetric
//! `sqrt(w_i) K_ij sqrt(w_j)` form and symmetrized.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::geometry::{Curve, NearBlock};
use crate::specfun;

/// Below this `k r` the split uses the ascending series; above it the
/// remainder is formed directly.
const SERIES_SWITCH: f64 = 2.0;

/// The log coefficient grows like `exp(k r)`. On panels too long to resolve
/// `1/k` the product correction then cancels catastrophically, so the
/// coefficient is switched off smoothly between `SERIES_SWITCH` and this
/// `k r`. The cutoff is identically one near `r = 0`, so the remainder
/// stays smooth.
const LOG_CUTOFF: f64 = 8.0;

fn cutoff(x: f64) -> f64 {
    if x <= SERIES_SWITCH {
        return 1.0;
    }
    if x >= LOG_CUTOFF {
        return 0.0;
    }
    let t = (x - SERIES_SWITCH) / (LOG_CUTOFF - SERIES_SWITCH);
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    f(1.0 - t) / (f(1.0 - t) + f(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Green,
    Norm,
}

impl Kernel {
    /// Kernel value at distance `r > 0`.
    #[inline]
    pub fn eval(self, kappa: f64, r: f64) -> f64 {
        let x = kappa * r;
        match self {
            Kernel::Green => specfun::k0(x) / (2.0 * PI),
            Kernel::Norm => r * specfun::k1(x) / (4.0 * PI * kappa),
        }
    }

    /// `(c, R)` with kernel `= c ln|ds| + R`; `r` is the chord, `ds` the
    /// arclength offset. Both may vanish together.
    #[inline]
    pub fn split(self, kappa: f64, r: f64, ds: f64) -> (f64, f64) {
        let x = kappa * r;
        let ds = ds.abs();
        let lratio = if r == 0.0 || ds == 0.0 { 0.0 } else { (r / ds).ln() };
        let (i0, i1) = specfun::i01(x);
        match self {
            Kernel::Green => {
                let c = -i0 / (2.0 * PI) * cutoff(x);
                let rem = if x <= SERIES_SWITCH {
                    (specfun::k0_regular(x) - i0 * (kappa.ln() + lratio)) / (2.0 * PI)
                } else {
                    self.eval(kappa, r) - c * ds.ln()
                };
                (c, rem)
            }
            Kernel::Norm => {
                let s = 1.0 / (4.0 * PI * kappa * kappa);
                let c = x * i1 * s * cutoff(x);
                let rem = if x <= SERIES_SWITCH {
                    (specfun::xk1_regular(x) + x * i1 * (kappa.ln() + lratio)) * s
                } else {
                    self.eval(kappa, r) - c * ds.ln()
                };
                (c, rem)
            }
        }
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Maps global node indices to positions among the active ones.
pub(crate) fn active_positions(n: usize, active: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in active.iter().enumerate() {
        pos[i] = k;
    }
    pos
}

/// Integration weights of a near panel for `target` evaluated into `emit`,
/// which receives (active position, contribution to `sqrt(w_j) * row`).
#[inline]
#[allow(clippy::too_many_arguments)]
fn near_panel(
    curve: &Curve,
    kernel: Kernel,
    kappa: f64,
    target_s: f64,
    target_x: [f64; 2],
    block: &NearBlock,
    pos: &[usize],
    mut emit: impl FnMut(usize, f64, f64),
) {
    let nodes = curve.nodes();
    let p = &curve.panels()[block.panel];
    if pos[p.first] == usize::MAX {
        return;
    }
    for (jj, lw) in block.weights.iter().enumerate() {
        let j = p.first + jj;
        let nj = &nodes[j];
        let r = dist(target_x, nj.x);
        let ds = curve.wrap(target_s - nj.s);
        let (c, rem) = kernel.split(kappa, r, ds);
        // Integral weight against the density value f_j.
        emit(pos[j], nj.w, lw * c + nj.w * rem);
    }
}

/// One row of the symmetric-form matrix for active target `a`.
fn row(
    curve: &Curve,
    kernel: Kernel,
    kappa: f64,
    active: &[usize],
    pos: &[usize],
    a: usize,
    out: &mut [f64],
) {
    let nodes = curve.nodes();
    let i = active[a];
    let ni = &nodes[i];
    let swi = ni.w.sqrt();
    for (b, &j) in active.iter().enumerate() {
        out[b] = if j == i {
            0.0
        } else {
            let nj = &nodes[j];
            swi * nj.w.sqrt() * kernel.eval(kappa, dist(ni.x, nj.x))
        };
    }
    for block in curve.near(i) {
        near_panel(curve, kernel, kappa, ni.s, ni.x, block, pos, |b, wj, v| {
            out[b] = swi * v / wj.sqrt();
        });
    }
}

/// Product-integration Nystrom matrix in symmetric form,
/// `sqrt(w_i) W_ij / sqrt(w_j)` with `W_ij` the weight of source `j` for
/// target `i`. Not symmetric in the near blocks; its eigenvalues are those
/// of the Nystrom discretization.
pub fn assemble_nystrom(curve: &Curve, kernel: Kernel, kappa: f64, active: &[usize]) -> DMatrix<f64> {
    let n = active.len();
    let pos = active_positions(curve.len(), active);
    let mut m = DMatrix::<f64>::zeros(n, n);
    // Column-major storage: filling column a with the row of target a
    // yields the transpose.
    m.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(a, col)| row(curve, kernel, kappa, active, &pos, a, col));
    m.transpose_mut();
    m
}

/// Dense symmetric matrix of `kernel` on the active nodes: the symmetric
/// part of [`assemble_nystrom`]. Averaging the near blocks perturbs the
/// eigenvalues at second order in the asymmetry, O(h^2) with a small
/// constant; the quadratic form is unchanged.
pub fn assemble_matrix(curve: &Curve, kernel: Kernel, kappa: f64, active: &[usize]) -> DMatrix<f64> {
    let mut m = assemble_nystrom(curve, kernel, kappa, active);
    symmetrize(&mut m);
    m
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for c in 0..n {
        for r in c + 1..n {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

/// `v^T A v` for the symmetric-form matrix `A` of `kernel`, without storing it.
pub fn quadratic_form(curve: &Curve, kernel: Kernel, kappa: f64, active: &[usize], v: &[f64]) -> f64 {
    let n = active.len();
    let pos = active_positions(curve.len(), active);
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, a| {
                row(curve, kernel, kappa, active, &pos, a, buf);
                v[a] * buf.iter().zip(v).map(|(x, y)| x * y).sum::<f64>()
            },
        )
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// `int K(|x(s) - y|) f(y) dy` at a curve parameter `s`, for a density
/// given in symmetric form `v_j = sqrt(w_j) f_j`.
pub fn potential_on_curve(
    curve: &Curve,
    kernel: Kernel,
    kappa: f64,
    active: &[usize],
    v: &[f64],
    s: f64,
) -> f64 {
    let pos = active_positions(curve.len(), active);
    let x = curve.spec().position(s);
    let blocks = curve.near_blocks_at(s);
    let mut near = vec![false; curve.panels().len()];
    for b in &blocks {
        near[b.panel] = true;
    }
    let nodes = curve.nodes();
    let mut acc = 0.0;
    for (b, &j) in active.iter().enumerate() {
        if near[curve.panel_of(j)] {
            continue;
        }
        let nj = &nodes[j];
        acc += nj.w.sqrt() * v[b] * kernel.eval(kappa, dist(x, nj.x));
    }
    for block in &blocks {
        near_panel(curve, kernel, kappa, s, x, block, &pos, |b, wj, val| {
            acc += val * v[b] / wj.sqrt();
        });
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_recombines_off_the_diagonal() {
        for kernel in [Kernel::Green, Kernel::Norm] {
            for &(kappa, r, ds) in &[(0.5, 0.3, 0.31), (2.0, 0.9, 1.0), (1.0, 3.0, 3.2), (7.0, 1e-4, 1e-4)] {
                let (c, rem) = kernel.split(kappa, r, ds);
                let want = kernel.eval(kappa, r);
                let got = c * f64::ln(ds) + rem;
                assert!(((got - want) / want).abs() < 1e-12, "{kernel:?} {kappa} {r}");
            }
        }
    }

    #[test]
    fn coincident_limits() {
        let kappa = 1.7;
        let (c, rem) = Kernel::Green.split(kappa, 0.0, 0.0);
        assert!((c + 1.0 / (2.0 * PI)).abs() < 1e-16);
        let want = ((2.0 / kappa).ln() - specfun::EULER_GAMMA) / (2.0 * PI);
        assert!((rem - want).abs() < 1e-15);
        let (c, rem) = Kernel::Norm.split(kappa, 0.0, 0.0);
        assert_eq!(c, 0.0);
        assert!((rem - 1.0 / (4.0 * PI * kappa * kappa)).abs() < 1e-16);
    }
}

//! Reference solutions independent of the boundary-integral solver:
//! the circle spectrum from the Bessel addition theorem, a finite
//! difference diagonalization of `-Laplace - beta delta` on a box, a plane
//! quadrature of the potential norm, and the straight-line threshold.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::bsop::BoundState;
use crate::error::{Error, Result};
use crate::geometry::{Curve, Puncture};
use crate::quadrature::GaussLegendre;
use crate::roots;
use crate::specfun;

/// Bottom of the essential spectrum of a straight line with coupling `beta`.
pub fn line_threshold(beta: f64) -> f64 {
    -0.25 * beta * beta
}

// I_m(x) K_m(x), switching to its large-x expansion before I_m overflows.
fn ik_product(m: u32, x: f64) -> f64 {
    if x < 600.0 {
        return specfun::in_(m, x) * specfun::kn(m, x);
    }
    let mu = 4.0 * (m as f64).powi(2);
    let z2 = (2.0 * x).powi(2);
    let t1 = (mu - 1.0) / z2;
    let t2 = (mu - 1.0) * (mu - 9.0) / (z2 * z2);
    let t3 = (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (z2 * z2 * z2);
    (1.0 - 0.5 * t1 + 0.375 * t2 - 0.3125 * t3) / (2.0 * x)
}

/// The `kappa` solving `beta R I_m(kappa R) K_m(kappa R) = 1`, if any.
/// The mode is simple for `m = 0` and double otherwise.
pub fn circle_exact(radius: f64, beta: f64, m: u32) -> Option<f64> {
    if !(radius > 0.0 && beta > 0.0) {
        return None;
    }
    // I_m K_m decreases from 1/(2m) at 0 (infinity for m = 0).
    if m >= 1 && beta * radius <= 2.0 * m as f64 {
        return None;
    }
    let f = |k: f64| beta * radius * ik_product(m, k * radius) - 1.0;
    let mut lo = 1.0 / radius;
    let mut steps = 0;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > 1000 || lo == 0.0 {
            return None;
        }
    }
    let mut hi = lo;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    roots::bisect(f, lo, hi, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleMode {
    pub m: u32,
    pub kappa: f64,
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Every bound mode of the circle, deepest first.
pub fn circle_spectrum(radius: f64, beta: f64) -> Vec<CircleMode> {
    let mut out = Vec::new();
    for m in 0.. {
        match circle_exact(radius, beta, m) {
            Some(kappa) => out.push(CircleMode {
                m,
                kappa,
                lambda: -kappa * kappa,
                multiplicity: if m == 0 { 1 } else { 2 },
            }),
            None => break,
        }
    }
    out
}

/// Square box `[-W, W]^2` with Dirichlet walls and spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub h: f64,
}

/// Largest tolerated share of `|u|^2` within `0.02 W` of the walls.
pub const BOUNDARY_MASS_TOL: f64 = 1e-6;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.half_width > self.h && self.half_width.is_finite()) {
            return Err(Error::Domain(format!(
                "grid needs 0 < h < W, got h = {}, W = {}",
                self.h, self.half_width
            )));
        }
        let cells = 2.0 * self.half_width / self.h;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::Domain(format!(
                "2W/h = {cells} is not an integer"
            )));
        }
        if cells.round() < 4.0 {
            return Err(Error::Domain("grid has fewer than 4 cells".into()));
        }
        Ok(())
    }

    /// Interior points per direction.
    pub fn interior(&self) -> usize {
        (2.0 * self.half_width / self.h).round() as usize - 1
    }

    fn coord(&self, a: usize) -> f64 {
        -self.half_width + (a + 1) as f64 * self.h
    }

    /// Share of `sum u^2` on points with `max(|x|, |y|) > 0.98 W`.
    fn boundary_share(&self, u: &[f64]) -> f64 {
        let n = self.interior();
        let edge = 0.98 * self.half_width;
        let (mut ring, mut total) = (0.0, 0.0);
        for b in 0..n {
            let y = self.coord(b).abs();
            for a in 0..n {
                let v = u[a + n * b] * u[a + n * b];
                total += v;
                if y > edge || self.coord(a).abs() > edge {
                    ring += v;
                }
            }
        }
        ring / total
    }
}

/// One curve quadrature point spread onto its four surrounding grid points.
struct LinePoint {
    weight: f64,
    corners: [(usize, f64); 4],
    len: usize,
}

fn spread(grid: &GridSpec, x: [f64; 2], weight: f64) -> LinePoint {
    let n = grid.interior();
    let fx = (x[0] + grid.half_width) / grid.h;
    let fy = (x[1] + grid.half_width) / grid.h;
    let (ix, iy) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - ix, fy - iy);
    let mut p = LinePoint {
        weight,
        corners: [(0, 0.0); 4],
        len: 0,
    };
    for (dx, dy, wgt) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        // Grid index g corresponds to interior index g - 1; walls drop out.
        let (gx, gy) = (ix as i64 + dx, iy as i64 + dy);
        if gx >= 1 && gy >= 1 && gx <= n as i64 && gy <= n as i64 && wgt != 0.0 {
            p.corners[p.len] = ((gx - 1) as usize + n * (gy - 1) as usize, wgt);
            p.len += 1;
        }
    }
    p
}

/// Midpoints of the retained curve cut into segments no longer than
/// `h / 2`. Sampling the line more coarsely than the grid turns it into a
/// row of point interactions, which bind spuriously.
fn line_points(grid: &GridSpec, curve: &Curve, mask: &Puncture) -> Vec<LinePoint> {
    let spec = curve.spec();
    let mut retained = vec![false; curve.len()];
    for &i in &mask.active {
        retained[i] = true;
    }
    let mut out = Vec::new();
    for p in curve.panels().iter().filter(|p| retained[p.first]) {
        let pieces = ((p.b - p.a) / (0.5 * grid.h)).ceil().max(1.0) as usize;
        let len = (p.b - p.a) / pieces as f64;
        for k in 0..pieces {
            let s = p.a + (k as f64 + 0.5) * len;
            out.push(spread(grid, spec.position(s), len));
        }
    }
    out
}

/// `-Laplace - beta delta` on the interior points.
struct GridOperator {
    n: usize,
    inv_h2: f64,
    coupling: f64,
    points: Vec<LinePoint>,
}

impl GridOperator {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for b in 0..n {
            for a in 0..n {
                let k = a + n * b;
                let mut s = 4.0 * u[k];
                if a > 0 {
                    s -= u[k - 1];
                }
                if a + 1 < n {
                    s -= u[k + 1];
                }
                if b > 0 {
                    s -= u[k - n];
                }
                if b + 1 < n {
                    s -= u[k + n];
                }
                out[k] = s * self.inv_h2;
            }
        }
        // (beta / h^2) B^T W B, B the bilinear interpolation.
        for p in &self.points {
            let v: f64 = p.corners[..p.len].iter().map(|&(k, c)| c * u[k]).sum();
            let g = self.coupling * p.weight * v;
            for &(k, c) in &p.corners[..p.len] {
                out[k] -= g * c;
            }
        }
    }
}

/// `(L + tau)^{-1}` for the Dirichlet 5-point Laplacian `L`, applied in
/// the sine basis.
struct SinePreconditioner {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    inv_diag: Vec<f64>,
}

impl SinePreconditioner {
    fn new(n: usize, h: f64, tau: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        let lam: Vec<f64> = (1..=n)
            .map(|k| {
                let s = (PI * k as f64 / (2.0 * (n + 1) as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let scale = (2.0 / (n + 1) as f64).powi(2);
        let mut inv_diag = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                inv_diag[a + n * b] = scale / (lam[a] + lam[b] + tau);
            }
        }
        Self { n, fft, inv_diag }
    }

    /// In-place DST-I of every contiguous row of length `n`.
    fn dst_rows(&self, data: &mut [f64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let rows = data.len() / n;
        let mut r = 0;
        while r < rows {
            // Two real rows per complex transform: odd extensions have
            // purely imaginary spectra, so they separate cleanly.
            let second = r + 1 < rows;
            buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            for j in 0..n {
                let re = data[r * n + j];
                let im = if second { data[(r + 1) * n + j] } else { 0.0 };
                buf[j + 1] = Complex::new(re, im);
                buf[m - 1 - j] = Complex::new(-re, -im);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                let z = buf[k + 1];
                data[r * n + k] = -0.5 * z.im;
                if second {
                    data[(r + 1) * n + k] = 0.5 * z.re;
                }
            }
            r += 2;
        }
    }

    fn transpose(&self, data: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut t = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                t[b + n * a] = data[a + n * b];
            }
        }
        t
    }

    fn dst2(&self, data: &mut Vec<f64>) {
        self.dst_rows(data);
        let mut t = self.transpose(data);
        self.dst_rows(&mut t);
        *data = self.transpose(&t);
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut v = r.to_vec();
        self.dst2(&mut v);
        v.iter_mut().zip(&self.inv_diag).for_each(|(x, d)| *x *= d);
        self.dst2(&mut v);
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(basis: &[&Vec<f64>], coef: impl Fn(usize) -> f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (j, v) in basis.iter().enumerate() {
        let c = coef(j);
        if c != 0.0 {
            out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += c * x);
        }
    }
    out
}

/// Smallest eigenpairs of a symmetric operator by the locally optimal
/// block preconditioned conjugate gradient method. Stops when the first
/// `want` pairs have `|A x - l x| <= tol |l| |x|`.
fn lobpcg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64]) -> Vec<f64>,
    init: Vec<Vec<f64>>,
    want: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let len = init[0].len();
    let k = init.len();
    let a_of = |v: &[f64]| {
        let mut o = vec![0.0; len];
        apply(v, &mut o);
        o
    };
    let mut x = init;
    let mut ax: Vec<Vec<f64>> = x.iter().map(|v| a_of(v)).collect();
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut ap: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    let mut lambda = vec![0.0; k];
    for _ in 0..max_iter {
        let mut w: Vec<Vec<f64>> = Vec::new();
        if !first {
            let mut done = true;
            for i in 0..k {
                let r: Vec<f64> = ax[i].iter().zip(&x[i]).map(|(a, b)| a - lambda[i] * b).collect();
                let rn = dot(&r, &r).sqrt();
                if i < want && rn > tol * lambda[i].abs() * dot(&x[i], &x[i]).sqrt() {
                    done = false;
                }
                let mut t = precond(&r);
                let tn = dot(&t, &t).sqrt();
                if tn > 0.0 {
                    t.iter_mut().for_each(|v| *v /= tn);
                    w.push(t);
                }
            }
            if done {
                return Ok((lambda[..want].to_vec(), x[..want].to_vec()));
            }
        }
        let aw: Vec<Vec<f64>> = w.iter().map(|v| a_of(v)).collect();
        let basis: Vec<&Vec<f64>> = x.iter().chain(&w).chain(&p).collect();
        let abasis: Vec<&Vec<f64>> = ax.iter().chain(&aw).chain(&ap).collect();
        let m = basis.len();
        let mut gb = DMatrix::zeros(m, m);
        let mut ga = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let b = dot(basis[i], basis[j]);
                let a = 0.5 * (dot(basis[i], abasis[j]) + dot(abasis[i], basis[j]));
                gb[(i, j)] = b;
                gb[(j, i)] = b;
                ga[(i, j)] = a;
                ga[(j, i)] = a;
            }
        }
        let d: Vec<f64> = (0..m).map(|i| 1.0 / gb[(i, i)].sqrt()).collect();
        let scale = |g: &DMatrix<f64>| DMatrix::from_fn(m, m, |i, j| g[(i, j)] * d[i] * d[j]);
        let (gbs, gas) = (scale(&gb), scale(&ga));
        let eb = SymmetricEigen::new(gbs);
        let top = eb.eigenvalues.max();
        let keep: Vec<usize> = (0..m).filter(|&i| eb.eigenvalues[i] > 1e-13 * top).collect();
        if keep.len() < k {
            return Err(Error::Numerical("search basis collapsed".into()));
        }
        let z = DMatrix::from_fn(m, keep.len(), |i, c| {
            eb.eigenvectors[(i, keep[c])] / eb.eigenvalues[keep[c]].sqrt()
        });
        let mut h = z.transpose() * gas * &z;
        h = (&h + h.transpose()) * 0.5;
        let eh = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..keep.len()).collect();
        order.sort_by(|&a, &b| eh.eigenvalues[a].total_cmp(&eh.eigenvalues[b]));
        let y = DMatrix::from_fn(keep.len(), k, |i, c| eh.eigenvectors[(i, order[c])]);
        let c = DMatrix::from_fn(m, k, |i, col| (&z * &y)[(i, col)] * d[i]);
        for (i, l) in lambda.iter_mut().enumerate() {
            *l = eh.eigenvalues[order[i]];
        }
        let nx = x.len();
        let new_p: Vec<Vec<f64>> = (0..k)
            .map(|col| combine(&basis, |j| if j < nx { 0.0 } else { c[(j, col)] }, len))
            .collect();
        let new_ap: Vec<Vec<f64>> = (0..k)
            .map(|col| combine(&abasis, |j| if j < nx { 0.0 } else { c[(j, col)] }, len))
            .collect();
        let new_x: Vec<Vec<f64>> = (0..k).map(|col| combine(&basis, |j| c[(j, col)], len)).collect();
        let new_ax: Vec<Vec<f64>> = (0..k).map(|col| combine(&abasis, |j| c[(j, col)], len)).collect();
        x = new_x;
        ax = new_ax;
        if !first {
            p = new_p;
            ap = new_ap;
        }
        first = false;
    }
    Err(Error::Numerical(format!(
        "grid eigensolver did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}

/// Relative residual the grid eigensolver converges to.
pub const GRID_TOL: f64 = 1e-8;

/// Lowest `count` eigenvalues of the finite difference form on `grid`,
/// ascending.
pub fn grid_spectrum(grid: &GridSpec, curve: &Curve, beta: f64, mask: &Puncture, count: usize) -> Result<Vec<f64>> {
    grid.validate()?;
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    let inside = 0.98 * grid.half_width;
    if curve.nodes().iter().any(|nd| nd.x[0].abs() > inside || nd.x[1].abs() > inside) {
        return Err(Error::Domain("the curve reaches the edge of the box".into()));
    }
    let n = grid.interior();
    let op = GridOperator {
        n,
        inv_h2: 1.0 / (grid.h * grid.h),
        coupling: beta / (grid.h * grid.h),
        points: line_points(grid, curve, mask),
    };
    let pre = SinePreconditioner::new(n, grid.h, 1.0 + 0.25 * beta * beta);
    let block = count + 2;
    let init = initial_block(grid, curve, mask, &pre, block);
    let (lambda, vecs) = lobpcg(|u, o| op.apply(u, o), |r| pre.apply(r), init, count, GRID_TOL, 2000)?;
    // Only bound states must fit in the box; modes at positive energy
    // fill it by nature.
    for (v, _) in vecs.iter().zip(&lambda).filter(|(_, &l)| l < 0.0) {
        let share = grid.boundary_share(v);
        if share > BOUNDARY_MASS_TOL {
            return Err(Error::Domain(format!(
                "eigenfunction carries {share:e} of its mass at the box edge; enlarge the box"
            )));
        }
    }
    Ok(lambda)
}

// Smoothed angular modes of the curve, plus box modes as a fallback
// when the curve is empty.
fn initial_block(grid: &GridSpec, curve: &Curve, mask: &Puncture, pre: &SinePreconditioner, k: usize) -> Vec<Vec<f64>> {
    let n = grid.interior();
    let pts = line_points(grid, curve, mask);
    (0..k)
        .map(|j| {
            let mut v = vec![0.0; n * n];
            let freq = ((j + 1) / 2) as f64;
            let count = pts.len().max(1) as f64;
            for (q, p) in pts.iter().enumerate() {
                let phase = 2.0 * PI * freq * q as f64 / count;
                let g = if j % 2 == 0 { phase.cos() } else { phase.sin() };
                for &(idx, c) in &p.corners[..p.len] {
                    v[idx] += p.weight * g * c;
                }
            }
            // Box mode (j+1, 1) keeps the block independent.
            for b in 0..n {
                for a in 0..n {
                    let sx = (PI * (j + 1) as f64 * (a + 1) as f64 / (n + 1) as f64).sin();
                    let sy = (PI * (b + 1) as f64 / (n + 1) as f64).sin();
                    v[a + n * b] += 1e-3 * sx * sy;
                }
            }
            let mut v = pre.apply(&v);
            let nv = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nv);
            v
        })
        .collect()
}

/// Barycentric weights of the Gauss-Legendre nodes.
fn barycentric(rule: &GaussLegendre) -> Vec<f64> {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .enumerate()
        .map(|(j, (t, w))| {
            let s = ((1.0 - t * t) * w).sqrt();
            if j % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect()
}

fn interpolate(nodes: &[f64], bw: &[f64], vals: &[f64], t: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((&tj, &wj), &fj) in nodes.iter().zip(bw).zip(vals) {
        let d = t - tj;
        if d == 0.0 {
            return fj;
        }
        num += wj / d * fj;
        den += wj / d;
    }
    num / den
}

/// Panels are subdivided until the target is this many sub-panel lengths
/// away, at most `MAX_DEPTH` times.
const REFINE_DISTANCE: f64 = 1.0;
const MAX_DEPTH: u32 = 12;

/// One panel of the density with the data needed for refinement.
struct SourcePanel {
    first: usize,
    a: f64,
    b: f64,
    values: Vec<f64>,
    centre: [f64; 2],
    radius: f64,
    /// Low-order resamplings `(position, weight * density)` for distant
    /// targets, coarsest first.
    tiers: [Vec<([f64; 2], f64)>; 2],
}

/// Tier `k` serves targets farther than `TIER_DISTANCE[k]` panel lengths.
/// Gauss rules of these orders on an analytic integrand lose less than
/// 1e-9 there.
const TIER_ORDER: [usize; 2] = [3, 6];
const TIER_DISTANCE: [f64; 2] = [8.0, 2.0];
/// Contributions below `exp(-SKIP)` of the near field are dropped.
const SKIP: f64 = 27.0;

struct Potential<'c> {
    curve: &'c Curve,
    kappa: f64,
    panels: Vec<SourcePanel>,
    bw: Vec<f64>,
}

impl Potential<'_> {
    fn at(&self, x: [f64; 2]) -> f64 {
        let rule = self.curve.rule();
        let mut acc = 0.0;
        for p in &self.panels {
            let d = (x[0] - p.centre[0]).hypot(x[1] - p.centre[1]) - p.radius;
            if self.kappa * d > SKIP {
                continue;
            }
            let len = p.b - p.a;
            if let Some(k) = (0..2).find(|&k| d > TIER_DISTANCE[k] * len) {
                acc += p.tiers[k]
                    .iter()
                    .map(|(y, wf)| wf * specfun::k0(self.kappa * (x[0] - y[0]).hypot(x[1] - y[1])))
                    .sum::<f64>();
                continue;
            }
            acc += self.panel(p.a, p.b, p, x, &rule.nodes, 0);
        }
        acc / (2.0 * PI)
    }

    // Integral of K0 against the panel density over the sub-panel [a, b].
    fn panel(&self, a: f64, b: f64, p: &SourcePanel, x: [f64; 2], t: &[f64], depth: u32) -> f64 {
        let spec = self.curve.spec();
        let len = b - a;
        let mid = spec.position(0.5 * (a + b));
        let d = (x[0] - mid[0]).hypot(x[1] - mid[1]);
        if d < REFINE_DISTANCE * len && depth < MAX_DEPTH {
            let m = 0.5 * (a + b);
            return self.panel(a, m, p, x, t, depth + 1) + self.panel(m, b, p, x, t, depth + 1);
        }
        let rule = self.curve.rule();
        if depth == 0 {
            // Unrefined: the stored nodes and values.
            let nodes = &self.curve.nodes()[p.first..p.first + t.len()];
            return nodes
                .iter()
                .zip(&p.values)
                .map(|(nd, f)| {
                    let r = (x[0] - nd.x[0]).hypot(x[1] - nd.x[1]);
                    if r == 0.0 {
                        0.0
                    } else {
                        nd.w * specfun::k0(self.kappa * r) * f
                    }
                })
                .sum();
        }
        let (c, hw) = (0.5 * (a + b), 0.5 * len);
        let (pc, ph) = (0.5 * (p.a + p.b), 0.5 * (p.b - p.a));
        let mut acc = 0.0;
        for (tj, wj) in t.iter().zip(&rule.weights) {
            let s = c + hw * tj;
            let y = spec.position(s);
            let r = (x[0] - y[0]).hypot(x[1] - y[1]);
            if r == 0.0 {
                continue;
            }
            let f = interpolate(t, &self.bw, &p.values, (s - pc) / ph);
            acc += wj * hw * specfun::k0(self.kappa * r) * f;
        }
        acc
    }
}

/// Relative gap between the norm stored with `state` and [`grid_norm_sq`].
pub fn norm_crosscheck(curve: &Curve, state: &BoundState, grid: &GridSpec) -> Result<f64> {
    let quad = grid_norm_sq(curve, state, grid)?;
    Ok((quad - state.l2_norm_sq).abs() / state.l2_norm_sq)
}

/// Trapezoid quadrature on `grid` of the squared potential of `state`.
/// Near the curve the density is resampled on refined sub-panels so that
/// grid points close to the curve see an accurate potential; far away
/// each panel collapses to a low-order rule.
pub fn grid_norm_sq(curve: &Curve, state: &BoundState, grid: &GridSpec) -> Result<f64> {
    grid.validate()?;
    if !state.tail_amplitudes.is_empty() {
        return Err(Error::Precondition(
            "the plane quadrature does not cover ray tails".into(),
        ));
    }
    if !(state.l2_norm_sq > 0.0) {
        return Err(Error::Precondition("state has no positive norm".into()));
    }
    let order = curve.mesh().order;
    let mut density = vec![0.0; curve.len()];
    for (&i, &f) in state.active.iter().zip(&state.density) {
        density[i] = f;
    }
    let spec = curve.spec();
    let bw = barycentric(curve.rule());
    let tier_rules = TIER_ORDER.map(GaussLegendre::new);
    let panels: Vec<SourcePanel> = curve
        .panels()
        .iter()
        .filter(|p| state.active.contains(&p.first))
        .map(|p| {
            let mid = spec.position(0.5 * (p.a + p.b));
            let radius = curve.nodes()[p.first..p.first + order]
                .iter()
                .map(|nd| (nd.x[0] - mid[0]).hypot(nd.x[1] - mid[1]))
                .fold(0.5 * (p.b - p.a), f64::max);
            let values = density[p.first..p.first + order].to_vec();
            let (c, hw) = (0.5 * (p.a + p.b), 0.5 * (p.b - p.a));
            let tiers = [0, 1].map(|k| {
                let r = &tier_rules[k];
                r.nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(t, w)| {
                        let f = interpolate(&curve.rule().nodes, &bw, &values, *t);
                        (spec.position(c + hw * t), w * hw * f)
                    })
                    .collect()
            });
            SourcePanel {
                first: p.first,
                a: p.a,
                b: p.b,
                values,
                centre: mid,
                radius,
                tiers,
            }
        })
        .collect();
    let pot = Potential {
        curve,
        kappa: state.kappa,
        panels,
        bw,
    };
    let n = grid.interior();
    let mut phi = vec![0.0; n * n];
    for b in 0..n {
        let y = grid.coord(b);
        for a in 0..n {
            phi[a + n * b] = pot.at([grid.coord(a), y]);
        }
    }
    let share = grid.boundary_share(&phi);
    if share > BOUNDARY_MASS_TOL {
        return Err(Error::Domain(format!(
            "potential carries {share:e} of its mass at the box edge; enlarge the box"
        )));
    }
    Ok(grid.h * grid.h * phi.iter().map(|v| v * v).sum::<f64>())
}

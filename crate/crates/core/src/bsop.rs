//! Birman-Schwinger solver.
//!
//! `-kappa^2` is an eigenvalue of the curve operator with coupling `beta`
//! exactly when `1/beta` is an eigenvalue of `Q(kappa)`, the free resolvent
//! kernel restricted to the curve. Each eigenvalue `eig_j(Q(kappa))`
//! decreases strictly in `kappa`, so every bound state is the unique root
//! of `beta * eig_j(Q(kappa)) - 1` and can be bracketed.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Curve, CurveSpec, MeshParams, Puncture};
use crate::kernel::{self, Kernel};
use crate::roots;
use crate::tails::{decay_rate, RayTails};

/// Two eigenvalues belong to one degenerate group when they differ by at
/// most `max(GROUP_ABS, GROUP_REL * |lambda|)`.
pub const GROUP_ABS: f64 = 1e-8;
pub const GROUP_REL: f64 = 1e-6;

/// Largest acceptable `|beta * eig - 1|` at a reported root.
pub const SECULAR_TOL: f64 = 1e-6;

/// How a truncated infinite curve is closed at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Exponential ray tails on curves that have rays, nothing otherwise.
    #[default]
    Auto,
    /// The density simply stops at the truncation points.
    Truncate,
}

/// `Q(kappa)` in symmetric form on the active nodes, followed by the ray
/// tail unknowns when present.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kappa: f64,
    pub entries: DMatrix<f64>,
    pub active: Arc<Vec<usize>>,
    pub tail_dofs: usize,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRange {
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Absolute tolerance on each root kappa.
    pub tol: f64,
}

impl SearchRange {
    /// Default range: from just above the threshold up to `2 beta + 10`.
    pub fn for_curve(spec: &CurveSpec, beta: f64) -> Self {
        let kappa_min = if spec.has_ray_tails() {
            0.5 * beta * (1.0 + 1e-10)
        } else {
            1e-8
        };
        Self {
            kappa_min,
            kappa_max: 2.0 * beta + 10.0,
            tol: 1e-12,
        }
    }

    fn validate(&self, beta: f64, tails: bool) -> Result<()> {
        if !(self.kappa_min > 0.0 && self.kappa_max > self.kappa_min && self.kappa_max.is_finite()) {
            return Err(Error::Domain(format!(
                "search range must satisfy 0 < kappa_min < kappa_max, got [{}, {}]",
                self.kappa_min, self.kappa_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        if tails && self.kappa_min <= 0.5 * beta {
            return Err(Error::Domain(format!(
                "kappa_min {} must exceed beta/2 = {} on an infinite curve",
                self.kappa_min,
                0.5 * beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub kappa: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Density values on the active nodes.
    pub density: Vec<f64>,
    /// Amplitudes of the normalized ray profiles, empty without tails.
    pub tail_amplitudes: Vec<f64>,
    pub active: Arc<Vec<usize>>,
    /// `||phi||^2` of the single-layer potential generated by `density`.
    pub l2_norm_sq: f64,
    /// `phi(0) / ||phi||`.
    pub value_at_origin: f64,
    pub group: usize,
    /// `|beta * eig_j(Q(kappa)) - 1|` at the reported root.
    pub secular_residual: f64,
}

impl BoundState {
    /// Decay rate along the rays, when the state carries tails.
    pub fn tail_decay(&self) -> Option<f64> {
        (!self.tail_amplitudes.is_empty()).then(|| decay_rate(self.kappa, self.beta))
    }

    /// The same state with density and tail amplitudes multiplied by `c`;
    /// normalization data are left stale.
    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.density.iter_mut().for_each(|f| *f *= c);
        s.tail_amplitudes.iter_mut().for_each(|a| *a *= c);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub beta: f64,
    pub threshold: f64,
    /// Ascending in lambda.
    pub states: Vec<BoundState>,
    /// Index ranges of degenerate groups, in order.
    pub groups: Vec<Vec<usize>>,
}

impl Spectrum {
    pub fn lambdas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.lambda).collect()
    }
}

/// Bundles everything needed to form `Q(kappa)` for one experiment.
#[derive(Debug, Clone)]
pub struct Operator<'c> {
    curve: &'c Curve,
    beta: f64,
    active: Arc<Vec<usize>>,
    tails: Option<RayTails>,
}

impl<'c> Operator<'c> {
    pub fn new(curve: &'c Curve, beta: f64, mask: &Puncture, closure: Closure) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if mask.active.is_empty() {
            return Err(Error::Precondition("the puncture removes every node".into()));
        }
        let tails = match closure {
            Closure::Auto => RayTails::new(curve.spec()),
            Closure::Truncate => None,
        };
        Ok(Self {
            curve,
            beta,
            active: Arc::new(mask.active.clone()),
            tails,
        })
    }

    fn from_state(curve: &'c Curve, state: &BoundState) -> Result<Self> {
        let tails = if state.tail_amplitudes.is_empty() {
            None
        } else {
            Some(RayTails::new(curve.spec()).ok_or_else(|| {
                Error::Precondition("state carries ray tails but the curve has none".into())
            })?)
        };
        Ok(Self {
            curve,
            beta: state.beta,
            active: state.active.clone(),
            tails,
        })
    }

    pub fn has_tails(&self) -> bool {
        self.tails.is_some()
    }

    pub fn threshold(&self) -> f64 {
        if self.tails.is_some() {
            -0.25 * self.beta * self.beta
        } else {
            0.0
        }
    }

    /// Kernel matrix, including the tail block when present.
    pub fn matrix(&self, kernel: Kernel, kappa: f64) -> Result<KernelMatrix> {
        self.build(kernel, kappa, true)
    }

    /// The Green matrix before symmetrization; see [`kernel::assemble_nystrom`].
    pub fn nystrom_matrix(&self, kappa: f64) -> Result<KernelMatrix> {
        self.build(Kernel::Green, kappa, false)
    }

    fn build(&self, kernel: Kernel, kappa: f64, symmetric: bool) -> Result<KernelMatrix> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        let core = if symmetric {
            kernel::assemble_matrix(self.curve, kernel, kappa, &self.active)
        } else {
            kernel::assemble_nystrom(self.curve, kernel, kappa, &self.active)
        };
        let Some(tails) = &self.tails else {
            return Ok(KernelMatrix {
                kappa,
                entries: core,
                active: self.active.clone(),
                tail_dofs: 0,
            });
        };
        let gamma = decay_rate(kappa, self.beta);
        if gamma <= 0.0 {
            return Err(Error::Domain(format!(
                "kappa {kappa} is not below the threshold of the rays (beta/2 = {})",
                0.5 * self.beta
            )));
        }
        let n = core.nrows();
        let mut m = core.resize(n + 2, n + 2, 0.0);
        let nodes = self.curve.nodes();
        for arm in 0..2 {
            for (a, &i) in self.active.iter().enumerate() {
                let v = nodes[i].w.sqrt() * tails.against_point(kernel, kappa, gamma, arm, nodes[i].x);
                m[(a, n + arm)] = v;
                m[(n + arm, a)] = v;
            }
        }
        let b = tails.block(kernel, kappa, gamma);
        for r in 0..2 {
            for c in 0..2 {
                m[(n + r, n + c)] = b[r][c];
            }
        }
        Ok(KernelMatrix {
            kappa,
            entries: m,
            active: self.active.clone(),
            tail_dofs: 2,
        })
    }

    /// Eigenvalues of `Q(kappa)`, descending.
    pub fn eigenvalues(&self, kappa: f64) -> Result<Vec<f64>> {
        let q = self.matrix(Kernel::Green, kappa)?;
        let mut e: Vec<f64> = q.entries.symmetric_eigenvalues().iter().copied().collect();
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite eigenvalue at kappa = {kappa}")));
        }
        e.sort_by(|a, b| b.total_cmp(a));
        Ok(e)
    }

    // Density, tails and phi(0) of a symmetric-form vector.
    fn split_vector(&self, v: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let nodes = self.curve.nodes();
        let n = self.active.len();
        let density = self
            .active
            .iter()
            .enumerate()
            .map(|(a, &i)| v[a] / nodes[i].w.sqrt())
            .collect();
        let tails = (n..v.len()).map(|k| v[k]).collect();
        (density, tails)
    }

    fn symmetric_vector(&self, density: &[f64], tails: &[f64]) -> DVector<f64> {
        let nodes = self.curve.nodes();
        DVector::from_iterator(
            density.len() + tails.len(),
            self.active
                .iter()
                .zip(density)
                .map(|(&i, f)| f * nodes[i].w.sqrt())
                .chain(tails.iter().copied()),
        )
    }

    /// Unnormalized `phi(0)` for a symmetric-form vector.
    fn phi_at_origin(&self, kappa: f64, v: &DVector<f64>) -> f64 {
        let n = self.active.len();
        let core = kernel::potential_on_curve(
            self.curve,
            Kernel::Green,
            kappa,
            &self.active,
            &v.as_slice()[..n],
            0.0,
        );
        let tail = match &self.tails {
            Some(t) => {
                let gamma = decay_rate(kappa, self.beta);
                (0..2)
                    .map(|arm| v[n + arm] * t.against_point(Kernel::Green, kappa, gamma, arm, [0.0, 0.0]))
                    .sum()
            }
            None => 0.0,
        };
        core + tail
    }
}

/// `Q(kappa)` on the retained nodes, with truncated ends.
pub fn assemble(curve: &Curve, kappa: f64, mask: &Puncture) -> Result<KernelMatrix> {
    // beta only enters through the tails, which this form leaves out.
    Operator::new(curve, 1.0, mask, Closure::Truncate)?.matrix(Kernel::Green, kappa)
}

/// All eigenpairs, eigenvalues descending, eigenvectors orthonormal.
pub fn eig_descending(q: &KernelMatrix) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(q.entries.clone());
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, eig.eigenvectors.column(k).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Bound states with the default closure.
pub fn solve_spectrum(curve: &Curve, beta: f64, mask: &Puncture, search: SearchRange) -> Result<Spectrum> {
    let op = Operator::new(curve, beta, mask, Closure::Auto)?;
    solve_operator(&op, search, None)
}

pub fn solve_spectrum_with(
    curve: &Curve,
    beta: f64,
    mask: &Puncture,
    search: SearchRange,
    closure: Closure,
) -> Result<Spectrum> {
    let op = Operator::new(curve, beta, mask, closure)?;
    solve_operator(&op, search, None)
}

struct EigCache<'o, 'c> {
    op: &'o Operator<'c>,
    map: HashMap<u64, Vec<f64>>,
}

impl EigCache<'_, '_> {
    fn get(&mut self, kappa: f64) -> Result<&Vec<f64>> {
        let key = kappa.to_bits();
        if !self.map.contains_key(&key) {
            let e = self.op.eigenvalues(kappa)?;
            self.map.insert(key, e);
        }
        Ok(&self.map[&key])
    }

    fn g(&mut self, j: usize, kappa: f64) -> Result<f64> {
        let beta = self.op.beta;
        Ok(beta * self.get(kappa)?[j] - 1.0)
    }
}

/// Root search with optional per-state brackets `(lo, hi)` to try first,
/// as produced by a nearby solve.
pub fn solve_operator(op: &Operator, search: SearchRange, hints: Option<&[(f64, f64)]>) -> Result<Spectrum> {
    search.validate(op.beta, op.has_tails())?;
    let beta = op.beta;
    let mut cache = EigCache {
        op,
        map: HashMap::new(),
    };
    let (kmin, kmax) = (search.kappa_min, search.kappa_max);
    let at_max = cache.get(kmax)?.clone();
    if beta * at_max[0] >= 1.0 {
        return Err(Error::Bracket(format!(
            "a state lies deeper than kappa_max = {kmax}: g_0(kappa_max) = {:e}",
            beta * at_max[0] - 1.0
        )));
    }
    let at_min = cache.get(kmin)?.clone();
    let count = at_min.iter().take_while(|&&e| beta * e > 1.0).count();
    let mut kappas = Vec::with_capacity(count);
    for j in 0..count {
        let mut bracket = None;
        if let Some(&(lo, hi)) = hints.and_then(|h| h.get(j)) {
            let lo = lo.max(kmin);
            let hi = hi.min(kmax);
            if lo < hi {
                let (glo, ghi) = (cache.g(j, lo)?, cache.g(j, hi)?);
                if glo > 0.0 && ghi <= 0.0 {
                    bracket = Some((lo, hi, glo, ghi));
                }
            }
        }
        let (lo, hi, glo, ghi) = match bracket {
            Some(b) => b,
            None => coarse_bracket(&mut cache, j, kmin, kmax)?,
        };
        let root = roots::brent(|k| cache.g(j, k), lo, hi, glo, ghi, search.tol)?;
        kappas.push(root);
    }
    assemble_spectrum(op, &mut cache, &kappas)
}

// Tightest sign-changing bracket for branch j on a geometric grid.
fn coarse_bracket(cache: &mut EigCache, j: usize, kmin: f64, kmax: f64) -> Result<(f64, f64, f64, f64)> {
    let mut lo = (kmin, cache.g(j, kmin)?);
    let mut hi = (kmax, cache.g(j, kmax)?);
    // Reuse anything already evaluated.
    let known: Vec<f64> = cache.map.keys().map(|&b| f64::from_bits(b)).collect();
    for k in known {
        if k > lo.0 && k < hi.0 {
            let g = cache.g(j, k)?;
            if g > 0.0 {
                lo = (k, g);
            } else {
                hi = (k, g);
            }
        }
    }
    // A few geometric bisections keep Brent's first steps well conditioned.
    for _ in 0..3 {
        let m = (lo.0 * hi.0).sqrt();
        let g = cache.g(j, m)?;
        if g > 0.0 {
            lo = (m, g);
        } else {
            hi = (m, g);
        }
    }
    // g(hi) = 0 exactly is a root; Brent returns it.
    if !(lo.1 > 0.0 && hi.1 <= 0.0) {
        return Err(Error::Bracket(format!(
            "branch {j}: g({}) = {:e}, g({}) = {:e}",
            lo.0, lo.1, hi.0, hi.1
        )));
    }
    Ok((lo.0, hi.0, lo.1, hi.1))
}

fn group_indices(lambdas: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if {
                let prev = lambdas[*g.last().unwrap()];
                (l - prev).abs() <= GROUP_ABS.max(GROUP_REL * prev.abs())
            } =>
            {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn assemble_spectrum(op: &Operator, cache: &mut EigCache, kappas: &[f64]) -> Result<Spectrum> {
    let beta = op.beta;
    let groups = group_indices(&kappas.iter().map(|k| -k * k).collect::<Vec<_>>());
    let mut states = Vec::with_capacity(kappas.len());
    for (gid, group) in groups.iter().enumerate() {
        let kappa_g = group.iter().map(|&j| kappas[j]).sum::<f64>() / group.len() as f64;
        let q = op.matrix(Kernel::Green, kappa_g)?;
        let pairs = eig_descending(&q);
        let vs: Vec<DVector<f64>> = group.iter().map(|&j| pairs[j].1.clone()).collect();
        let eigs: Vec<f64> = group.iter().map(|&j| pairs[j].0).collect();
        let (vs, shifts) = nystrom_correction(op, kappa_g, &vs, &eigs)?;
        // One Newton step moves each root from the symmetric matrix to the
        // Nystrom matrix; the branch slope only needs a few digits.
        let dk = 1e-4 * kappa_g;
        let (e0, e1) = (cache.get(kappa_g)?.clone(), cache.get(kappa_g + dk)?.clone());
        let mut refined = Vec::with_capacity(group.len());
        for (&j, shift) in group.iter().zip(&shifts) {
            let slope = (e1[j] - e0[j]) / dk;
            if !(slope < 0.0) {
                return Err(Error::Numerical(format!(
                    "branch {j} is not decreasing at kappa = {kappa_g}: slope {slope:e}"
                )));
            }
            refined.push(kappas[j] - shift / slope);
        }
        refined.sort_by(|a, b| b.total_cmp(a));
        let kappa_r = refined.iter().sum::<f64>() / refined.len() as f64;
        let norm_m = op.matrix(Kernel::Norm, kappa_r)?.entries;
        let (vs, norms) = orthonormalize(&norm_m, vs)?;
        for ((&j, kappa), (v, l2)) in group.iter().zip(refined).zip(vs.into_iter().zip(norms)) {
            let (density, tails) = op.split_vector(&v);
            let phi0 = op.phi_at_origin(kappa_r, &v);
            let residual = (beta * cache.get(kappas[j])?[j] - 1.0).abs();
            states.push(BoundState {
                kappa,
                lambda: -kappa * kappa,
                beta,
                density,
                tail_amplitudes: tails,
                active: op.active.clone(),
                l2_norm_sq: l2,
                value_at_origin: phi0 / l2.sqrt(),
                group: gid,
                secular_residual: residual,
            });
        }
    }
    Ok(Spectrum {
        beta,
        threshold: op.threshold(),
        states,
        groups,
    })
}

/// Right eigenvectors of the Nystrom matrix for one group, and the shifts
/// of its eigenvalues from those of the symmetric matrix, both descending.
/// One step of two-sided block inverse iteration from the symmetric
/// eigenvectors; the two-sided Rayleigh quotient then carries the product
/// of the left and right errors.
fn nystrom_correction(
    op: &Operator,
    kappa: f64,
    vs: &[DVector<f64>],
    eigs: &[f64],
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let s = op.nystrom_matrix(kappa)?.entries;
    let n = s.nrows();
    let sigma = eigs.iter().sum::<f64>() / eigs.len() as f64;
    let shifted = &s - DMatrix::<f64>::identity(n, n) * sigma;
    let v = DMatrix::from_columns(vs);
    let singular = || Error::Numerical(format!("shifted Nystrom matrix is singular at kappa = {kappa}"));
    let x = shifted.clone().lu().solve(&v).ok_or_else(singular)?.qr().q();
    let y = shifted.transpose().lu().solve(&v).ok_or_else(singular)?.qr().q();
    let yt = y.transpose();
    let p = (&yt * &x).try_inverse().ok_or_else(singular)? * (&yt * &s * &x);
    let mut lam: Vec<f64> = p.complex_eigenvalues().iter().map(|z| z.re).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let shifts = lam.iter().zip(eigs).map(|(a, b)| a - b).collect();
    Ok((x.column_iter().map(|c| c.into_owned()).collect(), shifts))
}

/// Sign convention: the density is positive where its magnitude peaks.
fn fix_sign(v: &mut DVector<f64>) {
    let k = v.iamax();
    if v[k] < 0.0 {
        v.neg_mut();
    }
}

/// Lowdin-orthonormalizes a group in the `norm_m` inner product. Single
/// vectors keep their Euclidean normalization; returns squared norms.
fn orthonormalize(norm_m: &DMatrix<f64>, mut vs: Vec<DVector<f64>>) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    for v in vs.iter_mut() {
        fix_sign(v);
    }
    let nv: Vec<DVector<f64>> = vs.iter().map(|v| norm_m * v).collect();
    if vs.len() == 1 {
        let l2 = vs[0].dot(&nv[0]);
        if !(l2 > 0.0) {
            return Err(Error::Numerical(format!("non-positive norm {l2:e}")));
        }
        return Ok((vs, vec![l2]));
    }
    let m = vs.len();
    let gram = DMatrix::from_fn(m, m, |a, b| vs[a].dot(&nv[b]));
    let eig = SymmetricEigen::new(gram.clone());
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Numerical("degenerate group has a singular Gram matrix".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt()))
        * eig.eigenvectors.transpose();
    let mut out: Vec<DVector<f64>> = (0..m)
        .map(|a| (0..m).fold(DVector::zeros(vs[0].len()), |acc, b| acc + &vs[b] * inv_sqrt[(b, a)]))
        .collect();
    for v in out.iter_mut() {
        fix_sign(v);
    }
    Ok((out, vec![1.0; m]))
}

/// Recomputes `l2_norm_sq` and `value_at_origin` from the stored density.
pub fn normalize_and_evaluate(curve: &Curve, state: &BoundState) -> Result<BoundState> {
    if !(state.secular_residual <= SECULAR_TOL) || !(state.kappa > 0.0) {
        return Err(Error::Precondition(format!(
            "state is not converged: secular residual {:e}",
            state.secular_residual
        )));
    }
    let op = Operator::from_state(curve, state)?;
    if state.density.len() != op.active.len() {
        return Err(Error::Precondition(format!(
            "density has {} values for {} active nodes",
            state.density.len(),
            op.active.len()
        )));
    }
    let v = op.symmetric_vector(&state.density, &state.tail_amplitudes);
    let l2 = if op.tails.is_some() {
        let m = op.matrix(Kernel::Norm, state.kappa)?.entries;
        v.dot(&(&m * &v))
    } else {
        kernel::quadratic_form(curve, Kernel::Norm, state.kappa, &op.active, v.as_slice())
    };
    if !(l2 > 0.0) {
        return Err(Error::Numerical(format!("non-positive norm {l2:e}")));
    }
    let phi0 = op.phi_at_origin(state.kappa, &v);
    let mut out = state.clone();
    out.l2_norm_sq = l2;
    out.value_at_origin = phi0 / l2.sqrt();
    Ok(out)
}

/// Gram matrix of a set of states in the `L2(R^2)` inner product of their
/// potentials. All states must share kappa (to grouping accuracy) and mask.
pub fn gram_matrix(curve: &Curve, states: &[&BoundState]) -> Result<DMatrix<f64>> {
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("empty group".into()))?;
    let op = Operator::from_state(curve, first)?;
    let kappa = states.iter().map(|s| s.kappa).sum::<f64>() / states.len() as f64;
    let m = op.matrix(Kernel::Norm, kappa)?.entries;
    let vs: Vec<DVector<f64>> = states
        .iter()
        .map(|s| op.symmetric_vector(&s.density, &s.tail_amplitudes))
        .collect();
    let mv: Vec<DVector<f64>> = vs.iter().map(|v| &m * v).collect();
    Ok(DMatrix::from_fn(vs.len(), vs.len(), |a, b| vs[a].dot(&mv[b])))
}

/// Outcome of re-solving with every ray twice as long.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub half_length: f64,
    pub lambdas: Vec<f64>,
    pub lambdas_doubled: Vec<f64>,
    pub max_abs_change: f64,
    pub max_rel_change: f64,
    /// Every `|delta lambda_j| < 1e-8 |lambda_j|` and the counts agree.
    pub accepted: bool,
}

fn with_half_length(spec: &CurveSpec, l: f64) -> Option<CurveSpec> {
    Some(match *spec {
        CurveSpec::Segment { .. } => CurveSpec::Segment { half_length: l },
        CurveSpec::SmoothedBrokenLine {
            half_angle,
            smoothing_radius,
            ..
        } => CurveSpec::SmoothedBrokenLine {
            half_angle,
            smoothing_radius,
            half_length: l,
        },
        CurveSpec::MollifiedBrokenLine {
            half_angle,
            smoothing_radius,
            ..
        } => CurveSpec::MollifiedBrokenLine {
            half_angle,
            smoothing_radius,
            half_length: l,
        },
        CurveSpec::Circle { .. } => return None,
    })
}

/// Doubling test for truncated infinite curves. The doubled curve keeps
/// the panel size of the original.
pub fn truncation_check(
    spec: &CurveSpec,
    mesh: &MeshParams,
    beta: f64,
    search: SearchRange,
) -> Result<TruncationReport> {
    let l = match *spec {
        CurveSpec::Segment { half_length }
        | CurveSpec::SmoothedBrokenLine { half_length, .. }
        | CurveSpec::MollifiedBrokenLine { half_length, .. } => half_length,
        CurveSpec::Circle { .. } => {
            return Err(Error::Precondition("closed curves are not truncated".into()))
        }
    };
    let doubled = with_half_length(spec, 2.0 * l).expect("open curve");
    doubled.validate()?;
    let scale = doubled.total_length() / spec.total_length();
    let mesh2 = MeshParams {
        base_panels: (mesh.base_panels as f64 * scale).ceil() as usize,
        ..*mesh
    };
    let solve = |s: &CurveSpec, m: &MeshParams| -> Result<Vec<f64>> {
        let c = Curve::build(*s, *m)?;
        let p = c.puncture(0.0)?;
        Ok(solve_spectrum(&c, beta, &p, search)?.lambdas())
    };
    let a = solve(spec, mesh)?;
    let b = solve(&doubled, &mesh2)?;
    let (mut abs, mut rel) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(&b) {
        abs = abs.max((x - y).abs());
        rel = rel.max((x - y).abs() / x.abs());
    }
    let accepted = a.len() == b.len() && rel < 1e-8;
    Ok(TruncationReport {
        half_length: l,
        lambdas: a,
        lambdas_doubled: b,
        max_abs_change: abs,
        max_rel_change: rel,
        accepted,
    })
}

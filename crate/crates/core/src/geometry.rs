//! Arclength-parameterized curves, their panel meshes and punctures.
//!
//! Every curve passes through the origin at `s = 0` with tangent `(1, 0)`.
//! The mesh is a sequence of Gauss-Legendre panels whose breakpoints are
//! graded geometrically toward `s = 0`, so that dyadic punctures
//! `{|s| < eps}` remove whole panels and never cut one.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::quadrature::{log_weights, GaussLegendre};

/// Panels whose local coordinate `|t0|` for a target is below this get
/// product log weights; farther panels use the plain rule.
pub const NEAR_RADIUS: f64 = 3.0;

// Levels of dyadic refinement toward the free ends of a segment.
const END_LEVELS: usize = 6;

/// Shape of the interaction support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveSpec {
    /// Circle of radius `radius` centred at `(0, R)`, so it touches the origin.
    Circle { radius: f64 },
    /// Straight segment `[-L, L] x {0}`.
    Segment { half_length: f64 },
    /// Two rays deflected by `half_angle` each, joined by a circular arc of
    /// radius `smoothing_radius`. `half_length` is the ray length measured
    /// from the virtual vertex where the rays would meet.
    SmoothedBrokenLine {
        half_angle: f64,
        smoothing_radius: f64,
        half_length: f64,
    },
    /// Same corner, but the curvature ramps down to zero with a cubic
    /// smoothstep instead of jumping, so the curve is C^3.
    MollifiedBrokenLine {
        half_angle: f64,
        smoothing_radius: f64,
        half_length: f64,
    },
}

/// Regularity class of a curve, reported alongside hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Analytic,
    /// Tangent Lipschitz, curvature piecewise constant with jumps.
    C11,
    /// Curvature continuously differentiable.
    C3,
}

impl std::fmt::Display for Smoothness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Smoothness::Analytic => "analytic",
            Smoothness::C11 => "C1,1",
            Smoothness::C3 => "C3",
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{name} must be positive, got {v}")))
    }
}

impl CurveSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CurveSpec::Circle { radius } => positive("radius", radius),
            CurveSpec::Segment { half_length } => positive("half_length", half_length),
            CurveSpec::SmoothedBrokenLine {
                half_angle,
                smoothing_radius,
                half_length,
            }
            | CurveSpec::MollifiedBrokenLine {
                half_angle,
                smoothing_radius,
                half_length,
            } => {
                positive("smoothing_radius", smoothing_radius)?;
                positive("half_length", half_length)?;
                if !(half_angle > 0.0 && half_angle < 0.5 * PI) {
                    return Err(Error::Geometry(format!(
                        "half_angle must lie in (0, pi/2), got {half_angle}"
                    )));
                }
                if smoothing_radius >= half_length {
                    return Err(Error::Geometry(format!(
                        "smoothing_radius {smoothing_radius} must be below half_length {half_length}"
                    )));
                }
                let setback = self.corner_setback();
                if half_length <= setback {
                    return Err(Error::Geometry(format!(
                        "half_length {half_length} does not clear the smoothing, which needs more than {setback}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, CurveSpec::Circle { .. })
    }

    /// Broken lines continue as rays past the truncation point.
    pub fn has_ray_tails(&self) -> bool {
        matches!(
            self,
            CurveSpec::SmoothedBrokenLine { .. } | CurveSpec::MollifiedBrokenLine { .. }
        )
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            CurveSpec::Circle { .. } | CurveSpec::Segment { .. } => Smoothness::Analytic,
            CurveSpec::SmoothedBrokenLine { .. } => Smoothness::C11,
            CurveSpec::MollifiedBrokenLine { .. } => Smoothness::C3,
        }
    }

    // Arclength where the curvature of a broken line ends, and the
    // half-width of the mollifier ramp (zero for the circular arc).
    fn corner(&self) -> (f64, f64, f64, f64) {
        match *self {
            CurveSpec::SmoothedBrokenLine {
                half_angle,
                smoothing_radius,
                ..
            } => (half_angle, smoothing_radius, half_angle * smoothing_radius, 0.0),
            CurveSpec::MollifiedBrokenLine {
                half_angle,
                smoothing_radius,
                ..
            } => {
                let a = half_angle * smoothing_radius;
                (half_angle, smoothing_radius, a, 0.5 * a)
            }
            _ => (0.0, 1.0, 0.0, 0.0),
        }
    }

    /// Distance from the virtual vertex to where the straight ray begins.
    fn corner_setback(&self) -> f64 {
        let (alpha, _, a, b) = self.corner();
        let end = self.corner_point(a + b);
        end[0] / alpha.cos()
    }

    /// Half of the arclength extent for open curves, `pi R` for the circle.
    pub fn half_extent(&self) -> f64 {
        match *self {
            CurveSpec::Circle { radius } => PI * radius,
            CurveSpec::Segment { half_length } => half_length,
            CurveSpec::SmoothedBrokenLine { half_length, .. }
            | CurveSpec::MollifiedBrokenLine { half_length, .. } => {
                let (_, _, a, b) = self.corner();
                a + b + half_length - self.corner_setback()
            }
        }
    }

    pub fn total_length(&self) -> f64 {
        2.0 * self.half_extent()
    }

    /// Arclength interval carrying curvature, as a half-width.
    pub fn curvature_support(&self) -> f64 {
        match self {
            CurveSpec::Circle { .. } => self.half_extent(),
            CurveSpec::Segment { .. } => 0.0,
            _ => {
                let (_, _, a, b) = self.corner();
                a + b
            }
        }
    }

    /// Parameters where the curvature is not smooth; mesh breakpoints go there.
    pub fn features(&self) -> Vec<f64> {
        match self {
            CurveSpec::SmoothedBrokenLine { .. } => {
                let (_, _, a, _) = self.corner();
                vec![-a, a]
            }
            CurveSpec::MollifiedBrokenLine { .. } => {
                let (_, _, a, b) = self.corner();
                vec![-(a + b), -(a - b), a - b, a + b]
            }
            _ => Vec::new(),
        }
    }

    /// Tangent angle at `s`.
    pub fn angle(&self, s: f64) -> f64 {
        match *self {
            CurveSpec::Circle { radius } => s / radius,
            CurveSpec::Segment { .. } => 0.0,
            _ => {
                let (alpha, rho, a, b) = self.corner();
                let t = s.abs();
                let th = if t <= a - b {
                    t / rho
                } else if t < a + b {
                    let u = (t - (a - b)) / (2.0 * b);
                    (a - b) / rho + 2.0 * b / rho * (u - u * u * u + 0.5 * u * u * u * u)
                } else {
                    alpha
                };
                th.copysign(s)
            }
        }
    }

    pub fn curvature(&self, s: f64) -> f64 {
        match *self {
            CurveSpec::Circle { radius } => 1.0 / radius,
            CurveSpec::Segment { .. } => 0.0,
            _ => {
                let (_, rho, a, b) = self.corner();
                let t = s.abs();
                if t <= a - b {
                    1.0 / rho
                } else if t < a + b {
                    let u = (t - (a - b)) / (2.0 * b);
                    (1.0 - u * u * (3.0 - 2.0 * u)) / rho
                } else {
                    0.0
                }
            }
        }
    }

    pub fn tangent(&self, s: f64) -> [f64; 2] {
        let th = self.angle(s);
        [th.cos(), th.sin()]
    }

    // Point at parameter t >= 0 inside the curved part of a broken line.
    fn corner_point(&self, t: f64) -> [f64; 2] {
        let (_, rho, a, b) = self.corner();
        let t1 = t.min(a - b);
        let mut p = [rho * (t1 / rho).sin(), rho * (1.0 - (t1 / rho).cos())];
        if t > a - b && b > 0.0 {
            thread_local! {
                static RULE: GaussLegendre = GaussLegendre::new(24);
            }
            let (lo, hi) = (a - b, t.min(a + b));
            RULE.with(|rule| {
                p[0] += rule.integrate(lo, hi, |s| self.angle(s).cos());
                p[1] += rule.integrate(lo, hi, |s| self.angle(s).sin());
            });
        }
        p
    }

    /// Point at arclength `s`. Broken lines extend along their rays for
    /// `|s|` beyond the truncation, the circle is periodic.
    pub fn position(&self, s: f64) -> [f64; 2] {
        match *self {
            CurveSpec::Circle { radius } => {
                let th = s / radius;
                [radius * th.sin(), radius * (1.0 - th.cos())]
            }
            CurveSpec::Segment { .. } => [s, 0.0],
            _ => {
                let (alpha, _, a, b) = self.corner();
                let t = s.abs();
                let p = if t <= a + b {
                    self.corner_point(t)
                } else {
                    let q = self.corner_point(a + b);
                    let d = t - (a + b);
                    [q[0] + d * alpha.cos(), q[1] + d * alpha.sin()]
                };
                [p[0].copysign(s), p[1]]
            }
        }
    }
}

/// Mesh controls. `min_spacing` is the length of the innermost panel on
/// each side of `s = 0`; panels then grow by `grading_ratio` until they
/// reach the base size `total_length / base_panels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub base_panels: usize,
    pub grading_ratio: f64,
    pub min_spacing: f64,
    /// Gauss-Legendre points per panel.
    pub order: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            base_panels: 32,
            grading_ratio: 2.0,
            min_spacing: 1e-3,
            order: 16,
        }
    }
}

impl MeshParams {
    pub fn validate(&self) -> Result<()> {
        if self.base_panels < 2 {
            return Err(Error::Mesh(format!(
                "base_panels must be at least 2, got {}",
                self.base_panels
            )));
        }
        if !(self.grading_ratio > 1.0 && self.grading_ratio <= 4.0) {
            return Err(Error::Mesh(format!(
                "grading_ratio must lie in (1, 4], got {}",
                self.grading_ratio
            )));
        }
        if !(self.min_spacing.is_finite() && self.min_spacing > 0.0) {
            return Err(Error::Mesh(format!(
                "min_spacing must be positive, got {}",
                self.min_spacing
            )));
        }
        if !(2..=64).contains(&self.order) {
            return Err(Error::Mesh(format!(
                "order must lie in [2, 64], got {}",
                self.order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub s: f64,
    pub x: [f64; 2],
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    /// Index of the first node of the panel.
    pub first: usize,
}

impl Panel {
    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }
}

/// Product weights integrating `ln|s_i - s| f(s)` over one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct NearBlock {
    pub panel: usize,
    pub weights: Vec<f64>,
}

/// A meshed curve. Immutable once built.
#[derive(Debug, Clone)]
pub struct Curve {
    spec: CurveSpec,
    mesh: MeshParams,
    rule: GaussLegendre,
    breaks: Vec<f64>,
    panels: Vec<Panel>,
    nodes: Vec<Node>,
    near: Vec<Vec<NearBlock>>,
    origin_break: usize,
}

fn dedup_sorted(v: &mut Vec<f64>, tol: f64) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|b, a| (*b - *a).abs() <= tol);
}

// Breakpoints on [0, extent]: geometric from `m` up to panel size `h`,
// then uniform.
fn graded_side(extent: f64, h: f64, m: f64, r: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = m.min(h).min(extent);
    b.push(x);
    loop {
        let next = x * r;
        if next - x > h * (1.0 + 1e-12) || next >= extent * (1.0 - 1e-12) {
            break;
        }
        x = next;
        b.push(x);
    }
    let mut rem = extent - x;
    if b.len() > 2 && rem < 0.5 * (x - b[b.len() - 2]) {
        b.pop();
        x = *b.last().unwrap();
        rem = extent - x;
    }
    if rem > 1e-13 * extent {
        let n = (rem / h - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=n {
            b.push(x + rem * i as f64 / n as f64);
        }
    }
    *b.last_mut().unwrap() = extent;
    b
}

impl Curve {
    pub fn build(spec: CurveSpec, mesh: MeshParams) -> Result<Self> {
        spec.validate()?;
        mesh.validate()?;
        let half = spec.half_extent();
        let h = spec.total_length() / mesh.base_panels as f64;
        if 2.0 * mesh.min_spacing > half {
            return Err(Error::Mesh(format!(
                "min_spacing {} does not fit in half extent {half}",
                mesh.min_spacing
            )));
        }
        let side = graded_side(half, h, mesh.min_spacing, mesh.grading_ratio);
        let mut breaks: Vec<f64> = side.iter().rev().map(|x| -x).collect();
        breaks.extend_from_slice(&side[1..]);
        breaks.extend(spec.features());
        if !spec.is_closed() && !spec.has_ray_tails() {
            // Densities on a free end have a weak singularity.
            let p0 = breaks[1] - breaks[0];
            for k in 1..=END_LEVELS {
                let d = p0 / (1u64 << k) as f64;
                breaks.push(-half + d);
                breaks.push(half - d);
            }
        }
        dedup_sorted(&mut breaks, 1e-12 * half);
        let origin_break = breaks
            .iter()
            .position(|&x| x == 0.0)
            .ok_or_else(|| Error::Mesh("origin lost from the breakpoints".into()))?;

        let rule = GaussLegendre::new(mesh.order);
        let mut panels = Vec::with_capacity(breaks.len() - 1);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * mesh.order);
        for w in breaks.windows(2) {
            let p = Panel {
                a: w[0],
                b: w[1],
                first: nodes.len(),
            };
            let (c, hw) = (p.center(), p.half_width());
            for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                let s = c + hw * t;
                nodes.push(Node {
                    s,
                    x: spec.position(s),
                    w: hw * wt,
                });
            }
            panels.push(p);
        }
        let mut curve = Self {
            spec,
            mesh,
            rule,
            breaks,
            panels,
            nodes,
            near: Vec::new(),
            origin_break,
        };
        curve.near = (0..curve.nodes.len())
            .map(|i| curve.near_blocks_at(curve.nodes[i].s))
            .collect();
        Ok(curve)
    }

    /// Product-weight blocks for a target at parameter `s` (need not be a node).
    pub fn near_blocks_at(&self, s: f64) -> Vec<NearBlock> {
        let mut out = Vec::new();
        for (k, p) in self.panels.iter().enumerate() {
            let hw = p.half_width();
            let t0 = self.wrap(s - p.center()) / hw;
            if t0.abs() < NEAR_RADIUS {
                let mut w = log_weights(&self.rule, t0);
                let lh = hw.ln();
                for (wj, gj) in w.iter_mut().zip(&self.rule.weights) {
                    *wj = hw * (*wj + lh * gj);
                }
                out.push(NearBlock {
                    panel: k,
                    weights: w,
                });
            }
        }
        out
    }

    /// Arclength difference, reduced to `(-P/2, P/2]` on closed curves.
    pub fn wrap(&self, ds: f64) -> f64 {
        if let CurveSpec::Circle { .. } = self.spec {
            let p = self.spec.total_length();
            ds - p * (ds / p).round()
        } else {
            ds
        }
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }
    pub fn mesh(&self) -> &MeshParams {
        &self.mesh
    }
    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
    pub fn near(&self, i: usize) -> &[NearBlock] {
        &self.near[i]
    }
    pub fn is_closed(&self) -> bool {
        self.spec.is_closed()
    }
    pub fn total_length(&self) -> f64 {
        self.spec.total_length()
    }
    pub fn panel_of(&self, node: usize) -> usize {
        node / self.mesh.order
    }

    /// Index of the first node past `s = 0`; the origin itself is a
    /// breakpoint, never a node.
    pub fn puncture_node(&self) -> usize {
        self.panels[self.origin_break].first
    }

    /// Position at `s` interpolated from the nodes of the containing panel.
    pub fn interpolate_position(&self, s: f64) -> [f64; 2] {
        let k = match self.breaks.binary_search_by(|b| b.total_cmp(&s)) {
            Ok(i) | Err(i) => i.saturating_sub(1).min(self.panels.len() - 1),
        };
        let p = &self.panels[k];
        let t = (s - p.center()) / p.half_width();
        let ts = &self.rule.nodes;
        let mut out = [0.0; 2];
        for (j, tj) in ts.iter().enumerate() {
            let l: f64 = ts
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, tm)| (t - tm) / (tj - tm))
                .product();
            let x = self.nodes[p.first + j].x;
            out[0] += l * x[0];
            out[1] += l * x[1];
        }
        out
    }

    /// Removes `{|s| < eps}` from the support.
    pub fn puncture(&self, eps: f64) -> Result<Puncture> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Mesh(format!("puncture radius must be >= 0, got {eps}")));
        }
        if 2.0 * eps >= self.total_length() {
            return Err(Error::Mesh(format!(
                "puncture measure {} exceeds the curve length {}",
                2.0 * eps,
                self.total_length()
            )));
        }
        if eps > 0.0 {
            let tol = 1e-12 * self.spec.half_extent();
            for target in [-eps, eps] {
                if !self.breaks.iter().any(|b| (b - target).abs() <= tol) {
                    let need = self
                        .breaks
                        .iter()
                        .map(|b| (b - target).abs())
                        .fold(f64::INFINITY, f64::min);
                    return Err(Error::Mesh(format!(
                        "puncture edge {target} is not a mesh breakpoint (nearest is {need:e} away); \
                         use min_spacing = eps * grading_ratio^-k"
                    )));
                }
            }
        }
        let active: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].s.abs() >= eps)
            .collect();
        let retained_weight = active.iter().map(|&i| self.nodes[i].w).sum();
        Ok(Puncture {
            epsilon: eps,
            measure: 2.0 * eps,
            active,
            retained_weight,
        })
    }

    /// Writes `s,x,y,w` rows, one per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,x,y,w")?;
        for n in &self.nodes {
            writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e}", n.s, n.x[0], n.x[1], n.w)?;
        }
        Ok(())
    }
}

/// The support with `{|s| < epsilon}` removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Puncture {
    pub epsilon: f64,
    pub measure: f64,
    /// Retained node indices, ascending.
    pub active: Vec<usize>,
    pub retained_weight: f64,
}

/// Parameters of the asymptotic straightness bound
/// `1 - |x(s) - x(s')| / |s - s'| <= d (1 + |s + s'|^(2 rho))^(-1/2)`
/// checked on pairs with `w < s/s' < 1/w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraightnessParams {
    pub d: f64,
    pub rho: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    /// Smallest chord-to-arclength ratio seen.
    pub c_estimate: f64,
    /// Worst slack of the straightness bound; negative means violated.
    pub straightness_margin: f64,
    pub is_straight_line: bool,
    pub smoothness: Smoothness,
}

/// Brute-force checks of the geometric hypotheses on an open curve,
/// using `sample_count` equispaced parameters over the truncated extent.
pub fn validate_hypotheses(
    curve: &Curve,
    sample_count: usize,
    params: StraightnessParams,
) -> Result<HypothesisReport> {
    let spec = curve.spec();
    if spec.is_closed() {
        return Err(Error::Precondition(
            "hypothesis checks apply to open curves only".into(),
        ));
    }
    if sample_count < 1000 {
        return Err(Error::Precondition(format!(
            "need at least 1000 samples, got {sample_count}"
        )));
    }
    if !(params.w > 0.0 && params.w < 1.0 && params.d > 0.0 && params.rho > 0.0) {
        return Err(Error::Precondition(format!(
            "straightness parameters out of range: {params:?}"
        )));
    }
    let half = spec.half_extent();
    // Offset by half a step so that s = 0 is never sampled.
    let step = 2.0 * half / sample_count as f64;
    let ss: Vec<f64> = (0..sample_count)
        .map(|i| -half + (i as f64 + 0.5) * step)
        .collect();
    let xs: Vec<[f64; 2]> = ss.iter().map(|&s| spec.position(s)).collect();
    let mut c: f64 = 1.0;
    let mut margin = f64::INFINITY;
    let mut kmax: f64 = 0.0;
    for i in 0..ss.len() {
        kmax = kmax.max(spec.curvature(ss[i]).abs());
        for j in i + 1..ss.len() {
            let arc = ss[j] - ss[i];
            let chord = (xs[j][0] - xs[i][0]).hypot(xs[j][1] - xs[i][1]);
            let ratio = (chord / arc).min(1.0);
            c = c.min(ratio);
            let q = ss[i] / ss[j];
            if q > params.w && q < 1.0 / params.w {
                let bound = params.d / (1.0 + (ss[i] + ss[j]).abs().powf(2.0 * params.rho)).sqrt();
                margin = margin.min(bound - (1.0 - ratio));
            }
        }
    }
    Ok(HypothesisReport {
        c_estimate: c,
        straightness_margin: margin,
        is_straight_line: kmax < 1e-12,
        smoothness: spec.smoothness(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_side_reaches_extent() {
        let b = graded_side(3.0, 0.2, 0.01, 2.0);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 3.0);
        assert!((b[1] - 0.01).abs() < 1e-15);
        assert!(b.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.2 + 1e-12));
    }

    #[test]
    fn mollified_corner_turns_by_the_full_angle() {
        let spec = CurveSpec::MollifiedBrokenLine {
            half_angle: 0.3,
            smoothing_radius: 1.0,
            half_length: 20.0,
        };
        assert!((spec.angle(10.0) - 0.3).abs() < 1e-15);
        // Continuity of the angle at both ramp ends.
        let (_, _, a, b) = spec.corner();
        assert!((spec.angle(a + b - 1e-12) - 0.3).abs() < 1e-11);
        assert!((spec.angle(a - b + 1e-12) - (a - b)).abs() < 1e-11);
    }
}

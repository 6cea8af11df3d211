//! Forward-mode gradients of every loss with respect to the predicted box,
//! and a central finite-difference cross-check.
//!
//! Gradients are taken one parameter at a time: the predicted box is lifted
//! to [`Dual`] with a unit tangent on `cx`, `cy`, `w`, `h` or `θ`, and the
//! loss is evaluated once per direction.
//!
//! The losses are piecewise smooth. Before differentiating, the
//! configuration is screened for the places where a piece boundary is
//! crossed: sort ties in the corner order, clipping vertices touching the
//! other box's boundary, hull and enclosing-box extremal ties, and the
//! square-root singularity of GWD at zero distance. A hit is reported as
//! [`DiffError::NonSmoothPoint`] rather than silently picking a one-sided
//! derivative.

mod dual;

pub use dual::Dual;

use thiserror::Error;

use crate::gaussian::{gwd_distance_sq, DistanceTransform};
use crate::geom::{convex_hull, CornerQuad, Point2, RotatedBox, EPS_GEOM};
use crate::iou::Enclosing;
use crate::metric::{FrozenMetric, Metric, MetricError, MetricKind};

pub const PARAM_NAMES: [&str; 5] = ["cx", "cy", "w", "h", "theta"];

/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("non-smooth configuration: {0}")]
    NonSmoothPoint(NonSmooth),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}

/// Why a configuration sits on a piece boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonSmooth {
    CornerSortTie,
    ClipVertexOnBoundary,
    HullDegeneracy,
    EnclosingExtentTie,
    ZeroDistance,
}

impl std::fmt::Display for NonSmooth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CornerSortTie => "corner sort tie",
            Self::ClipVertexOnBoundary => "clipping vertex on the other box's boundary",
            Self::HullDegeneracy => "convex hull vertex degeneracy",
            Self::EnclosingExtentTie => "enclosing box extent tie",
            Self::ZeroDistance => "zero Gaussian distance under a square-root transform",
        })
    }
}

fn uses_clipping(kind: MetricKind) -> bool {
    matches!(
        kind,
        MetricKind::RotatedIou
            | MetricKind::Giou
            | MetricKind::Diou
            | MetricKind::Ciou
            | MetricKind::Eiou
            | MetricKind::Fpdiou
    )
}

fn uses_aabb(metric: &Metric) -> bool {
    match metric.kind {
        MetricKind::Diou | MetricKind::Ciou | MetricKind::Eiou => true,
        MetricKind::Giou => metric.enclosing == Enclosing::Aabb,
        _ => false,
    }
}

fn has_sort_tie(q: &CornerQuad, margin: f64) -> bool {
    q.points().windows(2).any(|w| (w[1].x - w[0].x) < margin)
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let e = b.sub(a);
    let len_sq = e.dot(e);
    let t = if len_sq > 0.0 {
        (p.sub(a).dot(e) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist_sq(a.add(e.scale(t))).sqrt()
}

fn vertex_near_boundary(a: &RotatedBox, b: &RotatedBox, margin: f64) -> bool {
    let bv = b.ccw_vertices();
    a.ccw_vertices().iter().any(|&p| {
        (0..4).any(|i| dist_to_segment(p, bv[i], bv[(i + 1) % 4]) < margin)
    })
}

fn hull_degenerate(a: &RotatedBox, b: &RotatedBox, margin: f64) -> bool {
    let mut pts = a.ccw_vertices().to_vec();
    pts.extend(b.ccw_vertices());
    let hull = convex_hull(&pts);
    let hv = hull.vertices();
    let n = hv.len();
    if n < 3 {
        return true;
    }
    // a hull vertex almost collinear with its neighbors
    for i in 0..n {
        let prev = hv[(i + n - 1) % n];
        let next = hv[(i + 1) % n];
        let base = next.sub(prev);
        let d = base.cross(hv[i].sub(prev)).abs() / base.dot(base).sqrt();
        if d < margin {
            return true;
        }
    }
    // a non-hull point sitting on the hull boundary
    for p in &pts {
        if hv.iter().any(|v| v == p) {
            continue;
        }
        if hull.signed_distance(*p) < margin {
            return true;
        }
    }
    false
}

fn extent_tie(a: &RotatedBox, b: &RotatedBox, margin: f64) -> bool {
    let mut pts = a.ccw_vertices().to_vec();
    pts.extend(b.ccw_vertices());
    let tie = |vals: Vec<f64>| {
        let mut v = vals;
        v.sort_by(f64::total_cmp);
        let n = v.len();
        (v[1] - v[0]) < margin || (v[n - 1] - v[n - 2]) < margin
    };
    tie(pts.iter().map(|p| p.x).collect()) || tie(pts.iter().map(|p| p.y).collect())
}

/// Screen `(gt, prd)` for a piece boundary of `metric` within `margin`
/// pixels. Every test is on corner positions.
pub fn nonsmooth_reason(metric: &Metric, gt: &RotatedBox, prd: &RotatedBox, margin: f64) -> Option<NonSmooth> {
    let kind = metric.kind;
    if kind == MetricKind::Fpdiou && (has_sort_tie(&gt.corners(), margin) || has_sort_tie(&prd.corners(), margin)) {
        return Some(NonSmooth::CornerSortTie);
    }
    if uses_clipping(kind) && (vertex_near_boundary(gt, prd, margin) || vertex_near_boundary(prd, gt, margin)) {
        return Some(NonSmooth::ClipVertexOnBoundary);
    }
    if kind == MetricKind::Giou && metric.enclosing == Enclosing::Hull && hull_degenerate(gt, prd, margin) {
        return Some(NonSmooth::HullDegeneracy);
    }
    if uses_aabb(metric) && extent_tie(gt, prd, margin) {
        return Some(NonSmooth::EnclosingExtentTie);
    }
    if kind == MetricKind::Gwd
        && metric.gwd.transform() == DistanceTransform::Sqrt
        && gwd_distance_sq(gt, prd) < margin * margin
    {
        return Some(NonSmooth::ZeroDistance);
    }
    None
}

/// Lift `prd` with a unit tangent on parameter `which`.
pub fn seed_param(prd: &RotatedBox, which: usize) -> Result<RotatedBox<Dual>, crate::geom::GeomError> {
    let p = prd.params();
    let mut d = p.map(Dual::constant);
    d[which] = Dual::variable(p[which]);
    RotatedBox::from_params(d)
}

fn grad_frozen(frozen: &FrozenMetric, gt: &RotatedBox, prd: &RotatedBox) -> Result<[f64; 5], DiffError> {
    let gt_d = gt.cast::<Dual>();
    let mut g = [0.0; 5];
    for (i, slot) in g.iter_mut().enumerate() {
        let prd_d = seed_param(prd, i)?;
        *slot = frozen.loss(&gt_d, &prd_d)?.eps;
    }
    Ok(g)
}

/// Gradient of the loss of `metric` with respect to
/// `(cx, cy, w, h, θ)` of `prd`.
pub fn grad_prd(metric: &Metric, gt: &RotatedBox, prd: &RotatedBox) -> Result<[f64; 5], DiffError> {
    if let Some(r) = nonsmooth_reason(metric, gt, prd, EPS_GEOM) {
        return Err(DiffError::NonSmoothPoint(r));
    }
    let frozen = metric.freeze(gt, prd)?;
    grad_frozen(&frozen, gt, prd)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradReport {
    pub analytic: [f64; 5],
    pub numeric: [f64; 5],
    pub max_rel_err: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compare forward-mode gradients against central differences with
/// relative step `h` (absolute step `h · max(|x|, 1)` per parameter).
///
/// The smoothness screen uses a margin of a few stencil displacements so the
/// difference stencil never straddles a piece boundary.
pub fn check_grad(metric: &Metric, gt: &RotatedBox, prd: &RotatedBox, h: f64) -> Result<GradReport, DiffError> {
    let p = prd.params();
    let steps = p.map(|x| h * x.abs().max(1.0));
    let half_diag = 0.5 * (prd.w() * prd.w() + prd.h() * prd.h()).sqrt();
    let disp = steps[0]
        .max(steps[1])
        .max(0.5 * steps[2])
        .max(0.5 * steps[3])
        .max(steps[4] * half_diag);
    let margin = EPS_GEOM.max(8.0 * disp);
    if let Some(r) = nonsmooth_reason(metric, gt, prd, margin) {
        return Err(DiffError::NonSmoothPoint(r));
    }
    let frozen = metric.freeze(gt, prd)?;
    let analytic = grad_frozen(&frozen, gt, prd)?;
    let mut numeric = [0.0; 5];
    for i in 0..5 {
        let mut hi = p;
        let mut lo = p;
        hi[i] += steps[i];
        lo[i] -= steps[i];
        let f_hi: f64 = frozen.loss(gt, &RotatedBox::from_params(hi)?)?;
        let f_lo: f64 = frozen.loss(gt, &RotatedBox::from_params(lo)?)?;
        numeric[i] = (f_hi - f_lo) / (2.0 * steps[i]);
    }
    let max_rel_err = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max);
    Ok(GradReport {
        analytic,
        numeric,
        max_rel_err,
    })
}

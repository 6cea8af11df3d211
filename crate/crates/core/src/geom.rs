//! Rotated-box representations and exact convex-polygon geometry.
//!
//! A [`RotatedBox`] is the parametric form `(cx, cy, w, h, θ)`; a
//! [`CornerQuad`] holds the same rectangle as four corner points in canonical
//! sorted order (ascending `x`, ties by ascending `y`). Both are generic over
//! [`Scalar`] so gradients can flow through every conversion.
//!
//! Angles are stored in `[-π/2, π/2)`. Rotating a rectangle by `π` maps it to
//! itself, so normalization only ever adds multiples of `π` and never touches
//! `w` or `h`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use thiserror::Error;

use crate::scalar::Scalar;

/// Vertex deduplication and containment tolerance, in pixels.
pub const EPS_GEOM: f64 = 1e-9;
/// Relative tolerance for accepting four points as a rectangle.
pub const EPS_RECT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("corners do not form a rectangle (residual {residual:.3e} > {tolerance:.1e})")]
    NotARectangle { residual: f64, tolerance: f64 },
    #[error("invalid image dimensions {w} x {h}")]
    InvalidDims { w: f64, h: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    #[inline]
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// z-component of the 2-D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn dist_sq(self, o: Self) -> S {
        (self.x - o.x).sq() + (self.y - o.y).sq()
    }

    /// The real parts as an `f64` point.
    #[inline]
    pub fn re(self) -> Point2<f64> {
        Point2::new(self.x.re(), self.y.re())
    }
}

impl Point2<f64> {
    pub fn cast<T: Scalar>(self) -> Point2<T> {
        Point2::new(T::from_f64(self.x), T::from_f64(self.y))
    }
}

/// Reduce an angle to `[-π/2, π/2)` by adding a multiple of `π`.
pub fn normalize_angle<S: Scalar>(theta: S) -> S {
    let k = ((theta.re() + FRAC_PI_2) / PI).floor();
    let mut t = if k == 0.0 {
        theta
    } else {
        theta - S::from_f64(k * PI)
    };
    // rounding can land exactly on the open end
    if t.re() >= FRAC_PI_2 {
        t -= S::from_f64(PI);
    } else if t.re() < -FRAC_PI_2 {
        t += S::from_f64(PI);
    }
    t
}

/// Oriented rectangle `(cx, cy, w, h, θ)`.
///
/// `w` runs along the direction `(cos θ, sin θ)` and `h` along
/// `(-sin θ, cos θ)`. No `w ≥ h` ordering is imposed on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatedBox<S = f64> {
    cx: S,
    cy: S,
    w: S,
    h: S,
    theta: S,
}

impl<S: Scalar> RotatedBox<S> {
    pub fn new(cx: S, cy: S, w: S, h: S, theta: S) -> Result<Self, GeomError> {
        let all = [cx.re(), cy.re(), w.re(), h.re(), theta.re()];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidBox(format!("non-finite field in {all:?}")));
        }
        if !(w.re() > 0.0 && h.re() > 0.0) {
            return Err(GeomError::InvalidBox(format!(
                "width and height must be positive, got {} x {}",
                w.re(),
                h.re()
            )));
        }
        Ok(Self {
            cx,
            cy,
            w,
            h,
            theta: normalize_angle(theta),
        })
    }

    /// Build from `[cx, cy, w, h, θ]`.
    pub fn from_params(p: [S; 5]) -> Result<Self, GeomError> {
        Self::new(p[0], p[1], p[2], p[3], p[4])
    }

    pub fn params(&self) -> [S; 5] {
        [self.cx, self.cy, self.w, self.h, self.theta]
    }

    pub fn cx(&self) -> S {
        self.cx
    }
    pub fn cy(&self) -> S {
        self.cy
    }
    pub fn w(&self) -> S {
        self.w
    }
    pub fn h(&self) -> S {
        self.h
    }
    pub fn theta(&self) -> S {
        self.theta
    }

    pub fn center(&self) -> Point2<S> {
        Point2::new(self.cx, self.cy)
    }

    pub fn area(&self) -> S {
        self.w * self.h
    }

    /// Unit vectors along the width and height edges.
    pub fn axes(&self) -> (Point2<S>, Point2<S>) {
        let (s, c) = (self.theta.sin(), self.theta.cos());
        (Point2::new(c, s), Point2::new(-s, c))
    }

    /// Corners in counter-clockwise cyclic order, starting at the
    /// `(-w/2, -h/2)` local corner.
    pub fn ccw_vertices(&self) -> [Point2<S>; 4] {
        let (u, v) = self.axes();
        let half = S::from_f64(0.5);
        let a = u.scale(self.w * half);
        let b = v.scale(self.h * half);
        let c = self.center();
        [
            c.sub(a).sub(b),
            c.add(a).sub(b),
            c.add(a).add(b),
            c.sub(a).add(b),
        ]
    }

    pub fn polygon(&self) -> ConvexPolygon<S> {
        ConvexPolygon {
            vertices: self.ccw_vertices().to_vec(),
        }
    }

    /// Sorted corner representation.
    pub fn corners(&self) -> CornerQuad<S> {
        corners_from_box(self)
    }

    /// Real parts as an `f64` box.
    pub fn re(&self) -> RotatedBox<f64> {
        RotatedBox {
            cx: self.cx.re(),
            cy: self.cy.re(),
            w: self.w.re(),
            h: self.h.re(),
            theta: self.theta.re(),
        }
    }
}

impl RotatedBox<f64> {
    /// Lift into another scalar type with zero derivative.
    pub fn cast<T: Scalar>(&self) -> RotatedBox<T> {
        RotatedBox {
            cx: T::from_f64(self.cx),
            cy: T::from_f64(self.cy),
            w: T::from_f64(self.w),
            h: T::from_f64(self.h),
            theta: T::from_f64(self.theta),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Rotate the whole box about the origin by `phi`.
    pub fn rotated_about_origin(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            cx: c * self.cx - s * self.cy,
            cy: s * self.cx + c * self.cy,
            theta: normalize_angle(self.theta + phi),
            ..*self
        }
    }

    /// Scale positions and extents about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            cx: self.cx * s,
            cy: self.cy * s,
            w: self.w * s,
            h: self.h * s,
            theta: self.theta,
        }
    }

    /// Does the point lie inside (or on) the rectangle?
    pub fn contains(&self, p: Point2<f64>) -> bool {
        let (u, v) = self.axes();
        let d = p.sub(self.center());
        d.dot(u).abs() <= self.w / 2.0 && d.dot(v).abs() <= self.h / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageDims {
    w: f64,
    h: f64,
}

impl ImageDims {
    pub fn new(w: f64, h: f64) -> Result<Self, GeomError> {
        if w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0 {
            Ok(Self { w, h })
        } else {
            Err(GeomError::InvalidDims { w, h })
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `w² + h²`, the squared image diagonal.
    pub fn diag_sq(&self) -> f64 {
        self.w * self.w + self.h * self.h
    }
}

/// Four points in canonical order: ascending `x`, ties by ascending `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerQuad<S = f64> {
    points: [Point2<S>; 4],
}

impl<S: Scalar> CornerQuad<S> {
    pub fn points(&self) -> &[Point2<S>; 4] {
        &self.points
    }

    /// Convex hull of the four points, counter-clockwise.
    pub fn to_polygon(&self) -> ConvexPolygon<S> {
        convex_hull(&self.points)
    }

    /// Zero (or numerically zero) enclosed area.
    pub fn is_degenerate(&self) -> bool {
        let hull = self.to_polygon();
        hull.vertices.len() < 3 || polygon_area(&hull).re() <= EPS_GEOM
    }
}

/// Sort four points ascending by `x`, breaking ties by ascending `y`.
///
/// `x` values within [`EPS_GEOM`] count as tied, so rounding noise from
/// `cos(±π/2)` does not reorder the corners of an axis-aligned box.
pub fn sort_corners<S: Scalar>(mut points: [Point2<S>; 4]) -> CornerQuad<S> {
    let before = |a: &Point2<S>, b: &Point2<S>| {
        let (ax, bx) = (a.x.re(), b.x.re());
        if (ax - bx).abs() <= EPS_GEOM {
            a.y.re() < b.y.re()
        } else {
            ax < bx
        }
    };
    // exact pre-sort, then an insertion pass with the tolerant order
    points.sort_by(|a, b| a.x.re().total_cmp(&b.x.re()));
    for i in 1..4 {
        let mut j = i;
        while j > 0 && before(&points[j], &points[j - 1]) {
            points.swap(j, j - 1);
            j -= 1;
        }
    }
    CornerQuad { points }
}

pub fn corners_from_box<S: Scalar>(b: &RotatedBox<S>) -> CornerQuad<S> {
    sort_corners(b.ccw_vertices())
}

/// Recover `(cx, cy, w, h, θ)` from corner points.
///
/// The points are first put in cyclic order. The center is the mean of the
/// four corners, `w` is the longer edge and `θ` its direction. For squares
/// the edge whose direction falls in `[-π/4, π/4)` is chosen as `w`.
pub fn box_from_corners(q: &CornerQuad<f64>) -> Result<RotatedBox<f64>, GeomError> {
    let hull = convex_hull(q.points());
    let v = &hull.vertices;
    if v.len() != 4 {
        return Err(GeomError::NotARectangle {
            residual: f64::INFINITY,
            tolerance: EPS_RECT,
        });
    }
    let len = |a: Point2, b: Point2| a.dist_sq(b).sqrt();
    let e1 = len(v[0], v[1]);
    let e2 = len(v[1], v[2]);
    let e3 = len(v[2], v[3]);
    let e4 = len(v[3], v[0]);
    let d1 = len(v[0], v[2]);
    let d2 = len(v[1], v[3]);
    let scale = d1.max(d2);
    let residual = [(e1 - e3).abs(), (e2 - e4).abs(), (d1 - d2).abs()]
        .into_iter()
        .fold(0.0, f64::max)
        / scale;
    if !(residual <= EPS_RECT) {
        return Err(GeomError::NotARectangle {
            residual,
            tolerance: EPS_RECT,
        });
    }

    let cx = v.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = v.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let wa = 0.5 * (e1 + e3);
    let wb = 0.5 * (e2 + e4);
    let dir_a = v[1].sub(v[0]);
    let dir_b = v[2].sub(v[1]);
    let ang_a = normalize_angle(dir_a.y.atan2(dir_a.x));
    let ang_b = normalize_angle(dir_b.y.atan2(dir_b.x));

    let pick_a = if (wa - wb).abs() <= EPS_RECT * scale {
        (-FRAC_PI_4..FRAC_PI_4).contains(&ang_a)
    } else {
        wa > wb
    };
    let (w, h, theta) = if pick_a {
        (wa, wb, ang_a)
    } else {
        (wb, wa, ang_b)
    };
    RotatedBox::new(cx, cy, w, h, theta)
}

/// Convex polygon with counter-clockwise vertices.
///
/// Intersection results hold either zero or at least three vertices. A hull
/// of collinear input may hold one or two vertices; its area is zero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConvexPolygon<S = f64> {
    vertices: Vec<Point2<S>>,
}

impl<S: Scalar> ConvexPolygon<S> {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
        }
    }

    /// Wrap vertices that are already convex and counter-clockwise.
    pub fn from_ccw(vertices: Vec<Point2<S>>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2<S>] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self) -> S {
        polygon_area(self)
    }
}

impl ConvexPolygon<f64> {
    /// Smallest signed distance from `p` to the edge lines; non-negative
    /// inside. `-inf` for degenerate polygons.
    pub fn signed_distance(&self, p: Point2<f64>) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return f64::NEG_INFINITY;
        }
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b.sub(a);
            let d = e.cross(p.sub(a)) / e.dot(e).sqrt();
            best = best.min(d);
        }
        best
    }
}

/// Shoelace area; zero for empty or degenerate polygons.
pub fn polygon_area<S: Scalar>(p: &ConvexPolygon<S>) -> S {
    let v = &p.vertices;
    if v.len() < 3 {
        return S::zero();
    }
    // anchored at the first vertex to limit cancellation at large offsets
    let o = v[0];
    let mut twice = S::zero();
    for i in 1..v.len() - 1 {
        twice += v[i].sub(o).cross(v[i + 1].sub(o));
    }
    let a = twice * S::from_f64(0.5);
    if a.re() < 0.0 {
        -a
    } else {
        a
    }
}

/// Andrew's monotone chain. Collinear and duplicate points are dropped.
pub fn convex_hull<S: Scalar>(points: &[Point2<S>]) -> ConvexPolygon<S> {
    let mut pts: Vec<Point2<S>> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.re()
            .total_cmp(&b.x.re())
            .then(a.y.re().total_cmp(&b.y.re()))
    });
    pts.dedup_by(|a, b| a.re() == b.re());
    if pts.len() < 3 {
        return ConvexPolygon { vertices: pts };
    }
    let turn = |o: Point2<S>, a: Point2<S>, b: Point2<S>| a.re().sub(o.re()).cross(b.re().sub(o.re()));
    let mut hull: Vec<Point2<S>> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    ConvexPolygon { vertices: hull }
}

/// Exact intersection of two convex polygons (Sutherland–Hodgman).
///
/// Zero-area contact yields the empty polygon.
pub fn intersect_convex<S: Scalar>(a: &ConvexPolygon<S>, b: &ConvexPolygon<S>) -> ConvexPolygon<S> {
    if a.vertices.len() < 3 || b.vertices.len() < 3 {
        return ConvexPolygon::empty();
    }
    let mut output = a.vertices.clone();
    let m = b.vertices.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let start = b.vertices[i];
        let edge = b.vertices[(i + 1) % m].sub(start);
        let input = std::mem::take(&mut output);
        let side = |p: Point2<S>| edge.cross(p.sub(start));
        // points within EPS_GEOM of the clip line count as inside, so shared
        // edges survive rounding noise
        let edge_re = edge.re();
        let tol = -EPS_GEOM * edge_re.dot(edge_re).sqrt();
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let next = input[(j + 1) % n];
            let s_cur = side(cur);
            let s_next = side(next);
            let cur_in = s_cur.re() >= tol;
            let next_in = s_next.re() >= tol;
            if next_in {
                if !cur_in {
                    output.push(lerp_at_zero(cur, next, s_cur, s_next));
                }
                output.push(next);
            } else if cur_in {
                output.push(lerp_at_zero(cur, next, s_cur, s_next));
            }
        }
    }
    ConvexPolygon {
        vertices: clean_vertices(output),
    }
}

#[inline]
fn lerp_at_zero<S: Scalar>(p: Point2<S>, q: Point2<S>, sp: S, sq: S) -> Point2<S> {
    let t = sp / (sp - sq);
    p.add(q.sub(p).scale(t))
}

/// Drop near-duplicate and collinear vertices; collapse to empty below three.
fn clean_vertices<S: Scalar>(mut v: Vec<Point2<S>>) -> Vec<Point2<S>> {
    let eps_sq = EPS_GEOM * EPS_GEOM;
    loop {
        let n = v.len();
        if n < 3 {
            return Vec::new();
        }
        let mut removed = false;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if out.is_empty() {
                v[(i + n - 1) % n]
            } else {
                *out.last().unwrap()
            };
            let cur = v[i];
            let next = v[(i + 1) % n];
            let (p, c, q) = (prev.re(), cur.re(), next.re());
            if c.dist_sq(p) <= eps_sq {
                removed = true;
                continue;
            }
            let base = q.sub(p);
            let base_len = base.dot(base).sqrt();
            if base_len > EPS_GEOM && (base.cross(c.sub(p)) / base_len).abs() <= EPS_GEOM {
                removed = true;
                continue;
            }
            out.push(cur);
        }
        v = out;
        if !removed {
            return if v.len() < 3 { Vec::new() } else { v };
        }
    }
}

/// Axis-aligned extents `(w_c, h_c)` of the eight corners of two quads.
pub fn min_enclosing_aabb<S: Scalar>(a: &CornerQuad<S>, b: &CornerQuad<S>) -> (S, S) {
    let mut it = a.points.iter().chain(b.points.iter());
    let first = *it.next().unwrap();
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for p in it {
        x0 = x0.minimum(p.x);
        x1 = x1.maximum(p.x);
        y0 = y0.minimum(p.y);
        y1 = y1.maximum(p.y);
    }
    (x1 - x0, y1 - y0)
}

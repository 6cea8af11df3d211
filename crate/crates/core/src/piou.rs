//! Pixel-kernel IoU (PIoU).
//!
//! Membership of a lattice point in a box is a product of two sigmoid
//! kernels on its distances to the box axes. Intersection and union areas
//! are Riemann sums of `F_gt·F_prd` and `F_gt + F_prd - F_gt·F_prd` over a
//! regular lattice covering both boxes.

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{Point2, RotatedBox};
use crate::scalar::{pairwise_sum, Scalar};

/// Upper bound on lattice points for a single evaluation.
pub const MAX_LATTICE_POINTS: usize = 200_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PiouError {
    #[error("invalid PIoU configuration: {0}")]
    InvalidConfig(String),
    #[error("sampling lattice has no support")]
    EmptySupport,
    #[error("sampling lattice too large ({0} points)")]
    LatticeTooLarge(usize),
}

/// Which distance a kernel factor is centered on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KernelThreshold {
    /// `s = w/2` and `s = h/2`, matching the hard inside test.
    #[default]
    HalfExtent,
    /// `s = w` and `s = h`.
    FullExtent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiouConfig {
    k: f64,
    grid_step: f64,
    pad: f64,
    threshold: KernelThreshold,
}

impl PiouConfig {
    /// Padding defaults to `2 · grid_step`.
    pub fn new(k: f64, grid_step: f64) -> Result<Self, PiouError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(PiouError::InvalidConfig(format!("k must be positive, got {k}")));
        }
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(PiouError::InvalidConfig(format!(
                "grid_step must be positive, got {grid_step}"
            )));
        }
        Ok(Self {
            k,
            grid_step,
            pad: 2.0 * grid_step,
            threshold: KernelThreshold::HalfExtent,
        })
    }

    pub fn with_pad(mut self, pad: f64) -> Result<Self, PiouError> {
        if !(pad.is_finite() && pad >= 0.0) {
            return Err(PiouError::InvalidConfig(format!("pad must be >= 0, got {pad}")));
        }
        self.pad = pad;
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: KernelThreshold) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }
    pub fn pad(&self) -> f64 {
        self.pad
    }
    pub fn threshold(&self) -> KernelThreshold {
        self.threshold
    }
}

impl Default for PiouConfig {
    fn default() -> Self {
        Self::new(10.0, 1.0).unwrap()
    }
}

/// Regular lattice `(x0 + i·step, y0 + j·step)` for `i < nx`, `j < ny`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    /// Lattice over the joint AABB of both boxes, grown by `pad`.
    pub fn covering(a: &RotatedBox, b: &RotatedBox, cfg: &PiouConfig) -> Result<Self, PiouError> {
        let pts = a.ccw_vertices().into_iter().chain(b.ccw_vertices());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        Self::over_rect(x0 - cfg.pad, y0 - cfg.pad, x1 + cfg.pad, y1 + cfg.pad, cfg.grid_step)
    }

    pub fn over_rect(x0: f64, y0: f64, x1: f64, y1: f64, step: f64) -> Result<Self, PiouError> {
        let count = |lo: f64, hi: f64| -> Option<usize> {
            let n = ((hi - lo) / step).floor() + 1.0;
            (n.is_finite() && n >= 1.0).then_some(n as usize)
        };
        match (count(x0, x1), count(y0, y1)) {
            (Some(nx), Some(ny)) => {
                let total = nx.saturating_mul(ny);
                if total > MAX_LATTICE_POINTS {
                    return Err(PiouError::LatticeTooLarge(total));
                }
                Ok(Self { x0, y0, step, nx, ny })
            }
            _ => Err(PiouError::EmptySupport),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.x0 + i as f64 * self.step, self.y0 + j as f64 * self.step)
    }
}

/// Hard inside test through the polar decomposition `(d, β)` of the offset
/// from the box center.
///
/// `β` is the angle between the center-to-pixel direction and the box width
/// axis, with `θ` measured counter-clockwise like the rest of the crate.
pub fn hard_inside(pixel: Point2, b: &RotatedBox) -> bool {
    let vx = b.cx() - pixel.x;
    let vy = b.cy() - pixel.y;
    let d = (vx * vx + vy * vy).sqrt();
    if d == 0.0 {
        return true;
    }
    let phi = (vx / d).clamp(-1.0, 1.0).acos();
    let phi = if vy >= 0.0 { phi } else { -phi };
    let beta = phi - b.theta();
    let d_w = (d * beta.cos()).abs();
    let d_h = (d * beta.sin()).abs();
    d_w <= b.w() / 2.0 && d_h <= b.h() / 2.0
}

/// `K(d, s) = 1 - 1/(1 + e^{-k(d - s)})`, evaluated as `σ(k(s - d))`
/// without overflow.
#[inline]
pub fn kernel<S: Scalar>(d: S, s: S, k: f64) -> S {
    let z = (s - d) * S::from_f64(k);
    if z.re() >= 0.0 {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

/// Soft membership `F(p | b) = K(d_w, s_w) · K(d_h, s_h)`.
///
/// `d_w` and `d_h` are the absolute projections of the offset on the box
/// axes, the same quantities as `|d cos β|` and `|d sin β|`.
pub fn soft_membership<S: Scalar>(pixel: Point2, b: &RotatedBox<S>, cfg: &PiouConfig) -> S {
    let (u, v) = b.axes();
    let rel = pixel.cast::<S>().sub(b.center());
    let d_w = rel.dot(u).abs();
    let d_h = rel.dot(v).abs();
    let (s_w, s_h) = match cfg.threshold {
        KernelThreshold::HalfExtent => (b.w() * S::from_f64(0.5), b.h() * S::from_f64(0.5)),
        KernelThreshold::FullExtent => (b.w(), b.h()),
    };
    kernel(d_w, s_w, cfg.k) * kernel(d_h, s_h, cfg.k)
}

/// Approximate `(intersection, union)` areas on a given lattice.
pub fn piou_areas<S: Scalar>(
    gt: &RotatedBox<S>,
    prd: &RotatedBox<S>,
    cfg: &PiouConfig,
    lattice: &Lattice,
) -> (S, S) {
    let rows: Vec<(S, S)> = (0..lattice.ny)
        .into_par_iter()
        .map(|j| {
            let mut inter = Vec::with_capacity(lattice.nx);
            let mut union = Vec::with_capacity(lattice.nx);
            for i in 0..lattice.nx {
                let p = lattice.point(i, j);
                let f1 = soft_membership(p, gt, cfg);
                let f2 = soft_membership(p, prd, cfg);
                let both = f1 * f2;
                inter.push(both);
                union.push(f1 + f2 - both);
            }
            (pairwise_sum(&inter), pairwise_sum(&union))
        })
        .collect();
    let (inter, union): (Vec<S>, Vec<S>) = rows.into_iter().unzip();
    let cell = S::from_f64(lattice.step * lattice.step);
    (pairwise_sum(&inter) * cell, pairwise_sum(&union) * cell)
}

/// PIoU on an explicit lattice. Holding the lattice fixed makes the value a
/// smooth function of both boxes.
pub fn piou_on_lattice<S: Scalar>(
    gt: &RotatedBox<S>,
    prd: &RotatedBox<S>,
    cfg: &PiouConfig,
    lattice: &Lattice,
) -> Result<S, PiouError> {
    if lattice.is_empty() {
        return Err(PiouError::EmptySupport);
    }
    let (inter, union) = piou_areas(gt, prd, cfg, lattice);
    if !(union.re() > 0.0) {
        return Err(PiouError::EmptySupport);
    }
    Ok(inter / union)
}

/// PIoU on the lattice covering the padded joint AABB of both boxes.
pub fn piou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>, cfg: &PiouConfig) -> Result<S, PiouError> {
    let lattice = Lattice::covering(&gt.re(), &prd.re(), cfg)?;
    piou_on_lattice(gt, prd, cfg, &lattice)
}

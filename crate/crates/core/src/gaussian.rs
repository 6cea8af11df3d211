//! Gaussian modeling of rotated boxes: GWD, KLD and KFIoU.
//!
//! A box maps to `N(μ, Σ)` with `μ = (cx, cy)` and
//! `Σ = R(θ) diag(w²/4, h²/4) R(θ)ᵀ`. With that scale the Gaussian volume
//! `4 |Σ|^{1/2}` equals the rectangle area `w h`.

use thiserror::Error;

use crate::geom::{Point2, RotatedBox};
use crate::scalar::Scalar;

/// Reciprocal condition-number guard for covariance inverses.
pub const EPS_COND: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("covariance is numerically singular (eigenvalue ratio {ratio:.3e})")]
    SingularCovariance { ratio: f64 },
    #[error("tau must be finite and >= 1, got {0}")]
    InvalidTau(f64),
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2<S = f64> {
    pub xx: S,
    pub xy: S,
    pub yy: S,
}

impl<S: Scalar> Sym2<S> {
    pub fn new(xx: S, xy: S, yy: S) -> Self {
        Self { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Self::new(S::one(), S::zero(), S::one())
    }

    pub fn det(&self) -> S {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> S {
        self.xx + self.yy
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn scale(&self, s: S) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> S {
        self.xx.sq() + S::from_f64(2.0) * self.xy.sq() + self.yy.sq()
    }

    /// Principal square root of a positive definite matrix.
    ///
    /// Closed form from Cayley–Hamilton: `√A = (A + √det · I) / √(tr + 2√det)`.
    /// It agrees with the eigendecomposition root and stays differentiable
    /// when the two eigenvalues coincide.
    pub fn sqrt(&self) -> Self {
        let s = self.det().sqrt();
        let t = (self.trace() + S::from_f64(2.0) * s).sqrt();
        Self::new((self.xx + s) / t, self.xy / t, (self.yy + s) / t)
    }

    /// Eigenvalues `(λ_min, λ_max)` of the real part.
    pub fn eigenvalues_re(&self) -> (f64, f64) {
        let (a, b, c) = (self.xx.re(), self.xy.re(), self.yy.re());
        let m = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let hi = m + r;
        // det / λ_max avoids cancellation in m - r for ill-conditioned input
        ((a * c - b * b) / hi, hi)
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: Point2<S>) -> S {
        self.xx * v.x.sq() + S::from_f64(2.0) * self.xy * v.x * v.y + self.yy * v.y.sq()
    }

    /// `trace(self · o)` for symmetric operands.
    pub fn trace_product(&self, o: &Self) -> S {
        self.xx * o.xx + S::from_f64(2.0) * self.xy * o.xy + self.yy * o.yy
    }
}

/// General 2x2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Mat2<S> {
    a: S,
    b: S,
    c: S,
    d: S,
}

impl<S: Scalar> Mat2<S> {
    fn from_sym(s: &Sym2<S>) -> Self {
        Self {
            a: s.xx,
            b: s.xy,
            c: s.xy,
            d: s.yy,
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian2<S = f64> {
    pub mu: Point2<S>,
    pub sigma: Sym2<S>,
}

impl<S: Scalar> Gaussian2<S> {
    fn check_conditioning(&self) -> Result<(), GaussianError> {
        let (lo, hi) = self.sigma.eigenvalues_re();
        let ratio = lo / hi;
        if ratio.is_finite() && ratio > EPS_COND {
            Ok(())
        } else {
            Err(GaussianError::SingularCovariance { ratio })
        }
    }
}

pub fn box_to_gaussian<S: Scalar>(b: &RotatedBox<S>) -> Gaussian2<S> {
    let quarter = S::from_f64(0.25);
    let a = b.w().sq() * quarter;
    let d = b.h().sq() * quarter;
    let (s, c) = (b.theta().sin(), b.theta().cos());
    Gaussian2 {
        mu: b.center(),
        sigma: Sym2::new(a * c.sq() + d * s.sq(), (a - d) * c * s, a * s.sq() + d * c.sq()),
    }
}

/// Non-linearity applied to a distance before the `1 / (τ + f(d))` map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistanceTransform {
    Identity,
    #[default]
    Sqrt,
    Log1p,
}

impl DistanceTransform {
    pub fn apply<S: Scalar>(self, d: S) -> S {
        match self {
            Self::Identity => d,
            Self::Sqrt => d.sqrt(),
            Self::Log1p => d.ln_1p(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GwdConfig {
    tau: f64,
    f: DistanceTransform,
}

impl GwdConfig {
    pub fn new(tau: f64, f: DistanceTransform) -> Result<Self, GaussianError> {
        if tau.is_finite() && tau >= 1.0 {
            Ok(Self { tau, f })
        } else {
            Err(GaussianError::InvalidTau(tau))
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn transform(&self) -> DistanceTransform {
        self.f
    }

    /// `1 / (τ + f(d))`.
    pub fn similarity<S: Scalar>(&self, d: S) -> S {
        S::one() / (S::from_f64(self.tau) + self.f.apply(d))
    }
}

impl Default for GwdConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            f: DistanceTransform::Sqrt,
        }
    }
}

/// Squared 2-Wasserstein distance between the box Gaussians, via matrix
/// square roots.
pub fn gwd_distance_sq<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    let g1 = box_to_gaussian(gt);
    let g2 = box_to_gaussian(prd);
    g1.mu.dist_sq(g2.mu) + g1.sigma.sqrt().sub(&g2.sigma.sqrt()).frobenius_sq()
}

/// The simplified form `Δx² + Δy² + (Δw² + Δh²)/4`, exact only when the two
/// angles agree modulo `π`.
pub fn gwd_distance_sq_closed_form<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    (gt.cx() - prd.cx()).sq()
        + (gt.cy() - prd.cy()).sq()
        + ((gt.w() - prd.w()).sq() + (gt.h() - prd.h()).sq()) * S::from_f64(0.25)
}

pub fn gwd<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>, cfg: &GwdConfig) -> S {
    let d2 = gwd_distance_sq(gt, prd);
    debug_assert!({
        let dt = (gt.theta().re() - prd.theta().re()).abs();
        if dt < 1e-12 {
            let cf = gwd_distance_sq_closed_form(gt, prd).re();
            (cf - d2.re()).abs() <= 1e-9 * cf.max(1.0)
        } else {
            true
        }
    });
    cfg.similarity(d2)
}

/// `D_kl(N_p ‖ N_t)`.
pub fn kld<S: Scalar>(p: &RotatedBox<S>, t: &RotatedBox<S>) -> Result<S, GaussianError> {
    let gp = box_to_gaussian(p);
    let gt = box_to_gaussian(t);
    gp.check_conditioning()?;
    gt.check_conditioning()?;
    let inv_t = gt.sigma.inverse();
    let dmu = gp.mu.sub(gt.mu);
    let half = S::from_f64(0.5);
    Ok(half * inv_t.quad_form(dmu) + half * inv_t.trace_product(&gp.sigma)
        + half * (gt.sigma.det() / gp.sigma.det()).ln()
        - S::one())
}

/// `2ⁿ |Σ|^{1/2}` with `n = 2`.
pub fn gaussian_volume<S: Scalar>(g: &Gaussian2<S>) -> S {
    S::from_f64(4.0) * g.sigma.det().sqrt()
}

/// Covariance of the product Gaussian, `Σ₁ - K Σ₁` with Kalman gain
/// `K = Σ₁ (Σ₁ + Σ₂)⁻¹`.
pub fn kalman_product_covariance<S: Scalar>(s1: &Sym2<S>, s2: &Sym2<S>) -> Sym2<S> {
    let k = Mat2::from_sym(s1).mul(&Mat2::from_sym(&s1.add(s2).inverse()));
    let ks1 = k.mul(&Mat2::from_sym(s1));
    // K Σ₁ = Σ₁ (Σ₁+Σ₂)⁻¹ Σ₁ is symmetric; average the off-diagonals
    let off = (ks1.b + ks1.c) * S::from_f64(0.5);
    Sym2::new(s1.xx - ks1.a, s1.xy - off, s1.yy - ks1.d)
}

/// KFIoU volume ratio in `(0, 1/3]`. Centers do not enter.
pub fn kfiou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, GaussianError> {
    let g1 = box_to_gaussian(gt);
    let g2 = box_to_gaussian(prd);
    g1.check_conditioning()?;
    g2.check_conditioning()?;
    let v1 = gaussian_volume(&g1);
    let v2 = gaussian_volume(&g2);
    let sigma = kalman_product_covariance(&g1.sigma, &g2.sigma);
    let v3 = S::from_f64(4.0) * sigma.det().sqrt();
    Ok(v3 / (v1 + v2 - v3))
}

/// KFIoU rescaled by 3 so identical boxes score 1.
pub fn kfiou_normalized<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, GaussianError> {
    Ok(kfiou(gt, prd)? * S::from_f64(3.0))
}

/// Euclidean distance between the box centers.
pub fn center_loss<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    gt.center().dist_sq(prd.center()).sqrt()
}

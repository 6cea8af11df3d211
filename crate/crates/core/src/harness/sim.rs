//! Synthetic box regression by plain gradient descent.
//!
//! Each trial samples a target box and an initial prediction, then updates
//! the prediction's `(cx, cy, w, h, θ)` by `p ← p − lr·∇L` using forward-mode
//! gradients of the chosen loss, with a separate step size for `θ`. Trial
//! `i` draws from ChaCha stream `i` of the configured seed, so traces do not
//! depend on how trials are scheduled.
//!
//! [`SimConfig::default`] is the standard disjoint-init scenario: a 12×12
//! image, box sizes 4 to 6 with aspect 1 to 3, initial boxes 6 to 8 pixels
//! away and never overlapping the target.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::diffcheck::{grad_prd, DiffError};
use crate::geom::{GeomError, ImageDims, RotatedBox};
use crate::iou::{corner_dist_sq_sum, rotated_iou, Enclosing};
use crate::metric::{Metric, MetricError, MetricKind};
use crate::oracle::stream_rng;
use crate::piou::PiouConfig;

/// Perturbation applied to every parameter when a gradient is requested at
/// a non-smooth point.
pub const EPS_JITTER: f64 = 1e-7;
const MAX_JITTERS_PER_STEP: usize = 8;
const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("trial {trial}: no disjoint initial box after {MAX_SAMPLING_ATTEMPTS} draws")]
    Sampling { trial: usize },
    #[error("trial {trial}, iteration {iter}: {source}")]
    Metric {
        trial: usize,
        iter: usize,
        source: MetricError,
    },
    #[error("trial {trial}, iteration {iter}: still non-smooth after {MAX_JITTERS_PER_STEP} perturbations")]
    Stuck { trial: usize, iter: usize },
    #[error("trial {trial}, iteration {iter}: {source}")]
    Geom {
        trial: usize,
        iter: usize,
        source: GeomError,
    },
}

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self, String> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(format!("range {lo}..{hi} is empty or not finite"));
        }
        Ok(Self { lo, hi })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

/// How target and initial boxes are drawn.
///
/// A box of size `s` and aspect `a` has `w = s·√a`, `h = s/√a`. Target
/// centers are uniform over the middle half of the image. The initial box
/// sits at distance `offset` from the target center in a uniform direction
/// with size `init_scale · s_target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitDistribution {
    pub size: Range,
    pub aspect: Range,
    pub angle: Range,
    pub offset: Range,
    pub init_scale: Range,
    pub init_aspect: Range,
    /// Redraw the initial box until it does not overlap the target.
    pub disjoint: bool,
}

impl Default for InitDistribution {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            size: Range { lo: 4.0, hi: 6.0 },
            aspect: Range { lo: 1.0, hi: 3.0 },
            angle: Range {
                lo: -FRAC_PI_2,
                hi: FRAC_PI_2,
            },
            offset: Range { lo: 6.0, hi: 8.0 },
            init_scale: Range { lo: 0.5, hi: 1.5 },
            init_aspect: Range { lo: 1.0, hi: 3.0 },
            disjoint: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub n_trials: usize,
    pub loss: MetricKind,
    /// Step size for `cx`, `cy`, `w`, `h` (pixels).
    pub lr: f64,
    /// Step size for `θ` (radians).
    pub lr_theta: f64,
    pub max_iters: usize,
    pub init: InitDistribution,
    pub image_dims: ImageDims,
    pub seed: u64,
    /// Stop updating a trial once its loss falls below this.
    pub stop_tol: f64,
    /// Floor on `w` and `h` after each update.
    pub min_extent: f64,
    /// IoU level used by the iterations-to-target summary.
    pub iou_target: f64,
    pub enclosing: Enclosing,
    pub piou_k: f64,
    pub piou_step: f64,
    pub kfiou_normalized: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_trials: 100,
            loss: MetricKind::Fpdiou,
            lr: 0.5,
            lr_theta: 0.02,
            max_iters: 500,
            init: InitDistribution::default(),
            image_dims: ImageDims::new(12.0, 12.0).unwrap(),
            seed: 0,
            stop_tol: 0.0,
            min_extent: 0.1,
            iou_target: 0.7,
            enclosing: Enclosing::Hull,
            piou_k: 10.0,
            piou_step: 0.1,
            kfiou_normalized: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lr_theta.is_finite() && self.lr_theta > 0.0) {
            return bad(format!("lr_theta must be positive, got {}", self.lr_theta));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.min_extent.is_finite() && self.min_extent > 0.0) {
            return bad(format!("min_extent must be positive, got {}", self.min_extent));
        }
        if !self.stop_tol.is_finite() {
            return bad("stop_tol must be finite".into());
        }
        if self.init.size.lo <= 0.0 || self.init.aspect.lo <= 0.0 || self.init.init_scale.lo <= 0.0 || self.init.init_aspect.lo <= 0.0
        {
            return bad("size, aspect and scale ranges must be positive".into());
        }
        PiouConfig::new(self.piou_k, self.piou_step).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn metric(&self) -> Metric {
        let mut m = Metric::new(self.loss, self.image_dims);
        m.enclosing = self.enclosing;
        m.piou = PiouConfig::new(self.piou_k, self.piou_step).unwrap_or_default();
        m.kfiou_normalized = self.kfiou_normalized;
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub rotated_iou: f64,
    /// `sqrt(Σ d_i² / 4)` over sorted corner pairs.
    pub corner_rms: f64,
    /// The gradient at this iteration needed a perturbation.
    pub jittered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub trial: usize,
    pub target: RotatedBox,
    pub init: RotatedBox,
    pub records: Vec<IterRecord>,
}

impl TrialTrace {
    pub fn final_iou(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.rotated_iou)
    }

    /// First iteration whose IoU reaches `target`.
    pub fn iters_to(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.rotated_iou >= target).map(|r| r.iter)
    }

    pub fn jitter_count(&self) -> usize {
        self.records.iter().filter(|r| r.jittered).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub config: SimConfig,
    pub trials: Vec<TrialTrace>,
}

/// Aggregates over a [`SimTrace`]. Trials that never reach the IoU target
/// count as `+∞` iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSummary {
    pub n_trials: usize,
    pub final_iou_p10: f64,
    pub final_iou_p50: f64,
    pub final_iou_p90: f64,
    pub n_reached: usize,
    pub median_iters_to_target: f64,
    pub n_improved: usize,
    pub n_jittered: usize,
}

/// Nearest-rank percentile of sorted data, `q ∈ [0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Median with the usual even-count midpoint; infinite values sort last.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => {
            let (a, b) = (v[n / 2 - 1], v[n / 2]);
            if b.is_infinite() {
                b
            } else {
                0.5 * (a + b)
            }
        }
    }
}

impl SimTrace {
    pub fn summary(&self) -> SimSummary {
        let target = self.config.iou_target;
        let mut finals: Vec<f64> = self.trials.iter().map(TrialTrace::final_iou).collect();
        finals.sort_by(f64::total_cmp);
        let iters: Vec<f64> = self
            .trials
            .iter()
            .map(|t| t.iters_to(target).map_or(f64::INFINITY, |i| i as f64))
            .collect();
        SimSummary {
            n_trials: self.trials.len(),
            final_iou_p10: percentile(&finals, 0.1),
            final_iou_p50: percentile(&finals, 0.5),
            final_iou_p90: percentile(&finals, 0.9),
            n_reached: iters.iter().filter(|v| v.is_finite()).count(),
            median_iters_to_target: median(&iters),
            n_improved: self
                .trials
                .iter()
                .filter(|t| t.records.first().is_some_and(|r0| t.final_iou() > r0.rotated_iou))
                .count(),
            n_jittered: self.trials.iter().map(TrialTrace::jitter_count).sum(),
        }
    }
}

fn sample_box(cx: f64, cy: f64, size: f64, aspect: f64, angle: f64) -> Result<RotatedBox, GeomError> {
    let r = aspect.sqrt();
    RotatedBox::new(cx, cy, size * r, size / r, angle)
}

/// Draw the `(target, init)` pair of one trial.
pub fn sample_pair(cfg: &SimConfig, rng: &mut ChaCha8Rng, trial: usize) -> Result<(RotatedBox, RotatedBox), SimError> {
    let d = &cfg.init;
    let geom = |source| SimError::Geom { trial, iter: 0, source };
    let (iw, ih) = (cfg.image_dims.w(), cfg.image_dims.h());
    let cx = iw * (0.25 + 0.5 * rng.random::<f64>());
    let cy = ih * (0.25 + 0.5 * rng.random::<f64>());
    let s = d.size.sample(rng);
    let (a, t) = (d.aspect.sample(rng), d.angle.sample(rng));
    let target = sample_box(cx, cy, s, a, t).map_err(geom)?;
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let dist = d.offset.sample(rng);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let s0 = s * d.init_scale.sample(rng);
        let a0 = d.init_aspect.sample(rng);
        let t0 = d.angle.sample(rng);
        let init = sample_box(cx + dist * phi.cos(), cy + dist * phi.sin(), s0, a0, t0).map_err(geom)?;
        if !d.disjoint || rotated_iou(&target, &init) == 0.0 {
            return Ok((target, init));
        }
    }
    Err(SimError::Sampling { trial })
}

fn gradient(
    metric: &Metric,
    target: &RotatedBox,
    prd: &mut RotatedBox,
    rng: &mut ChaCha8Rng,
    trial: usize,
    iter: usize,
) -> Result<([f64; 5], bool), SimError> {
    let mut jittered = false;
    for _ in 0..=MAX_JITTERS_PER_STEP {
        match grad_prd(metric, target, prd) {
            Ok(g) => return Ok((g, jittered)),
            Err(DiffError::NonSmoothPoint(_)) => {
                let p = prd.params().map(|x| x + if rng.random::<bool>() { EPS_JITTER } else { -EPS_JITTER });
                *prd = RotatedBox::from_params(p).map_err(|source| SimError::Geom { trial, iter, source })?;
                jittered = true;
            }
            Err(DiffError::Metric(source)) => return Err(SimError::Metric { trial, iter, source }),
            Err(DiffError::Geom(source)) => return Err(SimError::Geom { trial, iter, source }),
        }
    }
    Err(SimError::Stuck { trial, iter })
}

fn run_trial(cfg: &SimConfig, metric: &Metric, trial: usize) -> Result<TrialTrace, SimError> {
    let mut rng = stream_rng(cfg.seed, trial as u64);
    let (target, init) = sample_pair(cfg, &mut rng, trial)?;
    let mut prd = init;
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut done = false;
    for iter in 0..cfg.max_iters {
        let loss = metric
            .loss(&target, &prd)
            .map_err(|source| SimError::Metric { trial, iter, source })?;
        let rec = |jittered, prd: &RotatedBox, loss| IterRecord {
            iter,
            loss,
            rotated_iou: rotated_iou(&target, prd),
            corner_rms: (corner_dist_sq_sum(&target.corners(), &prd.corners()) / 4.0).sqrt(),
            jittered,
        };
        done = done || loss < cfg.stop_tol;
        if done {
            records.push(rec(false, &prd, loss));
            continue;
        }
        let (g, jittered) = gradient(metric, &target, &mut prd, &mut rng, trial, iter)?;
        records.push(rec(jittered, &prd, loss));
        let mut p = prd.params();
        for (i, (x, gi)) in p.iter_mut().zip(g).enumerate() {
            *x -= if i == 4 { cfg.lr_theta } else { cfg.lr } * gi;
        }
        p[2] = p[2].max(cfg.min_extent);
        p[3] = p[3].max(cfg.min_extent);
        prd = RotatedBox::from_params(p).map_err(|source| SimError::Geom { trial, iter, source })?;
    }
    Ok(TrialTrace {
        trial,
        target,
        init,
        records,
    })
}

/// Run every trial of `cfg`.
pub fn simulate_regression(cfg: &SimConfig) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let metric = cfg.metric();
    let trials = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &metric, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimTrace { config: *cfg, trials })
}

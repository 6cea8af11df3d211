//! Brute-force references: Monte Carlo intersection area and a dense hard
//! pixel IoU. Both are independent of the clipping code they are used to
//! check.
//!
//! Sampling uses ChaCha8 streams. Samples are drawn in fixed-size chunks,
//! chunk `c` from stream `c` of the seeded generator, so the estimate is
//! bit-identical no matter how many threads process the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{Point2, RotatedBox};
use crate::piou::hard_inside;

pub const MIN_MC_SAMPLES: u64 = 10_000;
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("at least {MIN_MC_SAMPLES} samples required, got {0}")]
    TooFewSamples(u64),
    #[error("lattice step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn aabb(b: &RotatedBox) -> (f64, f64, f64, f64) {
    b.ccw_vertices().iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
    )
}

/// Unbiased estimate of `area(a ∩ b)` by uniform sampling of the region
/// where both bounding boxes overlap.
pub fn mc_intersection_area(a: &RotatedBox, b: &RotatedBox, n: u64, seed: u64) -> Result<McEstimate, OracleError> {
    if n < MIN_MC_SAMPLES {
        return Err(OracleError::TooFewSamples(n));
    }
    let (ax0, ay0, ax1, ay1) = aabb(a);
    let (bx0, by0, bx1, by1) = aabb(b);
    let (x0, y0, x1, y1) = (ax0.max(bx0), ay0.max(by0), ax1.min(bx1), ay1.min(by1));
    if !(x1 > x0 && y1 > y0) {
        return Ok(McEstimate {
            mean: 0.0,
            std_err: 0.0,
            n_samples: n,
            seed,
        });
    }
    let region = (x1 - x0) * (y1 - y0);
    let chunks = n.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            let mut hit = 0u64;
            for _ in 0..len {
                let p = Point2::new(rng.random_range(x0..x1), rng.random_range(y0..y1));
                if a.contains(p) && b.contains(p) {
                    hit += 1;
                }
            }
            hit
        })
        .sum();
    let nf = n as f64;
    let p = hits as f64 / nf;
    // sample variance of the indicator, n - 1 normalization
    let var = p * (1.0 - p) * nf / (nf - 1.0);
    Ok(McEstimate {
        mean: region * p,
        std_err: region * (var / nf).sqrt(),
        n_samples: n,
        seed,
    })
}

/// IoU from hard membership counts on a cell-centered lattice of spacing
/// `step` over the joint bounding box.
pub fn dense_pixel_iou(a: &RotatedBox, b: &RotatedBox, step: f64) -> Result<f64, OracleError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(OracleError::InvalidStep(step));
    }
    let (ax0, ay0, ax1, ay1) = aabb(a);
    let (bx0, by0, bx1, by1) = aabb(b);
    let (x0, y0, x1, y1) = (ax0.min(bx0), ay0.min(by0), ax1.max(bx1), ay1.max(by1));
    let nx = ((x1 - x0) / step).ceil() as usize;
    let ny = ((y1 - y0) / step).ceil() as usize;
    let (inter, union) = (0..ny)
        .into_par_iter()
        .map(|j| {
            let y = y0 + (j as f64 + 0.5) * step;
            let (mut i_n, mut u_n) = (0u64, 0u64);
            for i in 0..nx {
                let p = Point2::new(x0 + (i as f64 + 0.5) * step, y);
                let (ia, ib) = (hard_inside(p, a), hard_inside(p, b));
                i_n += (ia && ib) as u64;
                u_n += (ia || ib) as u64;
            }
            (i_n, u_n)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

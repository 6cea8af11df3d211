//! Batch layer behind the `rotbox` binary: DOTA ingestion, metric matrices,
//! AP evaluation, the regression simulator and CSV output.

pub mod config;
pub mod dota;
pub mod eval;
pub mod report;
pub mod sim;

use rayon::prelude::*;

use crate::geom::{CornerQuad, RotatedBox};
use crate::iou::fpdiou_quads;
use crate::metric::{Metric, MetricError};

pub use config::ConfigError;
pub use dota::{parse_detections, parse_dota, Annotation, Detection, DotaError, QuadPolicy};
pub use eval::{coco_thresholds, evaluate_ap, EvalResult};
pub use report::{emit_csv, MetricMatrix};
pub use sim::{simulate_regression, SimConfig, SimTrace};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "ROTBOX_THREADS";

/// Size the global rayon pool from `ROTBOX_THREADS` if it is set to a
/// positive integer. Returns the cap that was applied.
pub fn init_thread_pool() -> Option<usize> {
    let n = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}

/// `|gts| × |prds|` matrix of `metric.value(gt, prd)`, rows in `gts` order.
pub fn metric_matrix(gts: &[RotatedBox], prds: &[RotatedBox], metric: &Metric) -> Result<MetricMatrix, MetricError> {
    let rows = gts
        .par_iter()
        .map(|g| prds.iter().map(|p| metric.value(g, p)).collect::<Result<Vec<f64>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricMatrix(rows))
}

/// FPDIoU matrix over raw quads, for annotations that are not rectangles.
pub fn fpdiou_quad_matrix(gts: &[CornerQuad], prds: &[CornerQuad], metric: &Metric) -> MetricMatrix {
    MetricMatrix(
        gts.par_iter()
            .map(|g| prds.iter().map(|p| fpdiou_quads(g, p, metric.dims)).collect())
            .collect(),
    )
}

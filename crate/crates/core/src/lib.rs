//! Similarity metrics and regression losses for rotated bounding boxes.
//!
//! The crate covers the exact polygon IoU family ([`iou`]), Gaussian
//! distribution metrics ([`gaussian`]), the pixel-kernel PIoU ([`piou`]) and
//! the four-point-distance FPDIoU ([`iou::fpdiou`]). Every metric is generic
//! over [`Scalar`], so the same code yields forward-mode gradients through
//! [`diffcheck`]. [`oracle`] holds brute-force references and [`harness`]
//! the dataset, evaluation and simulation layer behind the `rotbox` binary.
//!
//! ```
//! use rotbox::geom::{ImageDims, RotatedBox};
//! use rotbox::iou::{fpdiou, loss_of, rotated_iou};
//!
//! let gt = RotatedBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap();
//! let prd = RotatedBox::new(1.0, 0.0, 2.0, 2.0, 0.0).unwrap();
//! assert!((rotated_iou(&gt, &prd) - 1.0 / 3.0).abs() < 1e-12);
//!
//! let dims = ImageDims::new(10.0, 10.0).unwrap();
//! let loss = loss_of(fpdiou(&gt, &prd, dims));
//! assert!((loss - (1.0 - (1.0 / 3.0 - 0.005))).abs() < 1e-12);
//! ```

pub mod diffcheck;
pub mod gaussian;
pub mod geom;
pub mod harness;
pub mod iou;
pub mod metric;
pub mod oracle;
pub mod piou;
pub mod scalar;

pub use geom::{CornerQuad, ImageDims, RotatedBox};
pub use metric::{Metric, MetricKind};
pub use scalar::Scalar;

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/boxes.md")]
    mod boxes {}
    #[doc = include_str!("../../../book/src/overlap.md")]
    mod overlap {}
    #[doc = include_str!("../../../book/src/fpdiou.md")]
    mod fpdiou {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/piou.md")]
    mod piou {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}

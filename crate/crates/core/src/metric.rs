//! A single enum over every metric, so batch code, the gradient checker and
//! the CLI can select one by name.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gaussian::{self, GaussianError, GwdConfig};
use crate::geom::{ImageDims, RotatedBox};
use crate::iou::{self, Enclosing};
use crate::piou::{self, Lattice, PiouConfig, PiouError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Piou(#[from] PiouError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    RotatedIou,
    Giou,
    Diou,
    Ciou,
    Eiou,
    Fpdiou,
    Gwd,
    Kld,
    Kfiou,
    Piou,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        Self::RotatedIou,
        Self::Giou,
        Self::Diou,
        Self::Ciou,
        Self::Eiou,
        Self::Fpdiou,
        Self::Gwd,
        Self::Kld,
        Self::Kfiou,
        Self::Piou,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RotatedIou => "rotated_iou",
            Self::Giou => "giou",
            Self::Diou => "diou",
            Self::Ciou => "ciou",
            Self::Eiou => "eiou",
            Self::Fpdiou => "fpdiou",
            Self::Gwd => "gwd",
            Self::Kld => "kld",
            Self::Kfiou => "kfiou",
            Self::Piou => "piou",
        }
    }

    /// Whether `metric(a, b) == metric(b, a)` under the crate's realizations.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Self::Kld)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "iou" | "skewiou" | "rotatediou" => "rotated_iou",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown metric '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// Metric selection plus every knob a metric may need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric {
    pub kind: MetricKind,
    /// Normalizer for FPDIoU.
    pub dims: ImageDims,
    pub enclosing: Enclosing,
    pub gwd: GwdConfig,
    /// Maps the KL divergence to a similarity `1/(τ + f(D))` for its loss.
    pub kld: GwdConfig,
    pub piou: PiouConfig,
    /// Report `3 · KFIoU` so identical boxes score 1.
    pub kfiou_normalized: bool,
}

impl Metric {
    pub fn new(kind: MetricKind, dims: ImageDims) -> Self {
        Self {
            kind,
            dims,
            enclosing: Enclosing::Hull,
            gwd: GwdConfig::default(),
            kld: GwdConfig::new(1.0, gaussian::DistanceTransform::Log1p).unwrap(),
            piou: PiouConfig::default(),
            kfiou_normalized: false,
        }
    }

    /// The raw metric value. For KLD this is the divergence itself (lower is
    /// more similar); every other metric is a similarity.
    pub fn value<S: Scalar>(&self, gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, MetricError> {
        self.value_with(gt, prd, None)
    }

    fn value_with<S: Scalar>(
        &self,
        gt: &RotatedBox<S>,
        prd: &RotatedBox<S>,
        lattice: Option<&Lattice>,
    ) -> Result<S, MetricError> {
        Ok(match self.kind {
            MetricKind::RotatedIou => iou::rotated_iou(gt, prd),
            MetricKind::Giou => iou::giou_with(gt, prd, self.enclosing),
            MetricKind::Diou => iou::diou(gt, prd),
            MetricKind::Ciou => iou::ciou(gt, prd),
            MetricKind::Eiou => iou::eiou(gt, prd),
            MetricKind::Fpdiou => iou::fpdiou(gt, prd, self.dims),
            MetricKind::Gwd => gaussian::gwd(gt, prd, &self.gwd),
            MetricKind::Kld => gaussian::kld(prd, gt)?,
            MetricKind::Kfiou if self.kfiou_normalized => gaussian::kfiou_normalized(gt, prd)?,
            MetricKind::Kfiou => gaussian::kfiou(gt, prd)?,
            MetricKind::Piou => match lattice {
                Some(l) => piou::piou_on_lattice(gt, prd, &self.piou, l)?,
                None => piou::piou(gt, prd, &self.piou)?,
            },
        })
    }

    /// Loss: `1 - similarity`. KLD uses `1 - 1/(τ + f(D))`.
    pub fn loss<S: Scalar>(&self, gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, MetricError> {
        self.loss_with(gt, prd, None)
    }

    fn loss_with<S: Scalar>(
        &self,
        gt: &RotatedBox<S>,
        prd: &RotatedBox<S>,
        lattice: Option<&Lattice>,
    ) -> Result<S, MetricError> {
        let v = self.value_with(gt, prd, lattice)?;
        Ok(match self.kind {
            MetricKind::Kld => iou::loss_of(self.kld.similarity(v)),
            _ => iou::loss_of(v),
        })
    }

    /// Freeze any evaluation state that depends on the box positions (the
    /// PIoU lattice) at the given configuration.
    pub fn freeze(&self, gt: &RotatedBox, prd: &RotatedBox) -> Result<FrozenMetric, MetricError> {
        let lattice = match self.kind {
            MetricKind::Piou => Some(Lattice::covering(gt, prd, &self.piou)?),
            _ => None,
        };
        Ok(FrozenMetric { metric: *self, lattice })
    }
}

/// A [`Metric`] with its sampling lattice pinned, smooth in both boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenMetric {
    metric: Metric,
    lattice: Option<Lattice>,
}

impl FrozenMetric {
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn value<S: Scalar>(&self, gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, MetricError> {
        self.metric.value_with(gt, prd, self.lattice.as_ref())
    }

    pub fn loss<S: Scalar>(&self, gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> Result<S, MetricError> {
        self.metric.loss_with(gt, prd, self.lattice.as_ref())
    }
}

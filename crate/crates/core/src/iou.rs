//! Exact-area IoU-family metrics: RotatedIoU, GIoU, DIoU, CIoU, EIoU and
//! FPDIoU.
//!
//! All areas come from exact convex clipping. Each function returns the
//! metric value; the matching loss is [`loss_of`]`(value) = 1 - value`.

use std::f64::consts::PI;

use crate::geom::{
    convex_hull, intersect_convex, min_enclosing_aabb, polygon_area, CornerQuad, ImageDims,
    Point2, RotatedBox,
};
use crate::scalar::Scalar;

/// Region used as `C` in GIoU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Enclosing {
    /// Convex hull of the eight corners.
    #[default]
    Hull,
    /// Axis-aligned bounding box of the eight corners.
    Aabb,
}

/// Intersection and union areas of two boxes.
pub fn overlap_areas<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> (S, S) {
    let inter = polygon_area(&intersect_convex(&gt.polygon(), &prd.polygon()));
    let union = gt.area() + prd.area() - inter;
    (inter, union)
}

/// IoU of two convex polygons given as corner quads.
pub fn quad_iou<S: Scalar>(a: &CornerQuad<S>, b: &CornerQuad<S>) -> S {
    let pa = a.to_polygon();
    let pb = b.to_polygon();
    let inter = polygon_area(&intersect_convex(&pa, &pb));
    let union = polygon_area(&pa) + polygon_area(&pb) - inter;
    if union.re() <= 0.0 {
        return S::zero();
    }
    inter / union
}

/// Exact rotated IoU in `[0, 1]`.
pub fn rotated_iou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    let (inter, union) = overlap_areas(gt, prd);
    inter / union
}

/// GIoU with the convex hull as the enclosing region.
pub fn giou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    giou_with(gt, prd, Enclosing::Hull)
}

pub fn giou_with<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>, enclosing: Enclosing) -> S {
    let (inter, union) = overlap_areas(gt, prd);
    let c_area = match enclosing {
        Enclosing::Hull => {
            let mut pts: Vec<Point2<S>> = gt.ccw_vertices().to_vec();
            pts.extend(prd.ccw_vertices());
            polygon_area(&convex_hull(&pts))
        }
        Enclosing::Aabb => {
            let (wc, hc) = min_enclosing_aabb(&gt.corners(), &prd.corners());
            wc * hc
        }
    };
    inter / union - (c_area - union) / c_area
}

fn center_dist_sq<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    gt.center().dist_sq(prd.center())
}

/// DIoU: `IoU - ρ²/C²` with `C` the enclosing AABB diagonal.
pub fn diou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    let (wc, hc) = min_enclosing_aabb(&gt.corners(), &prd.corners());
    rotated_iou(gt, prd) - center_dist_sq(gt, prd) / (wc.sq() + hc.sq())
}

/// The CIoU aspect term `V` and its trade-off weight `α`.
///
/// `α` is taken as zero when `V = 0`, which also covers the `0/0` case of
/// identical boxes.
pub fn ciou_terms<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>, iou: S) -> (S, S) {
    let d = (gt.w() / gt.h()).atan() - (prd.w() / prd.h()).atan();
    let v = S::from_f64(4.0 / (PI * PI)) * d.sq();
    if v.re() == 0.0 {
        return (v, S::zero());
    }
    let alpha = v / (S::one() - iou + v);
    (v, alpha)
}

/// CIoU: DIoU minus the aspect-ratio penalty `αV`.
pub fn ciou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    let iou = rotated_iou(gt, prd);
    let (wc, hc) = min_enclosing_aabb(&gt.corners(), &prd.corners());
    let (v, alpha) = ciou_terms(gt, prd, iou);
    iou - center_dist_sq(gt, prd) / (wc.sq() + hc.sq()) - alpha * v
}

/// EIoU: DIoU minus separate width and height gaps over the enclosing
/// AABB extents.
pub fn eiou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>) -> S {
    let (wc, hc) = min_enclosing_aabb(&gt.corners(), &prd.corners());
    rotated_iou(gt, prd) - center_dist_sq(gt, prd) / (wc.sq() + hc.sq())
        - (prd.w() - gt.w()).sq() / wc.sq()
        - (prd.h() - gt.h()).sq() / hc.sq()
}

/// Sum of squared distances between correspondingly sorted corners.
pub fn corner_dist_sq_sum<S: Scalar>(a: &CornerQuad<S>, b: &CornerQuad<S>) -> S {
    let mut acc = S::zero();
    for (p, q) in a.points().iter().zip(b.points()) {
        acc += p.dist_sq(*q);
    }
    acc
}

/// The FPDIoU corner penalty `Σ dᵢ² / (4 (w² + h²))`.
pub fn fpd_penalty<S: Scalar>(a: &CornerQuad<S>, b: &CornerQuad<S>, dims: ImageDims) -> S {
    corner_dist_sq_sum(a, b) / S::from_f64(4.0 * dims.diag_sq())
}

/// FPDIoU: exact rotated IoU minus the sorted-corner distance penalty.
///
/// The corners of each box are sorted independently (ascending `x`, ties by
/// `y`). The correspondence flips when a box rotates through a sort tie, for
/// example when an edge crosses the vertical, so the penalty is
/// discontinuous there.
pub fn fpdiou<S: Scalar>(gt: &RotatedBox<S>, prd: &RotatedBox<S>, dims: ImageDims) -> S {
    rotated_iou(gt, prd) - fpd_penalty(&gt.corners(), &prd.corners(), dims)
}

/// FPDIoU on raw quads (need not be rectangles, must be convex).
pub fn fpdiou_quads<S: Scalar>(gt: &CornerQuad<S>, prd: &CornerQuad<S>, dims: ImageDims) -> S {
    quad_iou(gt, prd) - fpd_penalty(gt, prd, dims)
}

/// `1 - metric`.
#[inline]
pub fn loss_of<S: Scalar>(metric: S) -> S {
    S::one() - metric
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn bx(cx: f64, cy: f64, w: f64, h: f64, t: f64) -> RotatedBox {
        RotatedBox::new(cx, cy, w, h, t).unwrap()
    }

    fn sq() -> RotatedBox {
        bx(0.0, 0.0, 2.0, 2.0, 0.0)
    }

    #[test]
    fn rotated_iou_examples() {
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(rotated_iou(&a, &a), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rotated_iou(&sq(), &bx(1.0, 0.0, 2.0, 2.0, 0.0)), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rotated_iou(&sq(), &bx(0.0, 0.0, 2.0, 2.0, FRAC_PI_4)),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(rotated_iou(&sq(), &bx(10.0, 0.0, 2.0, 2.0, 0.0)), 0.0);
    }

    #[test]
    fn giou_examples() {
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(giou(&a, &a), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(giou(&sq(), &bx(1.0, 0.0, 2.0, 2.0, 0.0)), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(giou(&sq(), &bx(4.0, 0.0, 2.0, 2.0, 0.0)), -1.0 / 3.0, epsilon = 1e-12);
        // axis-aligned boxes: hull and AABB coincide
        assert_abs_diff_eq!(
            giou_with(&sq(), &bx(4.0, 0.0, 2.0, 2.0, 0.0), Enclosing::Aabb),
            -1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn diou_examples() {
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(diou(&a, &a), 1.0, epsilon = 1e-12);
        let b = bx(3.0, -2.0, 2.0, 7.0, -0.2);
        assert_eq!(diou(&a, &b), rotated_iou(&a, &b));
        assert_abs_diff_eq!(
            diou(&sq(), &bx(1.0, 0.0, 2.0, 2.0, 0.0)),
            1.0 / 3.0 - 1.0 / 13.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ciou_examples() {
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(ciou(&a, &a), 1.0, epsilon = 1e-12);

        let gt = bx(0.0, 0.0, 4.0, 2.0, 0.0);
        let prd = bx(0.0, 0.0, 2.0, 4.0, 0.0);
        let iou = 1.0 / 3.0; // 2x2 overlap over 8 + 8 - 4
        let v = 4.0 / (PI * PI) * (2f64.atan() - 0.5f64.atan()).powi(2);
        let alpha = v / (1.0 - iou + v);
        assert_abs_diff_eq!(rotated_iou(&gt, &prd), iou, epsilon = 1e-12);
        assert_abs_diff_eq!(ciou(&gt, &prd), iou - alpha * v, epsilon = 1e-12);

        let c = bx(1.0, 0.5, 8.0, 4.0, 0.3);
        assert_abs_diff_eq!(ciou(&gt, &c), diou(&gt, &c), epsilon = 1e-15);
    }

    #[test]
    fn eiou_examples() {
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(eiou(&a, &a), 1.0, epsilon = 1e-12);
        let gt = bx(0.0, 0.0, 4.0, 2.0, 0.0);
        let prd = bx(0.0, 0.0, 2.0, 2.0, 0.0);
        assert_abs_diff_eq!(eiou(&gt, &prd), diou(&gt, &prd) - 4.0 / 16.0, epsilon = 1e-12);
        let moved = bx(1.5, 0.5, 4.0, 2.0, 0.0);
        assert_abs_diff_eq!(eiou(&gt, &moved), diou(&gt, &moved), epsilon = 1e-15);
    }

    #[test]
    fn fpdiou_examples() {
        let dims = ImageDims::new(10.0, 10.0).unwrap();
        let a = bx(3.0, -2.0, 5.0, 1.5, 0.7);
        assert_abs_diff_eq!(fpdiou(&a, &a, dims), 1.0, epsilon = 1e-12);
        let v = fpdiou(&sq(), &bx(1.0, 0.0, 2.0, 2.0, 0.0), dims);
        assert_abs_diff_eq!(v, 1.0 / 3.0 - 4.0 / 800.0, epsilon = 1e-12);
        assert_abs_diff_eq!(loss_of(v), 1.0 - (1.0 / 3.0 - 0.005), epsilon = 1e-12);
        let r = bx(0.0, 0.0, 2.0, 2.0, std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(fpdiou(&sq(), &r, dims), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_of(1.0), 0.0);
        assert_eq!(loss_of(rotated_iou(&sq(), &bx(9.0, 9.0, 1.0, 1.0, 0.0))), 1.0);
    }

    #[test]
    fn quad_fpdiou_matches_box_version_on_rectangles() {
        let dims = ImageDims::new(50.0, 40.0).unwrap();
        let a = bx(10.0, 12.0, 8.0, 3.0, 0.4);
        let b = bx(12.0, 11.0, 6.0, 5.0, -0.9);
        assert_abs_diff_eq!(
            fpdiou_quads(&a.corners(), &b.corners(), dims),
            fpdiou(&a, &b, dims),
            epsilon = 1e-12
        );
    }
}

//! Average precision of scored detections against ground truth.
//!
//! Per category and IoU threshold, detections are visited in descending
//! score order. Each takes the ground-truth box of the same image and
//! category with the highest rotated IoU; it is a true positive if that IoU
//! reaches the threshold and the box is still unmatched, otherwise a false
//! positive. Ground truth marked difficult is left out of the recall count,
//! and detections whose best match is difficult are ignored. AP is the area
//! under the all-points interpolated precision envelope.

use std::collections::BTreeMap;

use crate::geom::RotatedBox;
use crate::iou::rotated_iou;

/// `0.5, 0.55, …, 0.95`.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtBox {
    pub image: String,
    pub category: String,
    pub bbox: RotatedBox,
    pub difficult: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredBox {
    pub image: String,
    pub category: String,
    pub bbox: RotatedBox,
    pub score: f64,
}

/// Precision–recall curve and AP for one category at one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ApCurve {
    pub threshold: f64,
    pub ap: f64,
    /// One entry per ranked detection (ignored ones excluded).
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryAp {
    pub category: String,
    pub n_gt: usize,
    pub n_pred: usize,
    /// Same order as [`EvalResult::thresholds`].
    pub curves: Vec<ApCurve>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub thresholds: Vec<f64>,
    /// Categories present in the ground truth, sorted by name.
    pub categories: Vec<CategoryAp>,
    /// Mean AP over categories, per threshold.
    pub map_per_threshold: Vec<f64>,
    /// Mean of `map_per_threshold`.
    pub map: f64,
    /// Set when there was no ground truth or no detection to evaluate.
    pub empty_warning: bool,
}

impl EvalResult {
    /// mAP at the threshold closest to `t`.
    pub fn map_at(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&x| (x - t).abs() < 1e-9)
            .map(|i| self.map_per_threshold[i])
    }
}

/// All-points interpolated AP from a ranked TP/FP sequence.
pub fn average_precision(tp: &[bool], n_gt: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let (mut ctp, mut cfp) = (0usize, 0usize);
    for &hit in tp {
        if hit {
            ctp += 1;
        } else {
            cfp += 1;
        }
        precision.push(ctp as f64 / (ctp + cfp) as f64);
        recall.push(if n_gt == 0 { 0.0 } else { ctp as f64 / n_gt as f64 });
    }
    if n_gt == 0 {
        return (0.0, precision, recall);
    }
    // envelope: running max of precision from the right
    let mut env = precision.clone();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&env) {
        if *r > prev_r {
            ap += (r - prev_r) * p;
            prev_r = *r;
        }
    }
    (ap, precision, recall)
}

fn category_curve(gts: &[&GtBox], dets: &[&ScoredBox], ious: &[Vec<f64>], threshold: f64) -> ApCurve {
    let n_gt = gts.iter().filter(|g| !g.difficult).count();
    let mut matched = vec![false; gts.len()];
    let mut tp = Vec::with_capacity(dets.len());
    for (d, row) in dets.iter().zip(ious) {
        let best = gts
            .iter()
            .enumerate()
            .filter(|(_, g)| g.image == d.image)
            .map(|(j, _)| (j, row[j]))
            .fold(None, |acc: Option<(usize, f64)>, (j, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((j, v)),
            });
        match best {
            Some((j, v)) if v >= threshold => {
                if gts[j].difficult {
                    continue;
                }
                tp.push(!matched[j]);
                matched[j] = true;
            }
            _ => tp.push(false),
        }
    }
    let (ap, precision, recall) = average_precision(&tp, n_gt);
    ApCurve {
        threshold,
        ap,
        precision,
        recall,
    }
}

/// Evaluate detections at each threshold, matching by rotated IoU.
pub fn evaluate_ap(gts: &[GtBox], prds: &[ScoredBox], thresholds: &[f64]) -> EvalResult {
    let mut by_cat: BTreeMap<&str, (Vec<&GtBox>, Vec<&ScoredBox>)> = BTreeMap::new();
    for g in gts {
        by_cat.entry(&g.category).or_default().0.push(g);
    }
    for p in prds {
        if let Some(e) = by_cat.get_mut(p.category.as_str()) {
            e.1.push(p);
        }
    }
    let mut categories = Vec::with_capacity(by_cat.len());
    for (name, (cat_gts, mut cat_dets)) in by_cat {
        // stable: ties keep input order
        cat_dets.sort_by(|a, b| b.score.total_cmp(&a.score));
        let ious: Vec<Vec<f64>> = cat_dets
            .iter()
            .map(|d| {
                cat_gts
                    .iter()
                    .map(|g| if g.image == d.image { rotated_iou(&g.bbox, &d.bbox) } else { 0.0 })
                    .collect()
            })
            .collect();
        let curves = thresholds
            .iter()
            .map(|&t| category_curve(&cat_gts, &cat_dets, &ious, t))
            .collect();
        categories.push(CategoryAp {
            category: name.to_string(),
            n_gt: cat_gts.iter().filter(|g| !g.difficult).count(),
            n_pred: cat_dets.len(),
            curves,
        });
    }
    let map_per_threshold: Vec<f64> = (0..thresholds.len())
        .map(|i| {
            if categories.is_empty() {
                0.0
            } else {
                categories.iter().map(|c| c.curves[i].ap).sum::<f64>() / categories.len() as f64
            }
        })
        .collect();
    let map = if thresholds.is_empty() {
        0.0
    } else {
        map_per_threshold.iter().sum::<f64>() / thresholds.len() as f64
    };
    EvalResult {
        thresholds: thresholds.to_vec(),
        empty_warning: gts.is_empty() || prds.is_empty(),
        categories,
        map_per_threshold,
        map,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(cat: &str, b: RotatedBox) -> GtBox {
        GtBox {
            image: "img".into(),
            category: cat.into(),
            bbox: b,
            difficult: false,
        }
    }

    fn det(cat: &str, b: RotatedBox, score: f64) -> ScoredBox {
        ScoredBox {
            image: "img".into(),
            category: cat.into(),
            bbox: b,
            score,
        }
    }

    fn bx(cx: f64, cy: f64) -> RotatedBox {
        RotatedBox::new(cx, cy, 4.0, 2.0, 0.3).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let gts = vec![gt("plane", bx(0.0, 0.0)), gt("ship", bx(10.0, 0.0)), gt("plane", bx(20.0, 5.0))];
        let prds: Vec<_> = gts.iter().map(|g| det(&g.category, g.bbox, 1.0)).collect();
        let r = evaluate_ap(&gts, &prds, &coco_thresholds());
        assert_eq!(r.map_at(0.5), Some(1.0));
        assert_eq!(r.map_at(0.75), Some(1.0));
        assert_eq!(r.map, 1.0);
        assert!(!r.empty_warning);
    }

    #[test]
    fn no_predictions() {
        let gts = vec![gt("plane", bx(0.0, 0.0))];
        let r = evaluate_ap(&gts, &[], &[0.5]);
        assert_eq!(r.map, 0.0);
        assert!(r.empty_warning);
        let r = evaluate_ap(&[], &[], &[0.5]);
        assert_eq!(r.map, 0.0);
        assert!(r.empty_warning);
    }

    #[test]
    fn duplicate_prediction_is_false_positive() {
        let gts = vec![gt("plane", bx(0.0, 0.0))];
        let prds = vec![det("plane", bx(0.0, 0.0), 0.8), det("plane", bx(0.0, 0.0), 0.9)];
        let r = evaluate_ap(&gts, &prds, &[0.5]);
        let c = &r.categories[0].curves[0];
        assert_eq!(c.precision, vec![1.0, 0.5]);
        assert_eq!(c.recall, vec![1.0, 1.0]);
        assert_eq!(c.ap, 1.0);
    }

    #[test]
    fn hand_walked_curve() {
        // ranks: TP, FP, TP over 2 GT -> envelope 1.0 to r=0.5, 2/3 to r=1
        let (ap, p, r) = average_precision(&[true, false, true], 2);
        assert_eq!(p, vec![1.0, 0.5, 2.0 / 3.0]);
        assert_eq!(r, vec![0.5, 0.5, 1.0]);
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn difficult_gt_is_neutral() {
        let mut hard = gt("plane", bx(30.0, 0.0));
        hard.difficult = true;
        let gts = vec![gt("plane", bx(0.0, 0.0)), hard];
        let prds = vec![det("plane", bx(30.0, 0.0), 0.9), det("plane", bx(0.0, 0.0), 0.8)];
        let r = evaluate_ap(&gts, &prds, &[0.5]);
        assert_eq!(r.categories[0].n_gt, 1);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn images_do_not_cross_match() {
        let gts = vec![gt("plane", bx(0.0, 0.0))];
        let mut p = det("plane", bx(0.0, 0.0), 1.0);
        p.image = "other".into();
        assert_eq!(evaluate_ap(&gts, &[p], &[0.5]).map, 0.0);
    }
}

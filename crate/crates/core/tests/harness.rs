use std::io::Cursor;

use rotbox::harness::dota::{parse_detections, parse_dota, rectify};
use rotbox::harness::eval::{evaluate_ap, GtBox, ScoredBox};
use rotbox::harness::report::{emit_csv, write_csv, PairValues};
use rotbox::harness::{coco_thresholds, simulate_regression, DotaError, SimConfig};
use rotbox::MetricKind;

const GT: &str = "\
imagesource:GoogleEarth
gsd:0.146
10 10 30 10 30 20 10 20 plane 0
50 50 70 50 70 70 50 70 ship 1
100 100 120 100 130 120 100 120 plane 0
";

#[test]
fn dota_headers_and_quads() {
    let anns = parse_dota(Cursor::new(GT)).unwrap();
    assert_eq!(anns.len(), 3);
    assert_eq!(anns[0].line, 3);
    assert_eq!(anns[1].category, "ship");
    assert_eq!(anns[1].difficulty, 1);
    let r = rectify(&anns);
    assert_eq!(r.boxes.len(), 2);
    assert_eq!(r.rejected, vec![2]);
    let b = r.boxes[0].1;
    assert!((b.cx() - 20.0).abs() < 1e-12 && (b.cy() - 15.0).abs() < 1e-12);
    assert!((b.w() - 20.0).abs() < 1e-12 && (b.h() - 10.0).abs() < 1e-12);
}

#[test]
fn dota_reports_position() {
    let err = parse_dota(Cursor::new("1 2 3 4 5 6 7 eight plane 0\n")).unwrap_err();
    match err {
        DotaError::Parse { line, column, .. } => assert_eq!((line, column), (1, 15)),
        e => panic!("{e}"),
    }
    let err = parse_detections(Cursor::new("0 0 1 0 1 1 0 1 plane 0\n")).unwrap_err();
    assert!(matches!(err, DotaError::Parse { line: 1, .. }));
}

#[test]
fn detections_carry_scores() {
    let d = parse_detections(Cursor::new("0 0 4 0 4 2 0 2 car 0 0.75\n")).unwrap();
    assert_eq!(d[0].score, 0.75);
    assert_eq!(d[0].annotation.category, "car");
}

#[test]
fn eval_on_ground_truth_is_perfect() {
    let anns = parse_dota(Cursor::new(GT)).unwrap();
    let r = rectify(&anns);
    let gts: Vec<GtBox> = r
        .boxes
        .iter()
        .map(|&(i, bbox)| GtBox {
            image: "P0001".into(),
            category: anns[i].category.clone(),
            bbox,
            difficult: false,
        })
        .collect();
    let prds: Vec<ScoredBox> = gts
        .iter()
        .map(|g| ScoredBox {
            image: g.image.clone(),
            category: g.category.clone(),
            bbox: g.bbox,
            score: 1.0,
        })
        .collect();
    let res = evaluate_ap(&gts, &prds, &coco_thresholds());
    assert!(res.map_per_threshold.iter().all(|&m| m == 1.0));
    assert_eq!(res.map, 1.0);
    assert!(!res.empty_warning);
}

#[test]
fn small_steps_descend() {
    let cfg = SimConfig {
        n_trials: 40,
        lr: 0.1,
        lr_theta: 0.004,
        max_iters: 300,
        seed: 3,
        ..SimConfig::default()
    };
    let trace = simulate_regression(&cfg).unwrap();
    let (mut steps, mut up) = (0usize, 0usize);
    for t in &trace.trials {
        for w in t.records.windows(2) {
            if w[0].jittered || w[1].jittered {
                continue;
            }
            steps += 1;
            if w[1].loss > w[0].loss {
                up += 1;
            }
        }
    }
    assert!(steps > 10_000);
    assert!((up as f64) <= 0.01 * steps as f64, "{up} of {steps} steps increased");
}

#[test]
fn rotated_iou_never_leaves_plateau() {
    let cfg = SimConfig {
        n_trials: 20,
        loss: MetricKind::RotatedIou,
        max_iters: 50,
        ..SimConfig::default()
    };
    let s = simulate_regression(&cfg).unwrap().summary();
    assert_eq!(s.n_improved, 0);
    assert_eq!(s.n_reached, 0);
}

#[test]
fn csv_bytes_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig {
        n_trials: 4,
        max_iters: 30,
        seed: 11,
        ..SimConfig::default()
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&simulate_regression(&cfg).unwrap(), &a).unwrap();
    emit_csv(&simulate_regression(&cfg).unwrap(), &b).unwrap();
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 30);
    assert!(text.starts_with("trial,iter,loss,rotated_iou,corner_rms,jittered\r\n"));
}

#[test]
fn float_cells_round_trip() {
    let vals = vec![0.1, 1.0 / 3.0, 1e-300, f64::NAN];
    let mut buf = Vec::new();
    write_csv(&PairValues(vals.clone()), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cells: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    for (c, v) in cells.iter().zip(&vals) {
        let back: f64 = c.parse().unwrap();
        assert!(back == *v || (back.is_nan() && v.is_nan()), "{c}");
    }
}

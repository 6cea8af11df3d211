use std::f64::consts::PI;

use proptest::prelude::*;
use rotbox::geom::{
    box_from_corners, convex_hull, corners_from_box, intersect_convex, polygon_area, sort_corners, Point2, RotatedBox,
    EPS_GEOM,
};
use rotbox::oracle::mc_intersection_area;

fn any_box() -> impl Strategy<Value = RotatedBox> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.5..30.0f64, 0.5..30.0f64, -PI..PI)
        .prop_map(|(cx, cy, w, h, t)| RotatedBox::new(cx, cy, w, h, t).unwrap())
}

fn near_pair() -> impl Strategy<Value = (RotatedBox, RotatedBox)> {
    (any_box(), -10.0..10.0f64, -10.0..10.0f64, 0.5..30.0f64, 0.5..30.0f64, -PI..PI).prop_map(|(a, dx, dy, w, h, t)| {
        let b = RotatedBox::new(a.cx() + dx, a.cy() + dy, w, h, t).unwrap();
        (a, b)
    })
}

fn point() -> impl Strategy<Value = Point2> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn corner_round_trip(b in any_box()) {
        let q = corners_from_box(&b);
        let back = box_from_corners(&q).unwrap();
        let q2 = back.corners();
        for (p, r) in q.points().iter().zip(q2.points()) {
            prop_assert!(p.dist_sq(*r).sqrt() <= EPS_GEOM * 100.0, "{b:?} -> {back:?}");
        }
        prop_assert!((back.area() - b.area()).abs() <= 1e-9 * b.area());
        prop_assert!(back.w() >= back.h());
        prop_assert!((-PI / 2.0..PI / 2.0).contains(&back.theta()));
    }
}

proptest! {
    #[test]
    fn sort_is_idempotent_and_permutation_invariant(pts in prop::array::uniform4(point())) {
        let q = sort_corners(pts);
        prop_assert_eq!(sort_corners(*q.points()), q);
        for code in 0..256usize {
            let perm = [0, 1, 2, 3].map(|k| (code >> (2 * k)) & 3);
            if (0..4).all(|i| perm.contains(&i)) {
                prop_assert_eq!(sort_corners(perm.map(|i| pts[i])), q);
            }
        }
        let p = q.points();
        for w in p.windows(2) {
            prop_assert!(w[0].x < w[1].x + EPS_GEOM);
        }
    }

    #[test]
    fn hull_contains_inputs(pts in prop::collection::vec(point(), 1..24)) {
        let hull = convex_hull(&pts);
        if hull.len() >= 3 {
            for p in &pts {
                prop_assert!(hull.signed_distance(*p) >= -EPS_GEOM, "{p:?}");
            }
        } else {
            prop_assert_eq!(polygon_area(&hull), 0.0);
        }
    }

    #[test]
    fn intersection_bounded_by_inputs((a, b) in near_pair()) {
        let i = polygon_area(&intersect_convex(&a.polygon(), &b.polygon()));
        prop_assert!(i >= 0.0);
        prop_assert!(i <= a.area().min(b.area()) * (1.0 + 1e-12));
        let j = polygon_area(&intersect_convex(&b.polygon(), &a.polygon()));
        prop_assert!((i - j).abs() <= 1e-9 * (1.0 + i));
    }

    #[test]
    fn contained_box_intersection_is_its_area(a in any_box(), f in 0.05..0.49f64, t in -PI..PI, ux in -1.0..1.0f64, uy in -1.0..1.0f64) {
        // any rotation of the square fits in its circumcircle, kept inside
        // the inscribed circle of `a`
        let m = a.w().min(a.h());
        let side = f * m;
        let slack = (m / 2.0 - side / 2.0 * 2f64.sqrt()).max(0.0) * 0.99;
        let (dx, dy) = (ux * slack / 2f64.sqrt(), uy * slack / 2f64.sqrt());
        let inner = RotatedBox::new(a.cx() + dx, a.cy() + dy, side, side, t).unwrap();
        let i = polygon_area(&intersect_convex(&a.polygon(), &inner.polygon()));
        prop_assert!((i - inner.area()).abs() <= 1e-9 * inner.area().max(1.0));
    }
}

fn aabb_overlap(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let ext = |r: &RotatedBox| {
        r.ccw_vertices().iter().fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |(x0, y0, x1, y1), p| {
            (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y))
        })
    };
    let (a, b) = (ext(a), ext(b));
    (a.2.min(b.2) - a.0.max(b.0)).max(0.0) * (a.3.min(b.3) - a.1.max(b.1)).max(0.0)
}

/// 10³ seeded pairs against a Monte Carlo estimate at the minimum sample
/// count. Slivers can draw zero hits, which makes the sample σ zero, so the
/// tolerance uses the larger of the sample σ and the binomial σ implied by
/// the exact area.
#[test]
fn clipping_agrees_with_monte_carlo() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000u64;
    for i in 0..1000u64 {
        let a = RotatedBox::new(0.0, 0.0, rng.random_range(1.0..8.0), rng.random_range(1.0..8.0), rng.random_range(-PI..PI)).unwrap();
        let b = RotatedBox::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(1.0..8.0),
            rng.random_range(1.0..8.0),
            rng.random_range(-PI..PI),
        )
        .unwrap();
        let exact = polygon_area(&intersect_convex(&a.polygon(), &b.polygon()));
        let mc = mc_intersection_area(&a, &b, n, 1000 + i).unwrap();
        let region = aabb_overlap(&a, &b);
        let null_sigma = if region > 0.0 {
            let p = (exact / region).clamp(0.0, 1.0);
            region * (p * (1.0 - p) / n as f64).sqrt()
        } else {
            0.0
        };
        let tol = 4.0 * mc.std_err.max(null_sigma) + 1e-12;
        assert!((exact - mc.mean).abs() <= tol, "pair {i}: exact {exact} mc {mc:?}");
    }
}

mod common;

use approx::assert_relative_eq;
use hybrid_cst::geometry::{
    build_beam_layout, clip_params_polygon, ros_polygon, segment_polygon_chord, segment_rect_chord, ConvexPolygon,
    Point, Rect,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Point> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn rect() -> impl Strategy<Value = Rect> {
    (-3.0..3.0f64, -3.0..3.0f64, 0.01..3.0f64, 0.01..3.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn chord_is_bounded_by_segment_and_diagonal(a in point(), b in point(), r in rect()) {
        let c = segment_rect_chord(a, b, &r);
        prop_assert!(c >= 0.0);
        prop_assert!(c <= a.distance(b) + 1e-12);
        prop_assert!(c <= r.diagonal() + 1e-12);
    }

    #[test]
    fn chord_is_symmetric_in_endpoints(a in point(), b in point(), r in rect()) {
        prop_assert!((segment_rect_chord(a, b, &r) - segment_rect_chord(b, a, &r)).abs() <= 1e-12);
    }

    #[test]
    fn chord_is_additive_over_splits(a in point(), b in point(), r in rect(), s in 0.01..0.99f64) {
        let xs = r.xmin + s * r.width();
        let left = Rect::new(r.xmin, r.ymin, xs, r.ymax);
        let right = Rect::new(xs, r.ymin, r.xmax, r.ymax);
        let whole = segment_rect_chord(a, b, &r);
        let parts = segment_rect_chord(a, b, &left) + segment_rect_chord(a, b, &right);
        prop_assert!((whole - parts).abs() <= 1e-9);
    }

    #[test]
    fn chord_is_invariant_under_quarter_turns(a in point(), b in point(), r in rect(), turns in 0..4u32) {
        let rot = |p: Point| (0..turns).fold(p, |q, _| Point::new(-q.y, q.x));
        let (c0, c1) = (rot(Point::new(r.xmin, r.ymin)), rot(Point::new(r.xmax, r.ymax)));
        let rr = Rect::new(c0.x.min(c1.x), c0.y.min(c1.y), c0.x.max(c1.x), c0.y.max(c1.y));
        let before = segment_rect_chord(a, b, &r);
        let after = segment_rect_chord(rot(a), rot(b), &rr);
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn chord_is_invariant_under_rotation_about_any_point(
        a in point(), b in point(), r in rect(), angle in 0.0..6.3f64, pivot in point()
    ) {
        let rot = |p: Point| pivot + (p - pivot).rotate(angle);
        let poly = ConvexPolygon::new(r.corners().to_vec()).unwrap();
        let rotated = ConvexPolygon::new(r.corners().iter().map(|&p| rot(p)).collect()).unwrap();
        let before = segment_rect_chord(a, b, &r);
        prop_assert!((before - segment_polygon_chord(a, b, &poly)).abs() <= 1e-9);
        prop_assert!((before - segment_polygon_chord(rot(a), rot(b), &rotated)).abs() <= 1e-9);
    }

    #[test]
    fn segment_inside_has_full_length(r in rect(), s in 0.0..1.0f64, t in 0.0..1.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let a = Point::new(r.xmin + s * r.width(), r.ymin + t * r.height());
        let b = Point::new(r.xmin + u * r.width(), r.ymin + v * r.height());
        prop_assert!((segment_rect_chord(a, b, &r) - a.distance(b)).abs() <= 1e-12);
    }
}

#[test]
fn polygon_chord_matches_sampling() {
    let (_, oct) = common::octagon_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let a = Point::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
        let b = Point::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
        let n = 200_000;
        let inside = (0..n)
            .filter(|i| {
                let t = (*i as f64 + 0.5) / n as f64;
                oct.contains(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)), 0.0)
            })
            .count();
        let sampled = inside as f64 / n as f64 * a.distance(b);
        assert!((segment_polygon_chord(a, b, &oct) - sampled).abs() <= 2.0 * a.distance(b) / n as f64);
    }
}

#[test]
fn octagon_area_matches_closed_form_and_monte_carlo() {
    let (_, oct) = common::octagon_layout();
    let half = 18.4f64;
    assert_relative_eq!(oct.area(), 8.0 * half * half * (std::f64::consts::PI / 8.0).tan(), max_relative = 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 400_000;
    let hits = (0..n)
        .filter(|_| oct.contains(Point::new(rng.random_range(-half..half), rng.random_range(-half..half)), 0.0))
        .count();
    let mc = hits as f64 / n as f64 * (2.0 * half).powi(2);
    assert_relative_eq!(mc, oct.area(), max_relative = 5e-3);
}

#[test]
fn octagon_has_dihedral_symmetry() {
    let (_, oct) = common::octagon_layout();
    let v = oct.vertices();
    assert_eq!(v.len(), 8);
    let c = oct.centroid();
    assert!(c.norm() < 1e-12);
    for k in 0..8 {
        let turn = k as f64 * std::f64::consts::FRAC_PI_4;
        for p in v {
            let q = p.rotate(turn);
            assert!(v.iter().any(|w| w.distance(q) < 1e-9));
            let mirrored = Point::new(q.x, -q.y);
            assert!(v.iter().any(|w| w.distance(mirrored) < 1e-9));
        }
    }
}

#[test]
fn every_beam_spans_the_sensing_region() {
    let layout = build_beam_layout(4, 8, 1.8, 36.8).unwrap();
    let ros = ros_polygon(&layout).unwrap();
    assert_eq!(layout.len(), 32);
    for beam in &layout.beams {
        assert_relative_eq!(beam.length(), 36.8, max_relative = 1e-12);
        assert_relative_eq!(segment_polygon_chord(beam.start, beam.end, &ros), 36.8, max_relative = 1e-9);
        let (t0, t1) = clip_params_polygon(beam.start, beam.end, &ros).unwrap();
        assert!(t0.abs() < 1e-9 && (t1 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn fan_wider_than_distance_is_rejected() {
    assert!(build_beam_layout(4, 8, 6.0, 36.8).is_err());
    assert!(build_beam_layout(4, 0, 1.8, 36.8).is_err());
    assert!(build_beam_layout(4, 8, -1.0, 36.8).is_err());
}

use std::sync::Arc;

use lambda_convex::body::{make_lens_body, reference_closed_forms, ClosedForm, RadialBody};
use lambda_convex::enclosure::LensSpec;
use lambda_convex::grid::SphereGrid;
use lambda_convex::spaceform::{distance, killing_flow, killing_pushforward, Point, SpaceformKind, TangentVector};
use lambda_convex::linalg::Vector;
use proptest::prelude::*;

mod common;
use common::{kind_strategy, offset_ball};

const KINDS: [SpaceformKind; 3] = SpaceformKind::ALL;

fn ball_error(kind: SpaceformKind, grid: Arc<SphereGrid<f64>>, r: f64, delta: f64) -> (f64, f64) {
    let n = grid.dimension();
    let m = offset_ball(kind, grid, r, delta).measure();
    let exact = reference_closed_forms(ClosedForm::Ball { kind, n, radius: r }).unwrap();
    ((m.area / exact.area - 1.0).abs(), (m.volume / exact.volume - 1.0).abs())
}

#[test]
fn offset_balls_match_closed_forms() {
    for kind in KINDS {
        let (a, v) = ball_error(kind, Arc::new(SphereGrid::circle(512).unwrap()), 0.7, 0.25);
        assert!(a < 1e-8 && v < 1e-8, "{kind:?} n=1: {a} {v}");
        let (a, v) = ball_error(kind, Arc::new(SphereGrid::icosphere(5).unwrap()), 0.7, 0.25);
        assert!(a < 1e-3 && v < 1e-3, "{kind:?} n=2: {a} {v}");
    }
}

/// Observed order `log2(e_coarse / e_fine)` per refinement, skipping pairs
/// where the fine error is at the rounding floor.
fn orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors
        .windows(2)
        .filter(|w| w[1] > 1e-12)
        .map(|w| (w[0] / w[1]).ln() / ratio.ln())
        .collect()
}

#[test]
fn measure_converges_under_refinement() {
    for kind in KINDS {
        let errs: Vec<(f64, f64)> =
            [12, 24, 48].iter().map(|&n| ball_error(kind, Arc::new(SphereGrid::circle(n).unwrap()), 0.6, 0.45)).collect();
        let area: Vec<f64> = errs.iter().map(|e| e.0).collect();
        let vol: Vec<f64> = errs.iter().map(|e| e.1).collect();
        for o in orders(&area, 2.0).into_iter().chain(orders(&vol, 2.0)) {
            assert!(o >= 2.0, "{kind:?} n=1 order {o}");
        }
        let errs: Vec<(f64, f64)> = (3..=6)
            .map(|l| ball_error(kind, Arc::new(SphereGrid::icosphere(l).unwrap()), 0.6, 0.3))
            .collect();
        let area: Vec<f64> = errs.iter().map(|e| e.0).collect();
        let vol: Vec<f64> = errs.iter().map(|e| e.1).collect();
        for o in orders(&area, 2.0).into_iter().chain(orders(&vol, 2.0)) {
            assert!(o >= 1.8, "{kind:?} n=2 order {o}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lens_body_lies_in_both_balls(kind in kind_strategy(), n in 1usize..=2, l in 1.1f64..3.0, s in 0.05f64..1.95) {
        let lens = LensSpec::symmetric(kind, l, s * radius(kind, l), n + 1).unwrap();
        let grid = Arc::new(if n == 1 { SphereGrid::circle(256).unwrap() } else { SphereGrid::icosphere(3).unwrap() });
        let body = make_lens_body(&lens, grid).unwrap();
        let r = lens.radius();
        for x in body.boundary_points() {
            prop_assert!(distance(&x, &lens.p).unwrap() <= r + 1e-10);
            prop_assert!(distance(&x, &lens.q).unwrap() <= r + 1e-10);
        }
    }

    #[test]
    fn measure_is_isometry_invariant(
        kind in kind_strategy(),
        n in 1usize..=2,
        c in prop::collection::vec(-1.0f64..1.0, 3),
        t in 0.05f64..1.0,
        amp in 0.0f64..0.1,
    ) {
        let grid = Arc::new(if n == 1 { SphereGrid::circle(128).unwrap() } else { SphereGrid::icosphere(3).unwrap() });
        let o = Point::origin(kind, n + 1);
        let body = RadialBody::from_fn(kind, o, grid.clone(), |d| 0.6 + amp * d[0] * d[d.len() - 1]).unwrap();
        let mut v = Vector::zeros(o.coords.len());
        for (e, x) in o.frame().iter().zip(&c) {
            v = v.axpy(*x, e);
        }
        let dir = TangentVector::new(o, v);
        prop_assume!(dir.is_ok() && kind.inner(&v, &v) > 1e-4);
        let dir = dir.unwrap();
        let center = killing_flow(&o, &dir, t).unwrap();
        let frame = body
            .frame()
            .iter()
            .map(|f| killing_pushforward(&TangentVector { base: o, vec: *f }, &dir, t).unwrap().vec)
            .collect();
        let moved = RadialBody::with_frame(kind, center, frame, grid, body.rho().to_vec()).unwrap();
        let (a, b) = (body.measure(), moved.measure());
        prop_assert!((a.area - b.area).abs() <= 1e-12 * a.area.max(1.0));
        prop_assert!((a.volume - b.volume).abs() <= 1e-12 * a.volume.max(1.0));
    }
}

fn radius(kind: SpaceformKind, l: f64) -> f64 {
    lambda_convex::spaceform::radius_of_lambda(kind, l).unwrap().radius.unwrap()
}

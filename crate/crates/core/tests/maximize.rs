use std::sync::Arc;

use lambda_convex::body::{make_ball, make_ellipse, make_perturbed_ball, reference_closed_forms, ClosedForm};
use lambda_convex::error::GeomError;
use lambda_convex::grid::SphereGrid;
use lambda_convex::spaceform::{radius_of_lambda, Point, SpaceformKind};
use lambda_convex::variation::*;

fn circle() -> Arc<SphereGrid<f64>> {
    Arc::new(SphereGrid::circle(512).unwrap())
}

/// Perimeter of the lens of curvature `lambda` enclosing `area`, by
/// bisection on the center distance.
fn matched_lens_perimeter(lambda: f64, area: f64) -> f64 {
    let two_r = 2.0 / lambda;
    let (mut lo, mut hi) = (0.0, two_r);
    for _ in 0..200 {
        let d = 0.5 * (lo + hi);
        let r = reference_closed_forms(ClosedForm::Lens2d { lambda, d }).unwrap();
        if r.volume > area {
            lo = d;
        } else {
            hi = d;
        }
    }
    reference_closed_forms(ClosedForm::Lens2d { lambda, d: 0.5 * (lo + hi) }).unwrap().area
}

#[test]
fn ellipse_ascends_to_the_lens() {
    let e = make_ellipse(1.0, 0.8, circle()).unwrap();
    let seed = e.measure();
    let cfg = MaximizeConfig::for_dimension(1);
    let out = maximize_area(&e, 0.8, &cfg).unwrap();
    let fin = out.body.measure();
    assert!(out.trajectory.accepted_steps() >= 10);
    assert!(fin.area > seed.area);
    assert!((fin.volume / seed.volume - 1.0).abs() <= 1e-8);
    let lens = matched_lens_perimeter(0.8, seed.volume);
    assert!(fin.area <= lens + 1e-2, "{} vs lens {}", fin.area, lens);
    assert!((fin.area - lens).abs() < 1e-3);
    assert!(out.excess.fraction_within(5.0 * cfg.kappa_tol) >= 0.95);
    for w in out.trajectory.entries.windows(2) {
        assert!(w[1].measure.area > w[0].measure.area);
    }
}

#[test]
fn extremal_ball_takes_no_step() {
    for (kind, lambda) in [(SpaceformKind::Euclidean, 1.25), (SpaceformKind::Spherical, 1.0), (SpaceformKind::Hyperbolic, 2.0)] {
        let r = radius_of_lambda(kind, lambda).unwrap().require_radius().unwrap();
        let b = make_ball(kind, r, circle(), Point::origin(kind, 2)).unwrap();
        let out = maximize_area(&b, lambda, &MaximizeConfig::for_dimension(1)).unwrap();
        assert_eq!(out.trajectory.accepted_steps(), 0);
        assert!(matches!(out.trajectory.stopped, Some(GeomError::TrivialBody(_))), "{kind:?}");
        assert_eq!(out.body.rho(), b.rho());
    }
}

#[test]
fn spherical_hull_ascent_keeps_volume() {
    let kind = SpaceformKind::Spherical;
    let b = make_perturbed_ball(kind, 0.5, circle(), Point::origin(kind, 2), 0.05, 2).unwrap();
    let out = maximize_area(&b, 0.5, &MaximizeConfig::for_dimension(1)).unwrap();
    let (s, f) = (b.measure(), out.body.measure());
    assert!(out.trajectory.accepted_steps() >= 10);
    assert!(f.area > s.area);
    assert!((f.volume / s.volume - 1.0).abs() <= 1e-8);
    assert!(out.trajectory.entries.iter().all(|e| e.min_kappa >= 0.5 - 1e-6));
}

#[test]
fn hyperbolic_bump_ascent_below_horocycle_curvature() {
    let kind = SpaceformKind::Hyperbolic;
    let b = make_perturbed_ball(kind, 0.5, circle(), Point::origin(kind, 2), 0.05, 2).unwrap();
    let mut cfg = MaximizeConfig::for_dimension(1);
    cfg.method = MaximizeMethod::Bumps;
    cfg.initial_step = 1e-4;
    cfg.max_iterations = 12;
    let out = maximize_area(&b, 0.8, &cfg).unwrap();
    assert_eq!(out.trajectory.accepted_steps(), 12);
    let (s, f) = (b.measure(), out.body.measure());
    assert!(f.area > s.area);
    assert!((f.volume / s.volume - 1.0).abs() <= 1e-8);
}

#[test]
fn non_convex_seed_is_rejected() {
    let e = make_ellipse(1.0, 0.8, circle()).unwrap();
    assert!(matches!(maximize_area(&e, 1.0, &MaximizeConfig::for_dimension(1)), Err(GeomError::Domain(_))));
}

use std::sync::Arc;

use lambda_convex::body::{make_ball, make_ellipse, make_lens_body, make_perturbed_ball};
use lambda_convex::curvature::{lambda_convexity_check, strict_point};
use lambda_convex::enclosure::*;
use lambda_convex::error::GeomError;
use lambda_convex::grid::SphereGrid;
use lambda_convex::spaceform::{distance, exp_map, radius_of_lambda, Point, SpaceformKind, TangentVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Farthest point of the lens from `c`, found by scanning a fine polar grid
/// about `c` for points inside both balls.
fn polar_scan_rho(lens: &LensSpec<f64>, c: &Point<f64>) -> f64 {
    let r = lens.radius();
    let frame = c.frame();
    let mut best: f64 = 0.0;
    for k in 0..2000 {
        let phi = std::f64::consts::TAU * k as f64 / 2000.0;
        let v = frame[0] * phi.cos() + frame[1] * phi.sin();
        // bisection for the exit along the ray
        let (mut lo, mut hi) = (0.0, 2.0 * r);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let x = exp_map(&TangentVector::new(*c, v * mid).unwrap()).unwrap();
            if lens.contains(&x, 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(lo);
    }
    best
}

#[test]
fn euclidean_anchor() {
    let lens = LensSpec::symmetric(SpaceformKind::Euclidean, 1.0, 1.0, 2).unwrap();
    let e = enclosing_ball(&lens).unwrap();
    let s3 = 3f64.sqrt() / 2.0;
    assert!((e.rho - s3).abs() < 1e-6);
    assert!((e.margin - (1.0 - s3)).abs() < 1e-6);
    let oracle = circumradius_bruteforce(&lens, 200);
    assert!(oracle <= s3 + 1e-6);
    assert!(e.rho >= oracle - 1e-9);
    for d in [0.1, 0.5, 1.0, 1.5, 1.9] {
        let lens = LensSpec::symmetric(SpaceformKind::Euclidean, 1.0, d, 2).unwrap();
        let closed = (1.0 - d / 2.0f64).max((1.0 - d * d / 4.0f64).sqrt());
        assert!((enclosing_ball(&lens).unwrap().rho - closed).abs() < 1e-9, "d = {d}");
    }
}

#[test]
fn enclosure_matches_polar_scan() {
    for (kind, lambda, d) in [
        (SpaceformKind::Spherical, 1.0, 0.5),
        (SpaceformKind::Hyperbolic, 2.0, 0.4),
        (SpaceformKind::Euclidean, 0.8, 2.0),
    ] {
        let lens = LensSpec::symmetric(kind, lambda, d, 2).unwrap();
        let e = enclosing_ball(&lens).unwrap();
        let scan = polar_scan_rho(&lens, &e.c);
        assert!((e.rho - scan).abs() < 1e-6, "{kind:?}: {} vs {scan}", e.rho);
        assert!(e.rho < lens.radius());
    }
}

#[test]
fn spherical_anchor_below_quarter_pi() {
    let lens = LensSpec::symmetric(SpaceformKind::Spherical, 1.0, 0.5, 2).unwrap();
    let e = enclosing_ball(&lens).unwrap();
    assert!(e.rho < std::f64::consts::FRAC_PI_4);
    assert!(circumradius_bruteforce(&lens, 100) <= e.rho + 1e-9);
}

#[test]
fn coincident_limit_and_thin_lenses() {
    for kind in [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic] {
        let lambda = 1.5;
        let r = radius_of_lambda(kind, lambda).unwrap().require_radius().unwrap();
        let near: LensSpec<f64> = LensSpec::symmetric(kind, lambda, 1e-4 * r, 3).unwrap();
        let e = enclosing_ball(&near).unwrap();
        assert!(e.margin > 0.0 && e.margin < 1e-4 * r, "{kind:?} {}", e.margin);
        assert!((circumradius_bruteforce(&near, 50) - r).abs() < 1e-4 * r);
        let thin = LensSpec::symmetric(kind, lambda, 1.999 * r, 3).unwrap();
        let e = enclosing_ball(&thin).unwrap();
        assert!(e.margin > 0.5 * r);
        let oracle = circumradius_bruteforce(&thin, 50);
        assert!(oracle <= e.rho + 1e-12);
    }
}

#[test]
fn degenerate_lenses_are_rejected() {
    let o = Point::origin(SpaceformKind::Euclidean, 2);
    assert_eq!(LensSpec::new(SpaceformKind::Euclidean, 1.0, o, o).unwrap_err(), GeomError::DegenerateLens);
    assert!(LensSpec::symmetric(SpaceformKind::Euclidean, 1.0, 2.0, 2).is_err());
    assert!(LensSpec::symmetric(SpaceformKind::Hyperbolic, 1.0, 0.5, 2).is_err());
}

fn random_lens(rng: &mut ChaCha8Rng, kind: SpaceformKind, dim: usize) -> LensSpec<f64> {
    let lambda = match kind {
        SpaceformKind::Euclidean => rng.gen_range(0.3..3.0),
        SpaceformKind::Spherical => rng.gen_range(0.1..3.0),
        SpaceformKind::Hyperbolic => rng.gen_range(1.05..3.0),
    };
    let r = radius_of_lambda(kind, lambda).unwrap().require_radius().unwrap();
    LensSpec::symmetric(kind, lambda, rng.gen_range(0.05..1.95) * r, dim).unwrap()
}

#[test]
fn beta_profiles_in_random_lenses() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic] {
        for _ in 0..5 {
            let lens = random_lens(&mut rng, kind, 3);
            let c = lens.midpoint();
            let frame = c.frame();
            let mut hits = 0;
            while hits < 100 {
                let v = frame.iter().fold(frame[0] * 0.0, |acc, f| acc + *f * rng.gen_range(-1.0..1.0)) * lens.radius();
                let Ok(z) = exp_map(&TangentVector::new(c, v).unwrap()) else { continue };
                if !lens.contains(&z, 0.0) {
                    continue;
                }
                hits += 1;
                let b = beta_profile_check(&lens, &z, 257, 1e-8).unwrap();
                assert!(b.pass, "{kind:?}: {:?} {:?} {} {}", b.fit_residual, b.min_second_difference, b.sup_beta, b.bound);
                if kind == SpaceformKind::Hyperbolic {
                    assert!(b.min_second_difference > 0.0);
                }
            }
        }
    }
}

#[test]
fn beta_profile_fixed_anchors() {
    let lens: LensSpec<f64> = LensSpec::symmetric(SpaceformKind::Euclidean, 1.0, 1.0, 2).unwrap();
    let z = Point::new(SpaceformKind::Euclidean, &[0.1, 0.3]).unwrap();
    let b = beta_profile_check(&lens, &z, 101, 1e-9).unwrap();
    // Theta = r^2 / 2 along a unit-speed segment of length 1 has beta'' = 1
    assert!((b.min_second_difference - 1.0).abs() < 1e-9);
    assert!(b.to_csv().starts_with("t,beta\n"));
    let s = LensSpec::symmetric(SpaceformKind::Spherical, 1.0, 0.5, 2).unwrap();
    let z = Point::new(SpaceformKind::Spherical, &[0.99, 0.0, 0.1410673597966]).unwrap();
    let b = beta_profile_check(&s, &z, 101, 1e-8).unwrap();
    assert!(b.fit_residual.unwrap() <= 1e-8 && b.sup_beta < -std::f64::consts::FRAC_PI_4.cos());
    let far = Point::new(SpaceformKind::Euclidean, &[0.0, 5.0]).unwrap();
    assert!(matches!(beta_profile_check(&lens, &far, 11, 1e-9), Err(GeomError::Domain(_))));
}

#[test]
fn margin_grows_with_center_distance() {
    for kind in [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic] {
        let lambda = 1.5;
        let r = radius_of_lambda(kind, lambda).unwrap().require_radius().unwrap();
        let margins: Vec<f64> = (1..40)
            .map(|k| enclosing_ball(&LensSpec::symmetric(kind, lambda, k as f64 * 0.05 * r, 2).unwrap()).unwrap().margin)
            .collect();
        assert!(margins.windows(2).all(|w| w[1] > w[0]), "{kind:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn random_lenses_have_positive_margin(seed in any::<u64>(), which in 0usize..3, dim in 2usize..4) {
        let kind = [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic][which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lens = random_lens(&mut rng, kind, dim);
        let e = enclosing_ball(&lens).unwrap();
        prop_assert!(e.margin > 0.0);
        prop_assert!((distance(&e.c, &lens.p).unwrap() - lens.d / 2.0).abs() < 1e-9);
    }
}

#[test]
fn supports_of_the_ellipse() {
    let g = Arc::new(SphereGrid::circle(512).unwrap());
    let e = make_ellipse(1.0f64, 0.8, g).unwrap();
    let s = lens_from_supports(&e, 0.8).unwrap();
    let mut nodes = [s.p_node, s.q_node];
    nodes.sort();
    assert_eq!(nodes, [128, 384]);
    assert!((s.lens.d - 0.9).abs() < 1e-8);
    assert!(s.max_excess <= CONTAINMENT_TOL);
}

#[test]
fn supports_of_the_extremal_ball_coincide() {
    for (kind, lambda) in [(SpaceformKind::Euclidean, 1.25), (SpaceformKind::Spherical, 1.0), (SpaceformKind::Hyperbolic, 2.0)] {
        let g = Arc::new(SphereGrid::circle(256).unwrap());
        let r = radius_of_lambda(kind, lambda).unwrap().require_radius().unwrap();
        let b = make_ball(kind, r, g, Point::origin(kind, 2)).unwrap();
        assert!(matches!(lens_from_supports(&b, lambda), Err(GeomError::TrivialBody(_))), "{kind:?}");
    }
}

#[test]
fn lens_body_recovers_its_centers() {
    for kind in [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic] {
        let g = Arc::new(SphereGrid::circle(512).unwrap());
        let spec: LensSpec<f64> = LensSpec::symmetric(kind, 1.5, 0.4, 2).unwrap();
        let body = make_lens_body(&spec, g).unwrap();
        let s = lens_from_supports(&body, 1.5).unwrap();
        let (a, b) = (s.lens.p, s.lens.q);
        let direct = distance(&a, &spec.p).unwrap().max(distance(&b, &spec.q).unwrap());
        let swapped = distance(&a, &spec.q).unwrap().max(distance(&b, &spec.p).unwrap());
        assert!(direct.min(swapped) < 1e-6, "{kind:?}: {direct} {swapped}");
    }
}

#[test]
fn enclosure_chain_on_convex_bodies() {
    let g = Arc::new(SphereGrid::circle(512).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for kind in [SpaceformKind::Euclidean, SpaceformKind::Spherical, SpaceformKind::Hyperbolic] {
        for _ in 0..6 {
            let r = rng.gen_range(0.3..0.7);
            let amp = rng.gen_range(0.01..0.05);
            let mode = rng.gen_range(2..5);
            let b = make_perturbed_ball(kind, r, g.clone(), Point::origin(kind, 2), amp, mode).unwrap();
            let kmin = lambda_convexity_check(&b, 0.1, 1e-6).unwrap().min_kappa;
            if kmin <= 0.05 {
                continue;
            }
            let lambda = match kind {
                SpaceformKind::Hyperbolic if kmin <= 1.0 => continue,
                SpaceformKind::Hyperbolic => 0.5 * (1.0 + kmin),
                _ => 0.9 * kmin,
            };
            assert!(lambda_convexity_check(&b, lambda, 1e-6).unwrap().is_lambda_convex);
            let s = lens_from_supports(&b, lambda).unwrap();
            assert!(enclosing_ball(&s.lens).unwrap().margin > 0.0);
            strict_point(&b, lambda, 1e-6).unwrap();
            checked += 1;
        }
    }
    assert!(checked >= 6, "only {checked} bodies exercised");
}

use lambda_convex::curvature::{
    default_tolerance, global_blaschke_check, lambda_convexity_check, shape_operator, supporting_ball_test,
};
use lambda_convex::body::RadialBody;
use lambda_convex::linalg::Vector;
use lambda_convex::spaceform::{distance, killing_flow, killing_pushforward, Point, SpaceformKind, TangentVector};
use proptest::prelude::*;

mod common;
use common::{grid, kind_strategy, offset_ball, wobbly_ball};

fn sphere_curvature(kind: SpaceformKind, r: f64) -> f64 {
    match kind {
        SpaceformKind::Euclidean => 1.0 / r,
        SpaceformKind::Spherical => 1.0 / r.tan(),
        SpaceformKind::Hyperbolic => 1.0 / r.tanh(),
    }
}

#[test]
fn offset_sphere_curvatures() {
    for kind in SpaceformKind::ALL {
        let want = sphere_curvature(kind, 0.7);
        for (n, res, tol) in [(1, 512, 1e-6), (2, 5, 1e-3)] {
            let b = offset_ball(kind, grid(n, res), 0.7, 0.25);
            let rep = shape_operator(&b).unwrap();
            let err = rep.nodes.iter().flat_map(|c| c.kappa[..n].to_vec()).fold(0.0f64, |m, k| m.max((k - want).abs()));
            assert!(err <= tol, "{kind:?} n={n}: {err}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn curvature_is_isometry_equivariant(
        kind in kind_strategy(),
        n in 1usize..=2,
        c in prop::collection::vec(-1.0f64..1.0, 3),
        t in 0.05f64..1.0,
        amp in 0.0f64..0.08,
        mode in 2u32..=4,
    ) {
        let g = grid(n, if n == 1 { 256 } else { 3 });
        let body = wobbly_ball(kind, g.clone(), 0.6, amp, mode);
        let o = *body.center();
        let mut v = Vector::zeros(o.coords.len());
        for (e, x) in o.frame().iter().zip(&c) {
            v = v.axpy(*x, e);
        }
        prop_assume!(kind.inner(&v, &v) > 1e-4);
        let dir = TangentVector::new(o, v).unwrap();
        let center = killing_flow(&o, &dir, t).unwrap();
        let frame = body
            .frame()
            .iter()
            .map(|f| killing_pushforward(&TangentVector { base: o, vec: *f }, &dir, t).unwrap().vec)
            .collect();
        let moved = RadialBody::with_frame(kind, center, frame, g, body.rho().to_vec()).unwrap();
        let (a, b) = (shape_operator(&body).unwrap(), shape_operator(&moved).unwrap());
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            for k in 0..n {
                prop_assert!((x.kappa[k] - y.kappa[k]).abs() <= 1e-10 * x.kappa[k].abs().max(1.0));
            }
            prop_assert!((x.mean - y.mean).abs() <= 1e-10 * x.mean.abs().max(1.0));
            prop_assert!((x.trace_a2 - y.trace_a2).abs() <= 1e-10 * x.trace_a2.abs().max(1.0));
        }
    }

    #[test]
    fn supporting_ball_agrees_with_curvature_sign(
        kind in kind_strategy(),
        n in 1usize..=2,
        amp in 0.02f64..0.08,
        mode in 2u32..=3,
        u in 0.0f64..1.0,
    ) {
        let body = wobbly_ball(kind, grid(n, if n == 1 { 512 } else { 3 }), 0.5, amp, mode);
        let rep = shape_operator(&body).unwrap();
        let k = rep.kappa_min();
        let (lo, hi) = k.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        let lambda = lo + u * (hi - lo);
        prop_assume!(lambda > 0.0 && (kind != SpaceformKind::Hyperbolic || lambda > 1.0));
        // The test is local at the scale of a few grid spacings, so the sign
        // is compared where the whole neighbourhood sits on one side of lambda.
        let sep = 10.0 * default_tolerance::<f64>(n);
        let reach = 8.0 * body.grid().spacing() * body.max_rho();
        let pts = body.boundary_points();
        let mut tested = 0;
        for i in (0..body.len()).step_by(7) {
            let near: Vec<f64> = (0..body.len())
                .filter(|&j| distance(&pts[i], &pts[j]).unwrap() <= reach)
                .map(|j| k[j] - lambda)
                .collect();
            let above = near.iter().all(|d| *d > sep);
            let below = near.iter().all(|d| *d < -sep);
            if above || below {
                prop_assert_eq!(supporting_ball_test(&body, &rep, i, lambda).unwrap(), above, "node {}", i);
                tested += 1;
            }
        }
        prop_assume!(tested > 0);
    }
}

/// Every body that passes the local check passes the global one; the
/// generator also produces rejected bodies, at least one of which must occur.
#[test]
fn blaschke_follows_from_lambda_convexity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(26);
    let (mut convex, mut rejected) = (0, 0);
    for trial in 0..200 {
        let kind = SpaceformKind::ALL[trial % 3];
        let n = if trial % 4 == 3 { 2 } else { 1 };
        let r = rng.gen_range(0.3..0.9);
        let body = wobbly_ball(kind, grid(n, if n == 1 { 256 } else { 3 }), r, r * rng.gen_range(0.0..0.04), rng.gen_range(2..=4));
        let tol = default_tolerance::<f64>(n);
        let kmin = shape_operator(&body).unwrap().global_min_kappa();
        let floor = if kind == SpaceformKind::Hyperbolic { 1.0 } else { 0.0 };
        let lambda = floor + (kmin - floor) * rng.gen_range(0.3..1.2);
        if lambda <= floor {
            continue;
        }
        let check = lambda_convexity_check(&body, lambda, tol).unwrap();
        if check.is_lambda_convex {
            convex += 1;
            assert!(global_blaschke_check(&body, lambda).unwrap(), "trial {trial}: {kind:?} n={n} lambda={lambda}");
        } else {
            rejected += 1;
            assert!(global_blaschke_check(&body, lambda).is_err());
        }
    }
    assert!(convex >= 100 && rejected >= 1, "{convex} {rejected}");
}

#[test]
fn point_type_alias_compiles() {
    let _p: lambda_convex::Point64 = Point::origin(SpaceformKind::Euclidean, 2);
}

//! Shared generators for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use lambda_convex::body::{make_perturbed_ball, RadialBody};
use lambda_convex::grid::SphereGrid;
use lambda_convex::spaceform::{distance, exp_map, Point, SpaceformKind, TangentVector};
use proptest::prelude::*;

pub fn kind_strategy() -> impl Strategy<Value = SpaceformKind> {
    prop_oneof![
        Just(SpaceformKind::Euclidean),
        Just(SpaceformKind::Spherical),
        Just(SpaceformKind::Hyperbolic)
    ]
}

pub fn grid(n: usize, res: u32) -> Arc<SphereGrid<f64>> {
    Arc::new(if n == 1 { SphereGrid::circle(res as usize).unwrap() } else { SphereGrid::icosphere(res).unwrap() })
}

/// Ball of radius `r` about the point at distance `delta` from the origin
/// along the first frame axis, as a radial body about the origin. The
/// radial function is found by bisection on the distance to the ball center.
pub fn offset_ball(kind: SpaceformKind, grid: Arc<SphereGrid<f64>>, r: f64, delta: f64) -> RadialBody<f64> {
    let m = grid.dimension() + 1;
    let o = Point::origin(kind, m);
    let e = o.frame()[0];
    let c = exp_map(&TangentVector::new(o, e * delta).unwrap()).unwrap();
    let probe = RadialBody::new(kind, o, grid.clone(), vec![0.1; grid.len()]).unwrap();
    let rho = grid
        .directions()
        .iter()
        .map(|dir| {
            let (mut lo, mut hi) = (0.0, r + delta);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if distance(&probe.point_along(dir, mid), &c).unwrap() <= r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    probe.with_rho(rho).unwrap()
}

/// Ball of radius `r` plus `amp` times the zonal harmonic of degree `mode`.
pub fn wobbly_ball(kind: SpaceformKind, grid: Arc<SphereGrid<f64>>, r: f64, amp: f64, mode: u32) -> RadialBody<f64> {
    let m = grid.dimension() + 1;
    make_perturbed_ball(kind, r, grid, Point::origin(kind, m), amp, mode).unwrap()
}

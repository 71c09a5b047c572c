//! Lenses spanned by two supporting balls and their enclosing balls.

use serde::{Deserialize, Serialize};

use crate::body::RadialBody;
use crate::curvature::{shape_operator, supporting_center};
use crate::error::{GeomError, Result};
use crate::linalg::Vector;
use crate::scalar::{lit, Real};
use crate::spaceform::{
    distance, distance_raw, exp_raw, geodesic_interpolate, log_raw, radius_of_lambda, LambdaClass, Point, SpaceformKind,
};

/// Intersection of the closed balls of radius `R(lambda)` about `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LensSpec<T: Real> {
    pub kind: SpaceformKind,
    pub lambda_class: LambdaClass<T>,
    pub p: Point<T>,
    pub q: Point<T>,
    pub d: T,
}

impl<T: Real> LensSpec<T> {
    pub fn new(kind: SpaceformKind, lambda: T, p: Point<T>, q: Point<T>) -> Result<Self> {
        let lambda_class = radius_of_lambda(kind, lambda)?;
        let radius = lambda_class.require_radius()?;
        if p.kind != kind || q.kind != kind {
            return Err(GeomError::domain("lens centers belong to a different spaceform"));
        }
        let d = distance(&p, &q)?;
        if !(d > T::zero()) {
            return Err(GeomError::DegenerateLens);
        }
        if !(d < lit::<T>(2.0) * radius) {
            return Err(GeomError::domain(format!("center distance {d} must be below 2R = {}", lit::<T>(2.0) * radius)));
        }
        Ok(LensSpec { kind, lambda_class, p, q, d })
    }

    pub fn radius(&self) -> T {
        self.lambda_class.radius.expect("lens radius")
    }

    /// Geodesic midpoint of the two centers.
    pub fn midpoint(&self) -> Point<T> {
        geodesic_interpolate(&self.p, &self.q, lit(0.5)).expect("valid lens centers")
    }
}

/// Boundary samples of a lens: `2048` per cap for a planar ambient space,
/// `8192` per cap in three dimensions.
pub fn default_samples(space_dim: usize) -> usize {
    if space_dim <= 2 {
        4096
    } else {
        16384
    }
}

/// Ball about the lens midpoint containing the lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnclosureResult<T: Real> {
    pub c: Point<T>,
    pub rho: T,
    /// `R(lambda) - rho`
    pub margin: T,
}

/// Unit tangent frame at `p` whose first vector points to `q`.
fn frame_toward<T: Real>(p: &Point<T>, q: &Point<T>) -> Vec<Vector<T>> {
    let kind = p.kind;
    let (v, d) = log_raw(p, q);
    let mut out = vec![v * d.recip()];
    for f in p.frame() {
        let mut w = f;
        for e in &out {
            w = w.axpy(-kind.inner(&w, e), e);
        }
        let len = kind.inner(&w, &w).max(T::zero()).sqrt();
        if len > lit(1e-8) {
            out.push(w * len.recip());
        }
        if out.len() == p.space_dim() {
            break;
        }
    }
    out
}

/// Half opening angle of the cap of the sphere about `p` cut off by the
/// ball about `q` (both of radius `r`, centers `d` apart).
fn cap_angle<T: Real>(kind: SpaceformKind, r: T, d: T) -> T {
    let half = d * lit(0.5);
    let c = match kind {
        SpaceformKind::Euclidean => half / r,
        SpaceformKind::Spherical => half.tan() / r.tan(),
        SpaceformKind::Hyperbolic => half.tanh() / r.tanh(),
    };
    c.min(T::one()).acos()
}

impl<T: Real> LensSpec<T> {
    /// Builds the lens whose centers lie at distance `d / 2` on either side
    /// of the origin along the first axis.
    pub fn symmetric(kind: SpaceformKind, lambda: T, d: T, space_dim: usize) -> Result<Self> {
        let o = Point::origin(kind, space_dim);
        let e = o.frame()[0];
        let half = d * lit(0.5);
        LensSpec::new(kind, lambda, exp_raw(&o, &(e * -half)), exp_raw(&o, &(e * half)))
    }

    pub fn space_dim(&self) -> usize {
        self.p.space_dim()
    }

    /// Whether `z` lies in both balls, up to `tol` in distance.
    pub fn contains(&self, z: &Point<T>, tol: T) -> bool {
        let r = self.radius();
        distance_raw(&self.p, z) <= r + tol && distance_raw(&self.q, z) <= r + tol
    }

    /// Points on the boundary of the lens, half on each cap; the rim is
    /// included.
    pub fn boundary_samples(&self, count: usize) -> Vec<Point<T>> {
        let r = self.radius();
        let alpha = cap_angle(self.kind, r, self.d);
        let per_cap = (count / 2).max(2);
        let mut out = Vec::with_capacity(2 * per_cap);
        for (a, b) in [(&self.p, &self.q), (&self.q, &self.p)] {
            let f = frame_toward(a, b);
            if f.len() == 1 || self.space_dim() == 2 {
                for k in 0..per_cap {
                    let phi = -alpha + (alpha + alpha) * lit(k as f64 / (per_cap - 1) as f64);
                    let u = (f[0] * phi.cos()).axpy(phi.sin(), &f[1]);
                    out.push(exp_raw(a, &(u * r)));
                }
            } else {
                // rim ring, then an area-uniform spiral over the cap
                let rim = (per_cap / 16).max(8);
                let golden = T::PI() * (lit::<T>(3.0) - lit::<T>(5.0).sqrt());
                let (ca, sa) = (alpha.cos(), alpha.sin());
                for k in 0..rim {
                    let phi = T::TAU() * lit(k as f64 / rim as f64);
                    let u = (f[0] * ca).axpy(sa * phi.cos(), &f[1]).axpy(sa * phi.sin(), &f[2]);
                    out.push(exp_raw(a, &(u * r)));
                }
                let rest = per_cap - rim;
                for k in 0..rest {
                    let z = T::one() - (T::one() - ca) * lit((k as f64 + 0.5) / rest as f64);
                    let s = (T::one() - z * z).max(T::zero()).sqrt();
                    let phi = golden * lit(k as f64);
                    let u = (f[0] * z).axpy(s * phi.cos(), &f[1]).axpy(s * phi.sin(), &f[2]);
                    out.push(exp_raw(a, &(u * r)));
                }
            }
        }
        out
    }
}

/// The ball about the midpoint of the lens centers through the farthest
/// boundary sample. Fails with `MarginViolation` unless `rho < R`.
pub fn enclosing_ball<T: Real>(lens: &LensSpec<T>) -> Result<EnclosureResult<T>> {
    enclosing_ball_with(lens, default_samples(lens.space_dim()))
}

pub fn enclosing_ball_with<T: Real>(lens: &LensSpec<T>, samples: usize) -> Result<EnclosureResult<T>> {
    let c = lens.midpoint();
    let rho = farthest(&c, &lens.boundary_samples(samples));
    let radius = lens.radius();
    let margin = radius - rho;
    if !(margin > T::zero()) {
        return Err(GeomError::MarginViolation { rho: rho.as_f64(), radius: radius.as_f64() });
    }
    Ok(EnclosureResult { c, rho, margin })
}

fn farthest<T: Real>(c: &Point<T>, pts: &[Point<T>]) -> T {
    pts.iter().fold(T::zero(), |m, x| m.max(distance_raw(c, x)))
}

/// Smallest radius, over centers on the geodesic from `p` to `q`, of a ball
/// covering the boundary samples. Grid search over `resolution + 1`
/// centers refined by golden sections.
pub fn circumradius_bruteforce<T: Real>(lens: &LensSpec<T>, resolution: usize) -> T {
    let pts = lens.boundary_samples(default_samples(lens.space_dim()));
    let cover = |s: T| {
        let c = geodesic_interpolate(&lens.p, &lens.q, s).expect("valid lens centers");
        farthest(&c, &pts)
    };
    let res = resolution.max(2);
    let step = T::one() / lit(res as f64);
    let (mut best_s, mut best) = (T::zero(), T::infinity());
    for k in 0..=res {
        let s = step * lit(k as f64);
        let v = cover(s);
        if v < best {
            best = v;
            best_s = s;
        }
    }
    let (mut a, mut b) = ((best_s - step).max(T::zero()), (best_s + step).min(T::one()));
    let g = (lit::<T>(5.0).sqrt() - T::one()) * lit(0.5);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (cover(x1), cover(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cover(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cover(x2);
        }
    }
    best.min(f1).min(f2)
}

/// Samples of `beta(t) = Theta(dist(gamma(t), z))` along the geodesic from
/// `p` to `q`, with the checks matching the curvature sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BetaProfile<T: Real> {
    pub kind: SpaceformKind,
    pub t: Vec<T>,
    pub beta: Vec<T>,
    /// Smallest second difference divided by `dt^2` (E and H).
    pub min_second_difference: T,
    /// RMS residual of the fit `a cos(t d) + b sin(t d)` (S only).
    pub fit_residual: Option<T>,
    pub sup_beta: T,
    /// `max(beta(0), beta(1))` for E and H, `Theta(R)` for S.
    pub bound: T,
    pub tol: T,
    pub pass: bool,
}

impl<T: Real> BetaProfile<T> {
    /// CSV with columns `t,beta`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "beta"]).expect("in-memory write");
        for (t, b) in self.t.iter().zip(&self.beta) {
            w.write_record([t.to_string(), b.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

pub fn beta_profile_check<T: Real>(lens: &LensSpec<T>, z: &Point<T>, samples: usize, tol: T) -> Result<BetaProfile<T>> {
    if z.kind != lens.kind || z.coords.len() != lens.p.coords.len() {
        return Err(GeomError::domain("point belongs to a different space"));
    }
    if !lens.contains(z, lit(1e-12)) {
        return Err(GeomError::domain("point lies outside the lens"));
    }
    let samples = samples.max(3);
    let kind = lens.kind;
    let big_theta = |r: T| match kind {
        SpaceformKind::Euclidean => r * r * lit(0.5),
        SpaceformKind::Spherical => -r.cos(),
        SpaceformKind::Hyperbolic => r.cosh(),
    };
    let dt = T::one() / lit((samples - 1) as f64);
    let t: Vec<T> = (0..samples).map(|k| dt * lit(k as f64)).collect();
    let beta: Vec<T> = t
        .iter()
        .map(|&s| big_theta(distance_raw(&geodesic_interpolate(&lens.p, &lens.q, s).expect("valid lens centers"), z)))
        .collect();
    let sup_beta = beta.iter().fold(T::neg_infinity(), |m, b| m.max(*b));
    let min_second_difference = beta
        .windows(3)
        .map(|w| (w[0] - w[1] - w[1] + w[2]) / (dt * dt))
        .fold(T::infinity(), |m, x| m.min(x));
    let (fit_residual, bound, pass) = match kind {
        SpaceformKind::Spherical => {
            // normal equations of the two-term fit
            let (mut scc, mut scs, mut sss, mut scb, mut ssb) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
            for (s, b) in t.iter().zip(&beta) {
                let (sn, cs) = (*s * lens.d).sin_cos();
                scc += cs * cs;
                scs += cs * sn;
                sss += sn * sn;
                scb += cs * *b;
                ssb += sn * *b;
            }
            let det = scc * sss - scs * scs;
            let a = (scb * sss - ssb * scs) / det;
            let b = (ssb * scc - scb * scs) / det;
            let sq = t.iter().zip(&beta).fold(T::zero(), |acc, (s, be)| {
                let (sn, cs) = (*s * lens.d).sin_cos();
                let e = a * cs + b * sn - *be;
                acc + e * e
            });
            let res = (sq / lit(samples as f64)).sqrt();
            let bound = big_theta(lens.radius());
            (Some(res), bound, res <= tol && sup_beta < bound + tol)
        }
        _ => {
            let bound = beta[0].max(beta[samples - 1]);
            (None, bound, min_second_difference >= -tol && sup_beta < bound + tol)
        }
    };
    Ok(BetaProfile { kind, t, beta, min_second_difference, fit_residual, sup_beta, bound, tol, pass })
}

/// Lens spanned by the two farthest-apart supporting-ball centers over the
/// smooth nodes, with the containment of the body checked at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SupportLens<T: Real> {
    pub lens: LensSpec<T>,
    pub p_node: usize,
    pub q_node: usize,
    /// Largest excess of a node's distance to either center over `R`.
    pub max_excess: T,
}

/// Distance tolerance of the containment check in [`lens_from_supports`].
pub const CONTAINMENT_TOL: f64 = 1e-8;

pub fn lens_from_supports<T: Real>(body: &RadialBody<T>, lambda: T) -> Result<SupportLens<T>> {
    let kind = body.kind();
    let radius = radius_of_lambda(kind, lambda)?.require_radius()?;
    let report = shape_operator(body)?;
    let flags = body.smooth_flags();
    let nodes: Vec<usize> = (0..body.len()).filter(|&i| flags[i]).collect();
    let centers: Vec<Point<T>> = nodes.iter().map(|&i| supporting_center(&report, i, radius)).collect();
    // monotone stand-in for the distance
    let key = |a: &Point<T>, b: &Point<T>| match kind {
        SpaceformKind::Euclidean => {
            let d = a.coords - b.coords;
            d.dot(&d)
        }
        SpaceformKind::Spherical => -a.coords.dot(&b.coords),
        SpaceformKind::Hyperbolic => -a.coords.mdot(&b.coords),
    };
    let mut best = (0, 0, T::neg_infinity());
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let k = key(&centers[i], &centers[j]);
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    let (i, j, _) = best;
    if centers.len() < 2 || distance_raw(&centers[i], &centers[j]) <= lit(1e-10) {
        return Err(GeomError::TrivialBody("all supporting balls coincide".into()));
    }
    let lens = LensSpec::new(kind, lambda, centers[i], centers[j])?;
    let max_excess = body
        .boundary_points()
        .iter()
        .map(|x| distance_raw(&lens.p, x).max(distance_raw(&lens.q, x)) - radius)
        .fold(T::neg_infinity(), |m, e| m.max(e));
    if max_excess > lit(CONTAINMENT_TOL) {
        return Err(GeomError::domain(format!("body leaves the support lens by {max_excess}")));
    }
    Ok(SupportLens { lens, p_node: nodes[i], q_node: nodes[j], max_excess })
}

//! Exact geometry of the three simply connected spaceforms.
//!
//! Points are stored in model coordinates: the Euclidean space itself, the
//! unit sphere in R^{m+1}, and the upper sheet of the hyperboloid
//! `<x, x> = -1` in Minkowski space R^{1,m}. All operations are closed form.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::Vector;
use crate::scalar::{lit, Real};

/// One of the three constant curvature model spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceformKind {
    Euclidean,
    Spherical,
    Hyperbolic,
}

impl SpaceformKind {
    pub const ALL: [SpaceformKind; 3] = [
        SpaceformKind::Euclidean,
        SpaceformKind::Spherical,
        SpaceformKind::Hyperbolic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SpaceformKind::Euclidean => "euclidean",
            SpaceformKind::Spherical => "spherical",
            SpaceformKind::Hyperbolic => "hyperbolic",
        }
    }

    pub fn sectional_curvature(self) -> i32 {
        match self {
            SpaceformKind::Euclidean => 0,
            SpaceformKind::Spherical => 1,
            SpaceformKind::Hyperbolic => -1,
        }
    }

    /// `Ric(nu, nu)` for a unit vector in a spaceform of dimension `n + 1`.
    pub fn ricci_normal<T: Real>(self, n: usize) -> T {
        lit::<T>(n as f64) * lit(self.sectional_curvature() as f64)
    }

    /// Length of a coordinate vector for a spaceform of dimension `m`.
    pub fn model_len(self, m: usize) -> usize {
        match self {
            SpaceformKind::Euclidean => m,
            _ => m + 1,
        }
    }

    /// Model inner product (Euclidean or Minkowski).
    #[inline]
    pub fn inner<T: Real>(self, a: &Vector<T>, b: &Vector<T>) -> T {
        match self {
            SpaceformKind::Hyperbolic => a.mdot(b),
            _ => a.dot(b),
        }
    }

    /// Whether `lambda` lies in the interval where a geodesic sphere of
    /// principal curvature `lambda` exists.
    pub fn admits_radius<T: Real>(self, lambda: T) -> bool {
        match self {
            SpaceformKind::Hyperbolic => lambda > T::one(),
            _ => lambda > T::zero(),
        }
    }

    /// `a(r)` and `b(r)` with derivatives, such that the point at distance
    /// `r` from `c` in unit direction `e` is `a(r) c + b(r) e` (for the
    /// Euclidean space `a == 1` multiplies the base point and `b(r) = r`).
    #[inline]
    pub fn radial_profile<T: Real>(self, r: T) -> RadialProfile<T> {
        match self {
            SpaceformKind::Euclidean => RadialProfile {
                a: T::one(),
                da: T::zero(),
                dda: T::zero(),
                b: r,
                db: T::one(),
                ddb: T::zero(),
            },
            SpaceformKind::Spherical => {
                let (s, c) = r.sin_cos();
                RadialProfile { a: c, da: -s, dda: -c, b: s, db: c, ddb: -s }
            }
            SpaceformKind::Hyperbolic => {
                let (s, c) = (r.sinh(), r.cosh());
                RadialProfile { a: c, da: s, dda: c, b: s, db: c, ddb: s }
            }
        }
    }
}

impl std::fmt::Display for SpaceformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Coefficients of a geodesic ray `a(r) c + b(r) e` and their derivatives.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile<T> {
    pub a: T,
    pub da: T,
    pub dda: T,
    pub b: T,
    pub db: T,
    pub ddb: T,
}

/// The warp function of the polar metric `dr^2 + theta(r)^2 sigma`, its
/// derivative and an antiderivative `Theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Warp<T> {
    pub theta: T,
    pub theta_prime: T,
    #[serde(rename = "Theta")]
    pub big_theta: T,
}

pub fn warp_functions<T: Real>(kind: SpaceformKind, r: T) -> Result<Warp<T>> {
    if !(r >= T::zero()) {
        return Err(GeomError::domain(format!("warp radius must be >= 0, got {r}")));
    }
    Ok(match kind {
        SpaceformKind::Euclidean => Warp { theta: r, theta_prime: T::one(), big_theta: r * r * lit(0.5) },
        SpaceformKind::Spherical => {
            if r > T::PI() {
                return Err(GeomError::domain(format!("spherical warp radius {r} exceeds pi")));
            }
            let (s, c) = r.sin_cos();
            Warp { theta: s, theta_prime: c, big_theta: -c }
        }
        SpaceformKind::Hyperbolic => Warp { theta: r.sinh(), theta_prime: r.cosh(), big_theta: r.cosh() },
    })
}

/// `theta(r)` without domain checks.
#[inline]
pub(crate) fn warp<T: Real>(kind: SpaceformKind, r: T) -> T {
    match kind {
        SpaceformKind::Euclidean => r,
        SpaceformKind::Spherical => r.sin(),
        SpaceformKind::Hyperbolic => r.sinh(),
    }
}

/// `int_0^r theta(s)^n ds`, the volume of a geodesic ball of radius `r`
/// divided by the area of the unit `n`-sphere.
pub fn warped_volume<T: Real>(kind: SpaceformKind, n: usize, r: T) -> T {
    let half = lit::<T>(0.5);
    match (kind, n) {
        (SpaceformKind::Euclidean, _) => r.powi(n as i32 + 1) / lit((n + 1) as f64),
        (SpaceformKind::Spherical, 1) => {
            let s = (r * half).sin();
            lit::<T>(2.0) * s * s
        }
        (SpaceformKind::Hyperbolic, 1) => {
            let s = (r * half).sinh();
            lit::<T>(2.0) * s * s
        }
        (SpaceformKind::Spherical, 2) => (r - r.sin() * r.cos()) * half,
        (SpaceformKind::Hyperbolic, 2) => (r.sinh() * r.cosh() - r) * half,
        _ => panic!("warped_volume supports n in {{1, 2}}, got {n}"),
    }
}

/// Area of the unit `n`-sphere for `n in {1, 2}`.
pub fn unit_sphere_area<T: Real>(n: usize) -> T {
    match n {
        1 => T::TAU(),
        2 => lit::<T>(4.0) * T::PI(),
        _ => panic!("unit_sphere_area supports n in {{1, 2}}, got {n}"),
    }
}

/// Curvature level `lambda` together with the radius of the geodesic sphere
/// whose principal curvatures all equal `lambda`, when it exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaClass<T> {
    pub kind: SpaceformKind,
    pub lambda: T,
    pub radius: Option<T>,
}

impl<T: Real> LambdaClass<T> {
    /// The radius, or a domain error outside the admissible interval.
    pub fn require_radius(&self) -> Result<T> {
        self.radius.ok_or_else(|| {
            GeomError::domain(format!(
                "lambda = {} admits no supporting radius in the {} space",
                self.lambda, self.kind
            ))
        })
    }
}

/// Builds the [`LambdaClass`] for `lambda > 0`; the radius is populated
/// exactly on the admissible interval.
pub fn lambda_class<T: Real>(kind: SpaceformKind, lambda: T) -> Result<LambdaClass<T>> {
    if !(lambda > T::zero()) {
        return Err(GeomError::domain(format!("lambda must be positive, got {lambda}")));
    }
    let radius = if kind.admits_radius(lambda) {
        Some(match kind {
            SpaceformKind::Euclidean => lambda.recip(),
            SpaceformKind::Spherical => lambda.recip().atan(),
            SpaceformKind::Hyperbolic => lambda.recip().atanh(),
        })
    } else {
        None
    };
    Ok(LambdaClass { kind, lambda, radius })
}

/// The radius of the geodesic sphere with principal curvatures `lambda`.
/// Fails outside the admissible interval (e.g. hyperbolic `lambda <= 1`).
pub fn radius_of_lambda<T: Real>(kind: SpaceformKind, lambda: T) -> Result<LambdaClass<T>> {
    let class = lambda_class(kind, lambda)?;
    class.require_radius()?;
    Ok(class)
}

/// Principal curvature of a geodesic sphere of radius `r`.
pub fn lambda_of_radius<T: Real>(kind: SpaceformKind, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(GeomError::domain(format!("radius must be positive, got {r}")));
    }
    match kind {
        SpaceformKind::Euclidean => Ok(r.recip()),
        SpaceformKind::Spherical => {
            if r >= T::FRAC_PI_2() {
                return Err(GeomError::domain(format!("spherical radius {r} must be < pi/2")));
            }
            Ok(r.tan().recip())
        }
        SpaceformKind::Hyperbolic => Ok(r.tanh().recip()),
    }
}

/// A point of a spaceform in model coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Point<T: Real> {
    pub kind: SpaceformKind,
    pub coords: Vector<T>,
}

impl<T: Real> Point<T> {
    /// Validates the model constraint.
    pub fn new(kind: SpaceformKind, coords: &[T]) -> Result<Self> {
        if coords.is_empty() || coords.len() > crate::linalg::MAX_DIM {
            return Err(GeomError::domain(format!("bad coordinate length {}", coords.len())));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(GeomError::domain("non-finite coordinates"));
        }
        let p = Point { kind, coords: Vector::from_slice(coords) };
        let tol = T::model_tol();
        match kind {
            SpaceformKind::Euclidean => {}
            SpaceformKind::Spherical => {
                let nrm = p.coords.dot(&p.coords);
                if (nrm - T::one()).abs() > tol {
                    return Err(GeomError::domain(format!("spherical point has |x|^2 = {nrm}")));
                }
            }
            SpaceformKind::Hyperbolic => {
                let q = p.coords.mdot(&p.coords);
                if (q + T::one()).abs() > tol * p.coords.dot(&p.coords).max(T::one()) || coords[0] < T::one() - tol {
                    return Err(GeomError::domain(format!(
                        "hyperbolic point violates <x,x> = -1, x0 >= 1 (<x,x> = {q}, x0 = {})",
                        coords[0]
                    )));
                }
            }
        }
        Ok(p)
    }

    /// The model origin of a spaceform of dimension `m`.
    pub fn origin(kind: SpaceformKind, m: usize) -> Self {
        let len = kind.model_len(m);
        let coords = match kind {
            SpaceformKind::Euclidean => Vector::zeros(len),
            _ => Vector::basis(len, 0),
        };
        Point { kind, coords }
    }

    /// Dimension of the ambient spaceform.
    pub fn space_dim(&self) -> usize {
        match self.kind {
            SpaceformKind::Euclidean => self.coords.len(),
            _ => self.coords.len() - 1,
        }
    }

    /// Re-imposes the model constraint after floating point drift.
    pub(crate) fn renormalized(kind: SpaceformKind, mut x: Vector<T>) -> Self {
        match kind {
            SpaceformKind::Euclidean => {}
            SpaceformKind::Spherical => {
                let s = x.norm();
                x = x * s.recip();
            }
            SpaceformKind::Hyperbolic => {
                let q = -x.mdot(&x);
                x = x * q.sqrt().recip();
            }
        }
        Point { kind, coords: x }
    }

    /// Projects a model vector onto the tangent space at this point.
    pub fn project_tangent(&self, w: &Vector<T>) -> Vector<T> {
        match self.kind {
            SpaceformKind::Euclidean => *w,
            SpaceformKind::Spherical => w.axpy(-self.coords.dot(w), &self.coords),
            SpaceformKind::Hyperbolic => w.axpy(self.coords.mdot(w), &self.coords),
        }
    }

    /// Orthonormal tangent frame obtained by transporting the standard frame
    /// at the origin with a fixed isometry taking the origin to `self`.
    pub fn frame(&self) -> Vec<Vector<T>> {
        let m = self.space_dim();
        let len = self.coords.len();
        let p = &self.coords;
        match self.kind {
            SpaceformKind::Euclidean => (0..m).map(|k| Vector::basis(len, k)).collect(),
            SpaceformKind::Spherical => {
                let o = Vector::basis(len, 0);
                if p[0] > T::zero() {
                    let w = o + *p;
                    let denom = T::one() + p[0];
                    (1..len).map(|k| Vector::basis(len, k).axpy(-p[k] / denom, &w)).collect()
                } else {
                    // Householder reflection swapping o and p.
                    let u = o - *p;
                    let un = u * u.norm().recip();
                    let two = lit::<T>(2.0);
                    (1..len).map(|k| Vector::basis(len, k).axpy(-two * un[k], &un)).collect()
                }
            }
            SpaceformKind::Hyperbolic => {
                let gamma = p[0];
                let mut u = *p;
                u[0] = T::zero();
                (1..len)
                    .map(|k| {
                        let mut e = Vector::basis(len, k).axpy(p[k] / (T::one() + gamma), &u);
                        e[0] = p[k];
                        e
                    })
                    .collect()
            }
        }
    }
}

/// A vector tangent to the model at `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TangentVector<T: Real> {
    pub base: Point<T>,
    pub vec: Vector<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: Point<T>, vec: Vector<T>) -> Result<Self> {
        if vec.len() != base.coords.len() {
            return Err(GeomError::domain("tangent vector length does not match base point"));
        }
        let tol = T::model_tol() * (T::one() + vec.max_abs()) * (T::one() + base.coords.max_abs());
        let ip = match base.kind {
            SpaceformKind::Euclidean => T::zero(),
            SpaceformKind::Spherical => base.coords.dot(&vec),
            SpaceformKind::Hyperbolic => base.coords.mdot(&vec),
        };
        if ip.abs() > tol {
            return Err(GeomError::domain(format!("vector is not tangent at base (<base, v> = {ip})")));
        }
        Ok(TangentVector { base, vec })
    }

    /// Model norm (Minkowski norm for the hyperboloid; tangent vectors are spacelike).
    pub fn norm(&self) -> T {
        self.base.kind.inner(&self.vec, &self.vec).max(T::zero()).sqrt()
    }
}

/// `sin(x)/x` style helper avoiding division by zero.
#[inline]
fn sinc_like<T: Real>(kind: SpaceformKind, x: T) -> T {
    if x.abs() < lit(1e-8) {
        match kind {
            SpaceformKind::Hyperbolic => T::one() + x * x / lit(6.0),
            _ => T::one() - x * x / lit(6.0),
        }
    } else {
        match kind {
            SpaceformKind::Hyperbolic => x.sinh() / x,
            _ => x.sin() / x,
        }
    }
}

/// Exponential map at `base` applied to `vec`, without validation.
#[inline]
pub(crate) fn exp_raw<T: Real>(base: &Point<T>, vec: &Vector<T>) -> Point<T> {
    let kind = base.kind;
    match kind {
        SpaceformKind::Euclidean => Point { kind, coords: base.coords + *vec },
        SpaceformKind::Spherical => {
            let r = vec.norm();
            let x = (base.coords * r.cos()).axpy(sinc_like(kind, r), vec);
            Point::renormalized(kind, x)
        }
        SpaceformKind::Hyperbolic => {
            let r = vec.mdot(vec).max(T::zero()).sqrt();
            let x = (base.coords * r.cosh()).axpy(sinc_like(kind, r), vec);
            Point::renormalized(kind, x)
        }
    }
}

/// Endpoint of the geodesic with initial velocity `v`. `exp_map` of the zero
/// vector returns the base point exactly.
pub fn exp_map<T: Real>(v: &TangentVector<T>) -> Result<Point<T>> {
    let v = TangentVector::new(v.base, v.vec)?;
    if v.vec.as_slice().iter().all(|x| *x == T::zero()) {
        return Ok(v.base);
    }
    if v.base.kind == SpaceformKind::Spherical && v.vec.norm() >= T::PI() {
        return Err(GeomError::domain("spherical exp_map requires |v| < pi"));
    }
    Ok(exp_raw(&v.base, &v.vec))
}

/// Geodesic distance without kind checks.
#[inline]
pub(crate) fn distance_raw<T: Real>(p: &Point<T>, q: &Point<T>) -> T {
    match p.kind {
        SpaceformKind::Euclidean => (q.coords - p.coords).norm(),
        SpaceformKind::Spherical => {
            let c = p.coords.dot(&q.coords);
            let w = q.coords.axpy(-c, &p.coords);
            w.norm().atan2(c)
        }
        SpaceformKind::Hyperbolic => {
            let c = p.coords.mdot(&q.coords);
            let w = q.coords.axpy(c, &p.coords);
            w.mdot(&w).max(T::zero()).sqrt().asinh()
        }
    }
}

/// Geodesic distance between two points of the same spaceform.
pub fn distance<T: Real>(p: &Point<T>, q: &Point<T>) -> Result<T> {
    check_same(p, q)?;
    Ok(distance_raw(p, q))
}

fn check_same<T: Real>(p: &Point<T>, q: &Point<T>) -> Result<()> {
    if p.kind != q.kind || p.coords.len() != q.coords.len() {
        return Err(GeomError::domain("points belong to different spaceforms"));
    }
    Ok(())
}

/// Logarithm map, inverse of [`exp_map`] away from the spherical cut locus.
#[inline]
pub(crate) fn log_raw<T: Real>(p: &Point<T>, q: &Point<T>) -> (Vector<T>, T) {
    match p.kind {
        SpaceformKind::Euclidean => {
            let v = q.coords - p.coords;
            let d = v.norm();
            (v, d)
        }
        SpaceformKind::Spherical => {
            let c = p.coords.dot(&q.coords);
            let w = q.coords.axpy(-c, &p.coords);
            let s = w.norm();
            let d = s.atan2(c);
            if s == T::zero() {
                (Vector::zeros(w.len()), d)
            } else {
                (w * (d / s), d)
            }
        }
        SpaceformKind::Hyperbolic => {
            let c = p.coords.mdot(&q.coords);
            let w = q.coords.axpy(c, &p.coords);
            let s = w.mdot(&w).max(T::zero()).sqrt();
            let d = s.asinh();
            if s == T::zero() {
                (Vector::zeros(w.len()), d)
            } else {
                (w * (d / s), d)
            }
        }
    }
}

/// Distance along the geodesic ray from `o` with unit initial velocity `m`
/// at which it leaves the closed ball of radius `radius` about `c`. `o`
/// must lie inside the ball.
pub(crate) fn ray_exit<T: Real>(o: &Point<T>, m: &Vector<T>, c: &Point<T>, radius: T) -> Option<T> {
    let kind = o.kind;
    let r = match kind {
        SpaceformKind::Euclidean => {
            let oc = o.coords - c.coords;
            let beta = m.dot(&oc);
            let disc = beta * beta - (oc.dot(&oc) - radius * radius);
            if disc < T::zero() {
                return None;
            }
            disc.sqrt() - beta
        }
        SpaceformKind::Spherical => {
            // cos r <o,c> + sin r <m,c> = cos R
            let (a, b) = (o.coords.dot(&c.coords), m.dot(&c.coords));
            let amp = a.hypot(b);
            let q = radius.cos() / amp;
            if !(q <= T::one()) {
                return None;
            }
            b.atan2(a) + q.acos()
        }
        SpaceformKind::Hyperbolic => {
            // cosh r A + sinh r B = cosh R
            let (a, b) = (-o.coords.mdot(&c.coords), -m.mdot(&c.coords));
            let q = a * a - b * b;
            if !(q > T::zero()) {
                return None;
            }
            let z = radius.cosh() / q.sqrt();
            if !(z >= T::one()) {
                return None;
            }
            z.acosh() - (b / a).atanh()
        }
    };
    (r >= T::zero()).then_some(r)
}

/// Initial velocity of the minimising geodesic from `p` to `q` (of length
/// equal to the distance) together with the distance.
pub fn log_and_distance<T: Real>(p: &Point<T>, q: &Point<T>) -> Result<(TangentVector<T>, T)> {
    check_same(p, q)?;
    if p.kind == SpaceformKind::Spherical {
        let c = p.coords.dot(&q.coords);
        let s = q.coords.axpy(-c, &p.coords).norm();
        if c < T::zero() && s < T::model_tol().sqrt() {
            return Err(GeomError::domain("antipodal spherical points have no unique geodesic"));
        }
    }
    let (v, d) = log_raw(p, q);
    Ok((TangentVector { base: *p, vec: v }, d))
}

/// Point `gamma(t)` on the minimising geodesic with `gamma(0) = p`, `gamma(1) = q`.
pub fn geodesic_interpolate<T: Real>(p: &Point<T>, q: &Point<T>, t: T) -> Result<Point<T>> {
    let (v, _) = log_and_distance(p, q)?;
    if t == T::zero() {
        return Ok(*p);
    }
    if t == T::one() {
        return Ok(*q);
    }
    Ok(exp_raw(p, &(v.vec * t)))
}

/// Value at `p` of the Killing field generating the transvections along the
/// geodesic through `direction.base` with initial velocity `direction.vec`:
/// translations (Euclidean), rotations (spherical) or boosts (hyperbolic).
pub fn killing_field_sample<T: Real>(p: &Point<T>, direction: &TangentVector<T>) -> Result<TangentVector<T>> {
    check_same(p, &direction.base)?;
    let speed = direction.norm();
    if !(speed > T::zero()) {
        return Err(GeomError::domain("Killing direction must be nonzero"));
    }
    let b = &direction.base.coords;
    let d = &direction.vec;
    let x = &p.coords;
    let vec = match p.kind {
        SpaceformKind::Euclidean => *d,
        SpaceformKind::Spherical => (*d * b.dot(x)).axpy(-d.dot(x), b),
        SpaceformKind::Hyperbolic => (*d * -b.mdot(x)).axpy(d.mdot(x), b),
    };
    Ok(TangentVector { base: *p, vec })
}

/// Flow of the Killing field of [`killing_field_sample`] for time `t`.
pub fn killing_flow<T: Real>(p: &Point<T>, direction: &TangentVector<T>, t: T) -> Result<Point<T>> {
    check_same(p, &direction.base)?;
    let y = killing_linear(p.kind, direction, p.coords, t)?;
    let y = match p.kind {
        SpaceformKind::Euclidean => y.axpy(t, &direction.vec),
        _ => y,
    };
    Ok(Point::renormalized(p.kind, y))
}

/// Differential of [`killing_flow`] applied to a tangent vector.
pub fn killing_pushforward<T: Real>(v: &TangentVector<T>, direction: &TangentVector<T>, t: T) -> Result<TangentVector<T>> {
    let base = killing_flow(&v.base, direction, t)?;
    let vec = killing_linear(v.base.kind, direction, v.vec, t)?;
    Ok(TangentVector { base, vec })
}

/// Linear part of the flow (identity for translations).
fn killing_linear<T: Real>(kind: SpaceformKind, direction: &TangentVector<T>, x: Vector<T>, t: T) -> Result<Vector<T>> {
    let speed = direction.norm();
    if !(speed > T::zero()) {
        return Err(GeomError::domain("Killing direction must be nonzero"));
    }
    let b = direction.base.coords;
    let dh = direction.vec * speed.recip();
    let th = t * speed;
    Ok(match kind {
        SpaceformKind::Euclidean => x,
        SpaceformKind::Spherical => {
            let a = b.dot(&x);
            let c = dh.dot(&x);
            let along = (b * a).axpy(c, &dh);
            let rot = (dh * a).axpy(-c, &b);
            x.axpy(th.cos() - T::one(), &along).axpy(th.sin(), &rot)
        }
        SpaceformKind::Hyperbolic => {
            let a = -b.mdot(&x);
            let c = dh.mdot(&x);
            let along = (b * a).axpy(c, &dh);
            let rot = (dh * a).axpy(c, &b);
            x.axpy(th.cosh() - T::one(), &along).axpy(th.sinh(), &rot)
        }
    })
}

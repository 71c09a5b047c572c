//! Star-shaped bodies given by a radial function over a direction grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::enclosure::LensSpec;
use crate::error::{GeomError, Result};
use crate::grid::{GridSpec, SphereGrid};
use crate::linalg::Vector;
use crate::scalar::{lit, Real};
use crate::spaceform::{
    distance_raw, log_raw, unit_sphere_area, warp, warped_volume, Point, SpaceformKind,
};

/// A body `{exp_c(r M xi) : 0 <= r <= rho(xi)}` about `center`, where `M`
/// maps grid directions to tangent vectors through an orthonormal frame.
#[derive(Debug, Clone)]
pub struct RadialBody<T: Real> {
    kind: SpaceformKind,
    center: Point<T>,
    frame: Vec<Vector<T>>,
    grid: Arc<SphereGrid<T>>,
    rho: Vec<T>,
    smooth: Vec<bool>,
}

/// Embedded chart data of the boundary at a node, chart centred on the node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SurfaceJet<T: Real> {
    pub x: Vector<T>,
    /// Derivative along the ray (outward radial direction).
    pub xr: Vector<T>,
    pub xi: [Vector<T>; 2],
    pub xij: [[Vector<T>; 2]; 2],
}

impl<T: Real> RadialBody<T> {
    pub fn new(kind: SpaceformKind, center: Point<T>, grid: Arc<SphereGrid<T>>, rho: Vec<T>) -> Result<Self> {
        let frame = center.frame();
        Self::with_frame(kind, center, frame, grid, rho)
    }

    /// As [`RadialBody::new`] with an explicit orthonormal tangent frame at `center`.
    pub fn with_frame(
        kind: SpaceformKind,
        center: Point<T>,
        frame: Vec<Vector<T>>,
        grid: Arc<SphereGrid<T>>,
        rho: Vec<T>,
    ) -> Result<Self> {
        if center.kind != kind {
            return Err(GeomError::domain("center belongs to a different spaceform"));
        }
        let n = grid.dimension();
        if center.space_dim() != n + 1 {
            return Err(GeomError::domain(format!(
                "grid of dimension {n} needs a center in a {}-dimensional space, got {}",
                n + 1,
                center.space_dim()
            )));
        }
        if frame.len() != n + 1 {
            return Err(GeomError::domain("frame size does not match dimension"));
        }
        let tol = lit::<T>(1e-9);
        for (a, fa) in frame.iter().enumerate() {
            if center.project_tangent(fa).axpy(-T::one(), fa).max_abs() > tol {
                return Err(GeomError::domain("frame vector not tangent at center"));
            }
            for (b, fb) in frame.iter().enumerate() {
                let want = if a == b { T::one() } else { T::zero() };
                if (kind.inner(fa, fb) - want).abs() > tol {
                    return Err(GeomError::domain("frame is not orthonormal"));
                }
            }
        }
        if rho.len() != grid.len() {
            return Err(GeomError::domain(format!("rho has {} values for {} nodes", rho.len(), grid.len())));
        }
        check_rho(kind, &rho)?;
        let smooth = vec![true; rho.len()];
        Ok(RadialBody { kind, center, frame, grid, rho, smooth })
    }

    /// Body whose radial function is `f` evaluated on the mapped directions.
    pub fn from_fn(
        kind: SpaceformKind,
        center: Point<T>,
        grid: Arc<SphereGrid<T>>,
        f: impl Fn(&Vector<T>) -> T,
    ) -> Result<Self> {
        let rho = grid.directions().iter().map(&f).collect();
        Self::new(kind, center, grid, rho)
    }

    /// Same geometry data with a new radial function.
    pub fn with_rho(&self, rho: Vec<T>) -> Result<Self> {
        if rho.len() != self.rho.len() {
            return Err(GeomError::domain("rho length mismatch"));
        }
        check_rho(self.kind, &rho)?;
        Ok(RadialBody { rho, smooth: vec![true; self.smooth.len()], ..self.clone() })
    }

    pub fn with_smooth_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.rho.len() {
            return Err(GeomError::domain("smooth flag length mismatch"));
        }
        self.smooth = flags;
        Ok(self)
    }

    pub fn kind(&self) -> SpaceformKind {
        self.kind
    }

    pub fn center(&self) -> &Point<T> {
        &self.center
    }

    pub fn frame(&self) -> &[Vector<T>] {
        &self.frame
    }

    pub fn grid(&self) -> &Arc<SphereGrid<T>> {
        &self.grid
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn smooth_flags(&self) -> &[bool] {
        &self.smooth
    }

    /// Dimension `n` of the boundary.
    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Tangent vector at the center for a unit grid direction.
    pub fn map_direction(&self, dir: &Vector<T>) -> Vector<T> {
        let mut out = Vector::zeros(self.center.coords.len());
        for (k, f) in self.frame.iter().enumerate() {
            out = out.axpy(dir[k], f);
        }
        out
    }

    /// Grid-space unit direction of a tangent vector at the center.
    pub(crate) fn unmap_direction(&self, v: &Vector<T>) -> Vector<T> {
        let coords: Vec<T> = self.frame.iter().map(|f| self.kind.inner(f, v)).collect();
        let d = Vector::from_slice(&coords);
        d * d.norm().recip()
    }

    /// Point at distance `r` from the center along grid direction `dir`.
    pub fn point_along(&self, dir: &Vector<T>, r: T) -> Point<T> {
        let p = self.kind.radial_profile(r);
        let md = self.map_direction(dir);
        let x = match self.kind {
            SpaceformKind::Euclidean => self.center.coords.axpy(r, &md),
            _ => (self.center.coords * p.a).axpy(p.b, &md),
        };
        Point { kind: self.kind, coords: x }
    }

    /// Boundary point above node `i`.
    pub fn node_point(&self, i: usize) -> Point<T> {
        self.point_along(self.grid.direction(i), self.rho[i])
    }

    pub fn boundary_points(&self) -> Vec<Point<T>> {
        (0..self.len()).map(|i| self.node_point(i)).collect()
    }

    /// Chart jet of the embedded boundary at node `i`.
    pub(crate) fn surface_jet(&self, i: usize) -> SurfaceJet<T> {
        let n = self.dimension();
        let jet = self.grid.derivatives(i, &self.rho);
        let (xi, dxi) = self.grid.chart_direction(i, [T::zero(); 2]);
        let c = self.center.coords;
        let m = self.map_direction(&xi);
        let md = [self.map_direction(&dxi[0]), if n > 1 { self.map_direction(&dxi[1]) } else { Vector::zeros(c.len()) }];
        let p = self.kind.radial_profile(jet.value);
        let x = (c * p.a).axpy(p.b, &m);
        let x = match self.kind {
            SpaceformKind::Euclidean => c.axpy(jet.value, &m),
            _ => x,
        };
        let xr = (c * p.da).axpy(p.db, &m);
        let xrr = (c * p.dda).axpy(p.ddb, &m);
        let zero = Vector::zeros(c.len());
        let mut xi_ = [zero; 2];
        let mut xij = [[zero; 2]; 2];
        for a in 0..n {
            xi_[a] = (xr * jet.grad[a]).axpy(p.b, &md[a]);
        }
        for a in 0..n {
            for b in a..n {
                let mut v = (xrr * (jet.grad[a] * jet.grad[b])).axpy(jet.hess[a][b], &xr);
                v = v.axpy(p.db * jet.grad[a], &md[b]).axpy(p.db * jet.grad[b], &md[a]);
                if a == b {
                    // second chart derivative of the direction is -xi at the node
                    v = v.axpy(-p.b, &m);
                }
                xij[a][b] = v;
                xij[b][a] = v;
            }
        }
        SurfaceJet { x, xr, xi: xi_, xij }
    }

    /// Induced metric of the chart at node `i` and its determinant.
    pub(crate) fn metric_at(&self, jet: &SurfaceJet<T>) -> ([[T; 2]; 2], T) {
        let n = self.dimension();
        let mut g = [[T::zero(); 2]; 2];
        for a in 0..n {
            for b in 0..n {
                g[a][b] = self.kind.inner(&jet.xi[a], &jet.xi[b]);
            }
        }
        let det = if n == 1 { g[0][0] } else { g[0][0] * g[1][1] - g[0][1] * g[1][0] };
        (g, det)
    }

    /// Per-node boundary area element `sqrt(det g)` with respect to the
    /// unit-sphere measure.
    pub fn area_density(&self) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let jet = self.surface_jet(i);
                let (_, det) = self.metric_at(&jet);
                det.max(T::zero()).sqrt()
            })
            .collect()
    }

    /// Boundary area and enclosed volume. For `n = 1` these are the
    /// perimeter and the enclosed area.
    pub fn measure(&self) -> Measure<T> {
        let w = self.grid.weights();
        let dens = self.area_density();
        let n = self.dimension();
        let mut area = T::zero();
        let mut volume = T::zero();
        for i in 0..self.len() {
            area += w[i] * dens[i];
            volume += w[i] * warped_volume(self.kind, n, self.rho[i]);
        }
        Measure { area, volume }
    }

    /// Radial function interpolated along grid direction `dir` from the
    /// local fit of the nearest node.
    pub fn rho_along(&self, dir: &Vector<T>) -> T {
        let i = self.grid.nearest_node(dir, 0);
        let s = self.grid.to_chart(i, dir).unwrap_or([T::zero(); 2]);
        let fit = self.grid.fit(i, &self.rho);
        self.grid.eval_fit(&fit, s).0
    }

    /// Whether `p` lies in the body.
    pub fn contains(&self, p: &Point<T>) -> Result<bool> {
        if p.kind != self.kind || p.coords.len() != self.center.coords.len() {
            return Err(GeomError::domain("point belongs to a different space"));
        }
        if self.kind == SpaceformKind::Spherical && (p.coords + self.center.coords).max_abs() < lit(1e-12) {
            return Err(GeomError::domain("antipodal point has no direction"));
        }
        let (v, d) = log_raw(&self.center, p);
        if d == T::zero() {
            return Ok(true);
        }
        let dir = self.unmap_direction(&v);
        Ok(d <= self.rho_along(&dir))
    }

    pub fn max_rho(&self) -> T {
        self.rho.iter().fold(T::zero(), |m, r| m.max(*r))
    }

    pub fn to_document(&self) -> BodyDocument<T> {
        let default_frame = self.center.frame();
        let custom = default_frame.iter().zip(&self.frame).any(|(a, b)| a != b);
        BodyDocument {
            kind: self.kind,
            n: self.dimension(),
            center: self.center.coords.to_vec(),
            grid: self.grid.spec(),
            rho: self.rho.clone(),
            frame: custom.then(|| self.frame.iter().map(|f| f.to_vec()).collect()),
        }
    }

    pub fn from_document(doc: &BodyDocument<T>, grid: Option<Arc<SphereGrid<T>>>) -> Result<Self> {
        let grid = match grid {
            Some(g) if g.spec() == doc.grid => g,
            _ => Arc::new(SphereGrid::new(doc.grid)?),
        };
        if grid.dimension() != doc.n {
            return Err(GeomError::Invalid(format!("grid descriptor has dimension {} but n = {}", grid.dimension(), doc.n)));
        }
        let center = Point::new(doc.kind, &doc.center)?;
        let frame = match &doc.frame {
            Some(f) => f.iter().map(|v| Vector::from_slice(v)).collect(),
            None => center.frame(),
        };
        Self::with_frame(doc.kind, center, frame, grid, doc.rho.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("body serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BodyDocument<T> = serde_json::from_str(s).map_err(|e| GeomError::Invalid(e.to_string()))?;
        Self::from_document(&doc, None)
    }
}

fn check_rho<T: Real>(kind: SpaceformKind, rho: &[T]) -> Result<()> {
    for (i, r) in rho.iter().enumerate() {
        if !(*r > T::zero()) || !r.is_finite() {
            return Err(GeomError::domain(format!("rho[{i}] = {r} is not positive")));
        }
        if kind == SpaceformKind::Spherical && *r >= T::FRAC_PI_2() {
            return Err(GeomError::domain(format!("rho[{i}] = {r} leaves the open hemisphere")));
        }
    }
    Ok(())
}

/// Boundary area and enclosed volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure<T> {
    pub area: T,
    pub volume: T,
}

/// JSON form of a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BodyDocument<T: Real> {
    pub kind: SpaceformKind,
    pub n: usize,
    pub center: Vec<T>,
    pub grid: GridSpec,
    pub rho: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<T>>>,
}

pub fn make_ball<T: Real>(kind: SpaceformKind, radius: T, grid: Arc<SphereGrid<T>>, center: Point<T>) -> Result<RadialBody<T>> {
    if !(radius > T::zero()) {
        return Err(GeomError::domain(format!("ball radius {radius} must be positive")));
    }
    if kind == SpaceformKind::Spherical && radius >= T::FRAC_PI_2() {
        return Err(GeomError::domain("spherical ball must lie in an open hemisphere"));
    }
    let n = grid.len();
    RadialBody::new(kind, center, grid, vec![radius; n])
}

/// `R + amplitude * profile`, where the profile is `cos(mode * theta)` for
/// `n = 1` and the Legendre polynomial `P_mode(xi_3)` for `n = 2`.
pub fn make_perturbed_ball<T: Real>(
    kind: SpaceformKind,
    radius: T,
    grid: Arc<SphereGrid<T>>,
    center: Point<T>,
    amplitude: T,
    mode: u32,
) -> Result<RadialBody<T>> {
    let n = grid.dimension();
    RadialBody::from_fn(kind, center, grid, |d| radius + amplitude * harmonic_profile(n, mode, d))
}

pub(crate) fn harmonic_profile<T: Real>(n: usize, mode: u32, d: &Vector<T>) -> T {
    if n == 1 {
        (lit::<T>(mode as f64) * d[1].atan2(d[0])).cos()
    } else {
        legendre(mode, d[2])
    }
}

fn legendre<T: Real>(l: u32, x: T) -> T {
    let mut p0 = T::one();
    if l == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 1..l {
        let k = lit::<T>(k as f64);
        let p2 = ((lit::<T>(2.0) * k + T::one()) * x * p1 - k * p0) / (k + T::one());
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Euclidean planar ellipse with semi-axes `a` (first axis) and `b`, centred at the origin.
pub fn make_ellipse<T: Real>(a: T, b: T, grid: Arc<SphereGrid<T>>) -> Result<RadialBody<T>> {
    if grid.dimension() != 1 || !(a > T::zero() && b > T::zero()) {
        return Err(GeomError::domain("ellipse needs a circle grid and positive semi-axes"));
    }
    let kind = SpaceformKind::Euclidean;
    RadialBody::from_fn(kind, Point::origin(kind, 2), grid, |d| {
        a * b / ((b * d[0]).powi(2) + (a * d[1]).powi(2)).sqrt()
    })
}

/// Body of a lens centred at its geodesic midpoint, with nodes whose stencil
/// straddles the rim flagged non-smooth.
pub fn make_lens_body<T: Real>(lens: &LensSpec<T>, grid: Arc<SphereGrid<T>>) -> Result<RadialBody<T>> {
    if !(lens.d > T::zero()) {
        return Err(GeomError::DegenerateLens);
    }
    let kind = lens.kind;
    let radius = lens.lambda_class.require_radius()?;
    let c = lens.midpoint();
    let frame = c.frame();
    let probe = RadialBody::with_frame(kind, c, frame, grid.clone(), vec![radius * lit(0.5); grid.len()])?;
    let mut rho = Vec::with_capacity(grid.len());
    let mut active = Vec::with_capacity(grid.len());
    for dir in grid.directions() {
        let inside = |r: T| {
            let x = probe.point_along(dir, r);
            distance_raw(&x, &lens.p) <= radius && distance_raw(&x, &lens.q) <= radius
        };
        let (mut lo, mut hi) = (T::zero(), radius);
        if inside(hi) {
            lo = hi;
        } else {
            for _ in 0..200 {
                let mid = (lo + hi) * lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if inside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let x = probe.point_along(dir, lo);
        active.push(distance_raw(&x, &lens.p) >= distance_raw(&x, &lens.q));
        rho.push(lo);
    }
    let body = probe.with_rho(rho)?;
    let flags = (0..grid.len())
        .map(|i| grid.stencil(i).iter().all(|&j| active[j] == active[i]))
        .collect();
    body.with_smooth_flags(flags)
}

/// Named closed-form reference bodies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", bound = "")]
pub enum ClosedForm<T: Real> {
    /// Geodesic ball of radius `radius` in an `(n + 1)`-dimensional spaceform.
    Ball { kind: SpaceformKind, n: usize, radius: T },
    /// Euclidean 3-space: segment of length `length` plus a ball of radius `1 / lambda`.
    Sausage { lambda: T, length: T },
    /// Euclidean plane: intersection of two discs of radius `1 / lambda` at centre distance `d`.
    Lens2d { lambda: T, d: T },
}

/// Area and volume of a closed form (perimeter and enclosed area in the plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClosedFormReference<T: Real> {
    pub shape: ClosedForm<T>,
    pub area: T,
    pub volume: T,
}

pub fn reference_closed_forms<T: Real>(shape: ClosedForm<T>) -> Result<ClosedFormReference<T>> {
    let pi = T::PI();
    let (area, volume) = match shape {
        ClosedForm::Ball { kind, n, radius } => {
            if !(radius > T::zero()) || !(1..=2).contains(&n) || (kind == SpaceformKind::Spherical && radius > pi) {
                return Err(GeomError::domain("ball parameters out of range"));
            }
            let s = unit_sphere_area::<T>(n);
            (s * warp(kind, radius).powi(n as i32), s * warped_volume(kind, n, radius))
        }
        ClosedForm::Sausage { lambda, length } => {
            if !(lambda > T::zero()) || !(length >= T::zero()) {
                return Err(GeomError::domain("sausage needs lambda > 0 and length >= 0"));
            }
            let four = lit::<T>(4.0);
            (
                four * pi / (lambda * lambda) + lit::<T>(2.0) * pi * length / lambda,
                four * pi / (lit::<T>(3.0) * lambda.powi(3)) + pi * length / (lambda * lambda),
            )
        }
        ClosedForm::Lens2d { lambda, d } => {
            if !(lambda > T::zero()) || !(d > T::zero()) || !(d * lambda < lit(2.0)) {
                return Err(GeomError::domain("lens2d needs lambda > 0 and 0 < d < 2 / lambda"));
            }
            let r = lambda.recip();
            let alpha = (d * lambda * lit(0.5)).acos();
            let two = lit::<T>(2.0);
            (lit::<T>(4.0) * alpha * r, r * r * (two * alpha - (two * alpha).sin()))
        }
    };
    Ok(ClosedFormReference { shape, area, volume })
}

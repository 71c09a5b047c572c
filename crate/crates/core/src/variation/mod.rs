//! Normal variations of radial boundaries: first and second variations of
//! area and volume, the stability operator and stability certificates.

mod deform;
mod fdcheck;
mod maximize;
mod perturb;

pub use deform::deform;
pub use maximize::{maximize_area, KappaExcess, MaximizeConfig, MaximizeMethod, MaximizeOutcome};
pub use fdcheck::{
    default_fd_steps, default_fd_tolerance, finite_difference_check, random_pair, FdReport, FdRow, FdSeries, MIN_ORDER,
};
pub use perturb::{
    fitted_step, linear_schedule, perturb_step, perturb_trajectory, solve_volume_constraint, BumpOptions, BumpPair, PerturbCase, PerturbEntry,
    PerturbMode, PerturbTrajectory,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::RadialBody;
use crate::curvature::{shape_operator, CurvatureReport};
use crate::error::{GeomError, Result};
use crate::linalg::Vector;
use crate::scalar::{lit, Real};
use crate::spaceform::{killing_field_sample, Point, TangentVector};

/// Direction along which boundary points are pushed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum PushDirection<T: Real> {
    /// The inward unit normal at each point.
    Normal,
    /// A fixed model vector, projected onto each tangent space.
    Fixed(Vector<T>),
}

/// Speed (and optional acceleration) along a push direction, per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariationField<T: Real> {
    pub v: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<T>>,
    pub direction: PushDirection<T>,
}

impl<T: Real> VariationField<T> {
    /// Normal field with speed `v` and zero acceleration.
    pub fn normal(v: Vec<T>) -> Self {
        VariationField { v, a: None, direction: PushDirection::Normal }
    }

    pub fn with_acceleration(mut self, a: Vec<T>) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_direction(mut self, direction: PushDirection<T>) -> Self {
        self.direction = direction;
        self
    }

    /// Nodes where `v` or `a` is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.v.len())
            .filter(|&i| self.v[i] != T::zero() || self.a.as_ref().is_some_and(|a| a[i] != T::zero()))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(|x| *x == T::zero()) && self.a.as_ref().is_none_or(|a| a.iter().all(|x| *x == T::zero()))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.v.len() != n || self.a.as_ref().is_some_and(|a| a.len() != n) {
            return Err(GeomError::Invalid(format!("variation field length does not match {n} nodes")));
        }
        Ok(())
    }
}

/// Push vector at a boundary point for unit speed.
pub(crate) fn push_vector<T: Real>(dir: &PushDirection<T>, x: &Point<T>, nu: &Vector<T>) -> Vector<T> {
    match dir {
        PushDirection::Normal => *nu,
        PushDirection::Fixed(u) => x.project_tangent(u),
    }
}

/// Normal speed `v <push, nu>` per node.
pub(crate) fn normal_speed<T: Real>(report: &CurvatureReport<T>, vf: &VariationField<T>) -> Vec<T> {
    report
        .nodes
        .iter()
        .zip(&vf.v)
        .map(|(c, v)| match &vf.direction {
            PushDirection::Normal => *v,
            PushDirection::Fixed(_) => {
                let p = push_vector(&vf.direction, &c.normal.base, &c.normal.vec);
                *v * c.normal.base.kind.inner(&p, &c.normal.vec)
            }
        })
        .collect()
}

/// `sum_i w_i sqrt(det g_i) f_i`.
pub(crate) fn integrate<T: Real>(body: &RadialBody<T>, report: &CurvatureReport<T>, f: &[T]) -> T {
    let w = body.grid().weights();
    let mut s = T::zero();
    for i in 0..f.len() {
        s += w[i] * report.nodes[i].area_density * f[i];
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation<T> {
    pub d_vol: T,
    pub d_area: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondVariation<T> {
    pub d2_vol: T,
    pub d2_area: T,
}

/// `dVol = -int v`, `dArea = -int v H` with `v` the normal speed.
pub fn first_variations<T: Real>(body: &RadialBody<T>, vf: &VariationField<T>) -> Result<FirstVariation<T>> {
    let report = shape_operator(body)?;
    first_variations_from(body, &report, vf)
}

pub fn first_variations_from<T: Real>(
    body: &RadialBody<T>,
    report: &CurvatureReport<T>,
    vf: &VariationField<T>,
) -> Result<FirstVariation<T>> {
    vf.check_len(body.len())?;
    let v = normal_speed(report, vf);
    let vh: Vec<T> = v.iter().zip(&report.nodes).map(|(v, c)| *v * c.mean).collect();
    Ok(FirstVariation { d_vol: -integrate(body, report, &v), d_area: -integrate(body, report, &vh) })
}

/// `d2Vol = int (v^2 H - a)`, `d2Area = int (-v T(v) + H^2 v^2 - a H)`;
/// requires a normal variation.
pub fn second_variations<T: Real>(body: &RadialBody<T>, vf: &VariationField<T>) -> Result<SecondVariation<T>> {
    let report = shape_operator(body)?;
    second_variations_from(body, &report, vf)
}

pub fn second_variations_from<T: Real>(
    body: &RadialBody<T>,
    report: &CurvatureReport<T>,
    vf: &VariationField<T>,
) -> Result<SecondVariation<T>> {
    vf.check_len(body.len())?;
    if vf.direction != PushDirection::Normal {
        return Err(GeomError::Invalid("second variations need a normal variation".into()));
    }
    let v = &vf.v;
    let tv = stability_operator_from(body, report, v);
    let zero = vec![T::zero(); v.len()];
    let a = vf.a.as_deref().unwrap_or(&zero);
    let mut vol = vec![T::zero(); v.len()];
    let mut area = vec![T::zero(); v.len()];
    for i in 0..v.len() {
        let h = report.nodes[i].mean;
        vol[i] = v[i] * v[i] * h - a[i];
        area[i] = -v[i] * tv[i] + h * h * v[i] * v[i] - a[i] * h;
    }
    Ok(SecondVariation { d2_vol: integrate(body, report, &vol), d2_area: integrate(body, report, &area) })
}

/// Laplace-Beltrami operator of the induced metric applied to a nodal field.
pub fn laplacian<T: Real>(body: &RadialBody<T>, report: &CurvatureReport<T>, f: &[T]) -> Vec<T> {
    let n = body.dimension();
    (0..f.len())
        .map(|i| {
            let jet = body.grid().derivatives(i, f);
            let c = &report.nodes[i];
            let mut s = T::zero();
            for a in 0..n {
                for b in 0..n {
                    s += c.metric_inv[a][b] * jet.hess[a][b];
                }
                s -= c.gamma[a] * jet.grad[a];
            }
            s
        })
        .collect()
}

/// `T f = Laplace f + Ric(nu, nu) f + tr(A^2) f`.
pub fn stability_operator_apply<T: Real>(body: &RadialBody<T>, f: &[T]) -> Result<Vec<T>> {
    if f.len() != body.len() {
        return Err(GeomError::Invalid("field length mismatch".into()));
    }
    let report = shape_operator(body)?;
    Ok(stability_operator_from(body, &report, f))
}

pub fn stability_operator_from<T: Real>(body: &RadialBody<T>, report: &CurvatureReport<T>, f: &[T]) -> Vec<T> {
    let ric: T = body.kind().ricci_normal(body.dimension());
    let lap = laplacian(body, report, f);
    lap.iter()
        .zip(f)
        .zip(&report.nodes)
        .map(|((l, f), c)| *l + (ric + c.trace_a2) * *f)
        .collect()
}

fn check_support<T: Real>(omega: &[bool], f: &[T]) -> Result<()> {
    if omega.len() != f.len() {
        return Err(GeomError::Invalid("region mask length mismatch".into()));
    }
    if let Some(i) = (0..f.len()).find(|&i| !omega[i] && f[i] != T::zero()) {
        return Err(GeomError::Invalid(format!("test function is nonzero at node {i} outside the region")));
    }
    Ok(())
}

/// `-int_Omega f T(f)` for `f` vanishing outside `omega`.
pub fn stability_quadratic_form<T: Real>(body: &RadialBody<T>, omega: &[bool], f: &[T]) -> Result<T> {
    check_support(omega, f)?;
    let report = shape_operator(body)?;
    Ok(quadratic_form_from(body, &report, f))
}

pub(crate) fn quadratic_form_from<T: Real>(body: &RadialBody<T>, report: &CurvatureReport<T>, f: &[T]) -> T {
    let tf = stability_operator_from(body, report, f);
    let prod: Vec<T> = f.iter().zip(&tf).map(|(a, b)| -*a * *b).collect();
    integrate(body, report, &prod)
}

/// Outcome of [`supersolution_stability_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionCertificate<T> {
    /// `max_Omega T(u) <= tol`.
    pub certified: bool,
    pub max_tu: T,
    /// Random mean-zero test functions evaluated (zero when not certified).
    pub trials: usize,
    /// Smallest quadratic form value over the trials divided by `int f^2`.
    pub min_form_ratio: T,
    /// Every trial gave a positive quadratic form.
    pub cross_validated: bool,
}

/// Number of random test functions drawn by [`supersolution_stability_test`].
pub const SUPERSOLUTION_TRIALS: usize = 100;

/// Certifies strong stability on `omega` from a positive `u` with `T(u) <= tol`.
pub fn supersolution_stability_test<T: Real>(
    body: &RadialBody<T>,
    omega: &[bool],
    u: &[T],
    tol: T,
    seed: u64,
) -> Result<SupersolutionCertificate<T>> {
    if omega.len() != body.len() || u.len() != body.len() {
        return Err(GeomError::Invalid("length mismatch".into()));
    }
    if let Some(i) = (0..u.len()).find(|&i| omega[i] && !(u[i] > T::zero())) {
        return Err(GeomError::domain(format!("u is not positive at node {i} of the region")));
    }
    let report = shape_operator(body)?;
    let tu = stability_operator_from(body, &report, u);
    let interior = interior_mask(body, omega);
    let max_tu = (0..u.len()).filter(|&i| interior[i]).fold(T::neg_infinity(), |m, i| m.max(tu[i]));
    let certified = max_tu <= tol;
    let mut out = SupersolutionCertificate {
        certified,
        max_tu,
        trials: 0,
        min_form_ratio: T::infinity(),
        cross_validated: false,
    };
    if !certified {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_positive = true;
    for _ in 0..SUPERSOLUTION_TRIALS {
        let Some(phi) = random_mean_zero(body, &report, &interior, u, &mut rng) else {
            break;
        };
        let q = quadratic_form_from(body, &report, &phi);
        let sq: Vec<T> = phi.iter().map(|x| *x * *x).collect();
        let ratio = q / integrate(body, &report, &sq);
        out.min_form_ratio = out.min_form_ratio.min(ratio);
        all_positive &= ratio > T::zero();
        out.trials += 1;
    }
    out.cross_validated = all_positive && out.trials == SUPERSOLUTION_TRIALS;
    Ok(out)
}

/// Nodes of `omega` whose whole stencil lies in `omega`.
pub fn interior_mask<T: Real>(body: &RadialBody<T>, omega: &[bool]) -> Vec<bool> {
    (0..omega.len())
        .map(|i| omega[i] && body.grid().stencil(i).iter().all(|&j| omega[j]))
        .collect()
}

/// Smooth compactly supported bump `exp(1 - 1/(1 - s^2))` of the chord distance
/// `|xi - xi_c| / radius` between grid directions (peak value 1).
pub fn direction_bump<T: Real>(body: &RadialBody<T>, center: usize, radius: T) -> Vec<T> {
    let c = *body.grid().direction(center);
    body.grid()
        .directions()
        .iter()
        .map(|d| bump_profile((*d - c).norm() / radius))
        .collect()
}

pub(crate) fn bump_profile<T: Real>(s: T) -> T {
    if s >= T::one() {
        T::zero()
    } else {
        (T::one() - (T::one() - s * s).recip()).exp()
    }
}

/// `u * (sum_k c_k bump_k)` corrected to mean zero, supported in `interior`.
fn random_mean_zero<T: Real>(
    body: &RadialBody<T>,
    report: &CurvatureReport<T>,
    interior: &[bool],
    u: &[T],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<T>> {
    let grid = body.grid();
    let inside: Vec<usize> = (0..interior.len()).filter(|&i| interior[i]).collect();
    let outside: Vec<usize> = (0..interior.len()).filter(|&i| !interior[i]).collect();
    let min_radius = grid.spacing() * lit(4.0);
    // room around each candidate center
    let room = |i: usize| {
        let d = grid.direction(i);
        outside
            .iter()
            .map(|&j| (*grid.direction(j) - *d).norm())
            .fold(T::infinity(), |m, x| m.min(x))
    };
    let centers: Vec<(usize, T)> = inside.iter().map(|&i| (i, room(i))).filter(|(_, r)| *r > min_radius).collect();
    if centers.len() < 2 {
        return None;
    }
    let count = rng.gen_range(2..=4);
    let mut bumps = Vec::with_capacity(count);
    for _ in 0..count {
        let (c, r) = centers[rng.gen_range(0..centers.len())];
        let frac: f64 = rng.gen_range(0.5..0.95);
        let radius = (r * lit(frac)).max(min_radius);
        let coef: f64 = rng.gen_range(-1.0..1.0);
        let b: Vec<T> = direction_bump(body, c, radius).iter().zip(u).map(|(b, u)| *b * *u).collect();
        bumps.push((lit::<T>(coef), b));
    }
    let mut f = vec![T::zero(); u.len()];
    for (c, b) in &bumps {
        for i in 0..f.len() {
            f[i] += *c * b[i];
        }
    }
    let base = &bumps[0].1;
    let scale = integrate(body, report, &f) / integrate(body, report, base);
    for i in 0..f.len() {
        f[i] -= scale * base[i];
    }
    if f.iter().all(|x| x.abs() < lit(1e-12)) {
        return None;
    }
    Some(f)
}

/// Outcome of [`killing_stability_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillingCertificate<T> {
    pub stable: bool,
    /// `min_Omega <nu, X>`.
    pub min_normal_component: T,
}

/// Strong stability of `omega` from a Killing field with positive normal component.
pub fn killing_stability_test<T: Real>(
    body: &RadialBody<T>,
    omega: &[bool],
    direction: &TangentVector<T>,
) -> Result<KillingCertificate<T>> {
    let report = shape_operator(body)?;
    let u = killing_normal_component(&report, direction)?;
    let min = (0..u.len()).filter(|&i| omega[i]).fold(T::infinity(), |m, i| m.min(u[i]));
    Ok(KillingCertificate { stable: min > T::zero(), min_normal_component: min })
}

/// `<nu_p, X_p>` per node for the Killing field generated by `direction`.
pub fn killing_normal_component<T: Real>(report: &CurvatureReport<T>, direction: &TangentVector<T>) -> Result<Vec<T>> {
    report
        .nodes
        .iter()
        .map(|c| {
            let x = killing_field_sample(&c.normal.base, direction)?;
            Ok(c.normal.base.kind.inner(&x.vec, &c.normal.vec))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::body::make_ball;
    use crate::grid::SphereGrid;
    use crate::spaceform::SpaceformKind::*;

    fn unit_sphere(level: u32) -> RadialBody<f64> {
        let g = Arc::new(SphereGrid::icosphere(level).unwrap());
        make_ball(Euclidean, 1.0, g, Point::origin(Euclidean, 3)).unwrap()
    }

    #[test]
    fn ball_variations() {
        let b = unit_sphere(3);
        let vf = VariationField::normal(vec![1.0; b.len()]);
        let fv = first_variations(&b, &vf).unwrap();
        let pi = std::f64::consts::PI;
        assert!((fv.d_vol + 4.0 * pi).abs() < 1e-10);
        assert!((fv.d_area + 8.0 * pi).abs() < 1e-10);
        let sv = second_variations(&b, &vf).unwrap();
        assert!((sv.d2_vol - 8.0 * pi).abs() < 1e-10);
        assert!((sv.d2_area - 8.0 * pi).abs() < 1e-10);
    }

    #[test]
    fn stability_on_unit_sphere() {
        let b = unit_sphere(4);
        let one = vec![1.0; b.len()];
        let t1 = stability_operator_apply(&b, &one).unwrap();
        assert!(t1.iter().all(|x| (x - 2.0).abs() < 1e-12));
        let z: Vec<f64> = b.grid().directions().iter().map(|d| d[2]).collect();
        let tz = stability_operator_apply(&b, &z).unwrap();
        assert!(tz.iter().all(|x| x.abs() < 5e-3));
        let all = vec![true; b.len()];
        let q1 = stability_quadratic_form(&b, &all, &z).unwrap();
        let rep = shape_operator(&b).unwrap();
        let z2: Vec<f64> = z.iter().map(|x| x * x).collect();
        let l2 = integrate(&b, &rep, &z2);
        assert!(q1.abs() < 1e-3 * l2, "{q1}");
        let p2: Vec<f64> = b.grid().directions().iter().map(|d| 1.5 * d[2] * d[2] - 0.5).collect();
        let q2 = stability_quadratic_form(&b, &all, &p2).unwrap();
        let p22: Vec<f64> = p2.iter().map(|x| x * x).collect();
        assert!((q2 / integrate(&b, &rep, &p22) - 4.0).abs() < 1e-2);
    }

    #[test]
    fn killing_examples() {
        let b = unit_sphere(3);
        let cap: Vec<bool> = b.grid().directions().iter().map(|d| d[2] < -0.5).collect();
        let base = Point::origin(Euclidean, 3);
        let dir = TangentVector::new(base, Vector::from_slice(&[0.0, 0.0, 1.0])).unwrap();
        assert!(killing_stability_test(&b, &cap, &dir).unwrap().stable);
        let all = vec![true; b.len()];
        assert!(!killing_stability_test(&b, &all, &dir).unwrap().stable);
    }

    #[test]
    fn supersolution_examples() {
        let b = unit_sphere(3);
        let all = vec![true; b.len()];
        let one = vec![1.0; b.len()];
        let c = supersolution_stability_test(&b, &all, &one, 1e-6, 1).unwrap();
        assert!(!c.certified && (c.max_tu - 2.0).abs() < 1e-9);
        let z: Vec<f64> = b.grid().directions().iter().map(|d| d[2]).collect();
        assert!(supersolution_stability_test(&b, &all, &z, 1e-3, 1).is_err());
    }
}

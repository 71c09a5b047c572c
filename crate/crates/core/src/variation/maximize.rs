use serde::{Deserialize, Serialize};

use crate::body::RadialBody;
use crate::curvature::{default_tolerance, lambda_check_from, shape_operator, strict_point_from};
use crate::error::{GeomError, Result};
use crate::linalg::Vector;
use crate::scalar::{lit, Real};
use crate::spaceform::{
    distance_raw, exp_raw, log_raw, radius_of_lambda, ray_exit, warped_volume, Point, SpaceformKind,
};

use super::perturb::{perturb_step, BumpOptions, BumpPair, PerturbEntry, PerturbMode, PerturbTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaximizeMethod {
    /// Projected gradient on the boundary polygon, followed by the hull of
    /// balls of radius `R(lambda)` and an inner parallel volume fix. `n = 1`.
    Hull,
    /// Repeated volume-preserving two-bump steps.
    Bumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MaximizeConfig<T: Real> {
    pub method: MaximizeMethod,
    pub max_iterations: usize,
    /// First trial step of every iteration is `min(2 t_prev, initial_step)`.
    pub initial_step: T,
    pub max_halvings: usize,
    /// Least relative area gain of an accepted step.
    pub stall_tol: T,
    /// Relative volume tolerance of every step.
    pub vol_tol: T,
    pub kappa_tol: T,
    pub bumps: BumpOptions<T>,
}

impl<T: Real> MaximizeConfig<T> {
    pub fn for_dimension(n: usize) -> Self {
        let hull = n == 1;
        MaximizeConfig {
            method: if hull { MaximizeMethod::Hull } else { MaximizeMethod::Bumps },
            max_iterations: if hull { 3000 } else { 100 },
            initial_step: if hull { lit(1e-2) } else { lit(1e-4) },
            max_halvings: 20,
            stall_tol: lit(1e-12),
            vol_tol: if hull { lit(1e-12) } else { lit(1e-8) },
            kappa_tol: default_tolerance(n),
            bumps: BumpOptions::for_dimension(n),
        }
    }
}

/// `kappa_1 - lambda` on the nodes flagged smooth, with their boundary
/// measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaExcess<T> {
    pub nodes: Vec<usize>,
    pub excess: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> KappaExcess<T> {
    pub fn of(body: &RadialBody<T>, lambda: T) -> Result<Self> {
        let report = shape_operator(body)?;
        let w = body.grid().weights();
        let flags = body.smooth_flags();
        let nodes: Vec<usize> = (0..body.len()).filter(|&i| flags[i]).collect();
        Ok(KappaExcess {
            excess: nodes.iter().map(|&i| report.nodes[i].kappa_min() - lambda).collect(),
            weights: nodes.iter().map(|&i| w[i] * report.nodes[i].area_density).collect(),
            nodes,
        })
    }

    /// Share of the smooth boundary measure with `kappa_1 - lambda <= bound`.
    pub fn fraction_within(&self, bound: T) -> T {
        let total: T = self.weights.iter().copied().sum();
        if total == T::zero() {
            return T::zero();
        }
        let ok = self.excess.iter().zip(&self.weights).filter(|(e, _)| **e <= bound).fold(T::zero(), |s, (_, w)| s + *w);
        ok / total
    }

    pub fn smooth_measure(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn min(&self) -> T {
        self.excess.iter().fold(T::infinity(), |m, e| m.min(*e))
    }

    pub fn max(&self) -> T {
        self.excess.iter().fold(T::neg_infinity(), |m, e| m.max(*e))
    }
}

#[derive(Debug, Clone)]
pub struct MaximizeOutcome<T: Real> {
    pub body: RadialBody<T>,
    pub trajectory: PerturbTrajectory<T>,
    pub excess: KappaExcess<T>,
}

/// Volume-constrained area ascent within the lambda-convex bodies.
///
/// Runtime failures end the run and are kept in `trajectory.stopped`; the
/// best body so far is always returned. A seed without a strict point ends
/// with zero steps and a `TrivialBody` note.
pub fn maximize_area<T: Real>(body: &RadialBody<T>, lambda: T, cfg: &MaximizeConfig<T>) -> Result<MaximizeOutcome<T>> {
    let report = shape_operator(body)?;
    let check = lambda_check_from(&report, lambda, cfg.kappa_tol);
    if !check.is_lambda_convex {
        return Err(GeomError::domain(format!(
            "seed is not lambda-convex (min kappa {} at node {})",
            check.min_kappa, check.min_node
        )));
    }
    let seed = PerturbEntry {
        step: 0,
        t: T::zero(),
        body: body.clone(),
        measure: body.measure(),
        b: T::zero(),
        min_kappa: check.min_kappa,
        case: None,
    };
    let mut traj = PerturbTrajectory { entries: vec![seed], case_used: None, stopped: None };
    if let Err(e) = strict_point_from(&report, lambda, cfg.kappa_tol) {
        traj.stopped = Some(match e {
            GeomError::NoStrictPoint { max_kappa, .. } => {
                GeomError::TrivialBody(format!("no node has kappa_1 > lambda + tol (max kappa_1 = {max_kappa})"))
            }
            e => e,
        });
        return finish(body.clone(), traj, lambda);
    }
    match cfg.method {
        MaximizeMethod::Hull => {
            if body.dimension() != 1 {
                return Err(GeomError::Invalid("hull method needs n = 1".into()));
            }
            let radius = radius_of_lambda(body.kind(), lambda)?.require_radius()?;
            hull_ascent(body, lambda, radius, cfg, &mut traj);
        }
        MaximizeMethod::Bumps => bump_ascent(body, lambda, cfg, &mut traj),
    }
    let best = traj.entries.last().map(|e| e.body.clone()).unwrap_or_else(|| body.clone());
    finish(best, traj, lambda)
}

fn finish<T: Real>(body: RadialBody<T>, trajectory: PerturbTrajectory<T>, lambda: T) -> Result<MaximizeOutcome<T>> {
    let excess = KappaExcess::of(&body, lambda)?;
    Ok(MaximizeOutcome { body, trajectory, excess })
}

fn bump_ascent<T: Real>(seed: &RadialBody<T>, lambda: T, cfg: &MaximizeConfig<T>, traj: &mut PerturbTrajectory<T>) {
    let mut current = seed.clone();
    let mut area = seed.measure().area;
    let mut t_last = cfg.initial_step;
    for it in 1..=cfg.max_iterations {
        let bumps = match BumpPair::select(&current, lambda, PerturbMode::Auto, &cfg.bumps) {
            Ok(b) => b,
            Err(e) => {
                traj.stopped = Some(e);
                return;
            }
        };
        let mut t = (t_last * lit(2.0)).min(cfg.initial_step);
        let mut last_err = None;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            match perturb_step(&current, lambda, &bumps, t, cfg.vol_tol, cfg.kappa_tol) {
                Ok(e) if e.measure.area - area >= cfg.stall_tol * area => {
                    accepted = Some(e);
                    break;
                }
                Ok(_) => last_err = Some(GeomError::NoBracket("area gain below the stall tolerance".into())),
                Err(e) => last_err = Some(e),
            }
            t = t * lit(0.5);
        }
        match accepted {
            Some(mut e) => {
                e.step = it;
                area = e.measure.area;
                current = e.body.clone();
                t_last = t;
                traj.entries.push(e);
            }
            None => {
                traj.stopped = last_err;
                return;
            }
        }
    }
}

fn hull_ascent<T: Real>(
    seed: &RadialBody<T>,
    lambda: T,
    radius: T,
    cfg: &MaximizeConfig<T>,
    traj: &mut PerturbTrajectory<T>,
) {
    let target = seed.measure().volume;
    let mut current = seed.clone();
    let mut area = seed.measure().area;
    let mut t_last = cfg.initial_step;
    for it in 1..=cfg.max_iterations {
        let g = ascent_direction(&current);
        let mut t = (t_last * lit(2.0)).min(cfg.initial_step);
        let mut last_err = None;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            match hull_step(&current, &g, t, radius, target, cfg.vol_tol) {
                Ok(HullStep { body: moved, shrink: s, clean }) => match masked_min_kappa(&moved, &clean) {
                    Ok(k) if k < lambda - cfg.kappa_tol => {
                        last_err = Some(GeomError::ConvexityExit {
                            min_kappa: k.as_f64(),
                            lambda: lambda.as_f64(),
                            tol: cfg.kappa_tol.as_f64(),
                        })
                    }
                    Ok(k) => {
                        let m = moved.measure();
                        if m.area - area >= cfg.stall_tol * area {
                            accepted = Some(PerturbEntry { step: it, t, body: moved, measure: m, b: s, min_kappa: k, case: None });
                            break;
                        }
                        last_err = Some(GeomError::NoBracket("area gain below the stall tolerance".into()));
                    }
                    Err(e) => last_err = Some(e),
                },
                Err(e) => last_err = Some(e),
            }
            t = t * lit(0.5);
        }
        match accepted {
            Some(e) => {
                area = e.measure.area;
                current = e.body.clone();
                t_last = t;
                traj.entries.push(e);
            }
            None => {
                traj.stopped = last_err;
                return;
            }
        }
    }
}

fn masked_min_kappa<T: Real>(body: &RadialBody<T>, mask: &[bool]) -> Result<T> {
    let report = shape_operator(body)?;
    Ok((0..body.len()).filter(|&i| mask[i]).fold(T::infinity(), |m, i| m.min(report.nodes[i].kappa_min())))
}

/// Radial ascent direction of the boundary polygon's length with the
/// first-order volume change projected out, scaled to unit max norm.
fn ascent_direction<T: Real>(body: &RadialBody<T>) -> Vec<T> {
    let kind = body.kind();
    let n = body.len();
    let pts = body.boundary_points();
    let w = body.grid().weights();
    let dirs = body.grid().directions();
    let c = body.center().coords;
    let mut dp = vec![T::zero(); n];
    let mut dv = vec![T::zero(); n];
    for i in 0..n {
        let r = body.rho()[i];
        let p = kind.radial_profile(r);
        let m = body.map_direction(&dirs[i]);
        let xr = match kind {
            SpaceformKind::Euclidean => m,
            _ => (c * p.da).axpy(p.db, &m),
        };
        let mut pull = T::zero();
        for j in [(i + 1) % n, (i + n - 1) % n] {
            let (u, d) = log_raw(&pts[i], &pts[j]);
            if d > T::zero() {
                pull += kind.inner(&xr, &u) / d;
            }
        }
        dp[i] = -pull;
        dv[i] = w[i] * p.b;
    }
    let mu = dp.iter().zip(&dv).map(|(a, b)| *a * *b).sum::<T>() / dv.iter().map(|b| *b * *b).sum::<T>();
    let g: Vec<T> = dp.iter().zip(&dv).map(|(a, b)| *a - mu * *b).collect();
    let scale = g.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return g;
    }
    g.into_iter().map(|x| x / scale).collect()
}

struct HullStep<T: Real> {
    body: RadialBody<T>,
    shrink: T,
    clean: Vec<bool>,
}

/// Moves the radii by `t g`, takes the hull of balls of radius `radius`
/// over the moved points, and shrinks those balls to restore `target`
/// volume. Returns the resampled body and the shrink distance.
fn hull_step<T: Real>(
    body: &RadialBody<T>,
    g: &[T],
    t: T,
    radius: T,
    target: T,
    vol_tol: T,
) -> Result<HullStep<T>> {
    let n = body.len();
    let dirs = body.grid().directions();
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let r = body.rho()[i] + t * g[i];
        if !(r > T::zero()) {
            return Err(GeomError::GraphFailure { node: i, reason: "radius became non-positive".into() });
        }
        pts.push(body.point_along(&dirs[i], r));
    }
    let o = *body.center();
    let verts = ball_hull(&pts, &o, radius)
        .ok_or_else(|| GeomError::Invalid("moved points admit no hull of radius R(lambda)".into()))?;
    let m = verts.len();
    let mut centers = Vec::with_capacity(m);
    for k in 0..m {
        let c = arc_center(&pts[verts[k]], &pts[verts[(k + 1) % m]], &o, radius)
            .ok_or_else(|| GeomError::Invalid("hull arc longer than a half circle".into()))?;
        if distance_raw(&o, &c) >= radius {
            return Err(GeomError::Invalid("body center left a hull ball".into()));
        }
        centers.push(c);
    }
    // owning arc of every ray at s = 0
    let mut owner = vec![0usize; n];
    for k in 0..m {
        let (a, b) = (verts[k], verts[(k + 1) % m]);
        let mut j = a;
        while j != b {
            owner[j] = k;
            j = (j + 1) % n;
        }
    }
    let rays: Vec<Vector<T>> = dirs.iter().map(|d| body.map_direction(d)).collect();
    let resample = |s: T| -> Option<(Vec<T>, Vec<usize>)> {
        let mut rho = Vec::with_capacity(n);
        let mut arc = Vec::with_capacity(n);
        for j in 0..n {
            let mut best: Option<(T, usize)> = None;
            for off in 0..5 {
                let k = (owner[j] + m + off - 2) % m;
                let r = ray_exit(&o, &rays[j], &centers[k], radius - s)?;
                if best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, k));
                }
            }
            let (r, k) = best?;
            rho.push(r);
            arc.push(k);
        }
        Some((rho, arc))
    };
    let w = body.grid().weights();
    let kind = body.kind();
    let volume = |rho: &[T]| rho.iter().zip(w).map(|(r, w)| *w * warped_volume(kind, 1, *r)).sum::<T>();
    let fvol = |s: T| resample(s).map(|(rho, _)| volume(&rho) - target);
    let tol = vol_tol * target;
    let f0 = fvol(T::zero()).ok_or_else(|| GeomError::Invalid("ray missed a hull ball".into()))?;
    if f0 < -tol {
        return Err(GeomError::NoBracket("hull volume below the target".into()));
    }
    let s = if f0 <= tol {
        T::zero()
    } else {
        // Illinois iteration on [0, hi] with f(0) > 0 > f(hi)
        let (mut a, mut fa) = (T::zero(), f0);
        let mut b = radius * lit(1e-4);
        let mut fb = fvol(b).ok_or_else(|| GeomError::NoBracket("shrunk hull invalid".into()))?;
        let mut grow = 0;
        while fb > T::zero() {
            a = b;
            fa = fb;
            b = b * lit(2.0);
            grow += 1;
            if grow > 40 || b >= radius {
                return Err(GeomError::NoBracket("no volume bracket for the hull shrink".into()));
            }
            fb = fvol(b).ok_or_else(|| GeomError::NoBracket("shrunk hull invalid".into()))?;
        }
        let mut side = 0i8;
        let mut s = b;
        for _ in 0..200 {
            s = (a * fb - b * fa) / (fb - fa);
            let fs = fvol(s).ok_or_else(|| GeomError::NoBracket("shrunk hull invalid".into()))?;
            if fs.abs() <= tol {
                break;
            }
            if fs > T::zero() {
                a = s;
                fa = fs;
                if side == 1 {
                    fb = fb * lit(0.5);
                }
                side = 1;
            } else {
                b = s;
                fb = fs;
                if side == -1 {
                    fa = fa * lit(0.5);
                }
                side = -1;
            }
        }
        s
    };
    let (rho, arc) = resample(s).ok_or_else(|| GeomError::Invalid("ray missed a hull ball".into()))?;
    // Two masks over the rays. `clean`: the stencil lies on a single hull
    // ball. Smooth flags: the stencil crosses no vertex whose tangents turn
    // by more than lambda times one grid spacing, which the fits cannot
    // resolve as curvature.
    let ds = body.grid().spacing() * body.rho().iter().fold(T::infinity(), |a, r| a.min(*r));
    let mut label: Vec<usize> = (0..m).collect();
    for k in 1..m {
        if distance_raw(&centers[k], &centers[k - 1]) <= ds {
            label[k] = label[k - 1];
        }
    }
    if m > 1 && distance_raw(&centers[0], &centers[m - 1]) <= ds {
        let (from, to) = (label[m - 1], label[0]);
        label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
    }
    let grid = body.grid();
    let clean = (0..n).map(|i| grid.stencil(i).iter().all(|&j| arc[j] == arc[i])).collect();
    let flags = (0..n).map(|i| grid.stencil(i).iter().all(|&j| label[arc[j]] == label[arc[i]])).collect();
    Ok(HullStep { body: body.with_rho(rho)?.with_smooth_flags(flags)?, shrink: s, clean })
}

/// Indices (in angular order) of the points that are vertices of the hull
/// of balls of radius `radius`. Points must be ordered by angle about `o`.
fn ball_hull<T: Real>(pts: &[Point<T>], o: &Point<T>, radius: T) -> Option<Vec<usize>> {
    let n = pts.len();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut alive = vec![true; n];
    let mut count = n;
    let mut work: Vec<usize> = (0..n).rev().collect();
    let step = T::TAU() / lit(n as f64);
    let slack = T::one() + lit(1e-12);
    while let Some(i) = work.pop() {
        if !alive[i] || count <= 3 {
            continue;
        }
        let (a, b) = (prev[i], next[i]);
        let span = step * lit(((b + n - a) % n) as f64);
        if span >= T::PI() {
            continue;
        }
        let Some(c) = arc_center(&pts[a], &pts[b], o, radius) else { continue };
        if distance_raw(&pts[i], &c) <= radius * slack {
            alive[i] = false;
            count -= 1;
            next[a] = b;
            prev[b] = a;
            work.push(a);
            work.push(b);
        }
    }
    let verts: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    (verts.len() >= 2).then_some(verts)
}

/// Center of the circle of radius `radius` through `a` and `b` lying on the
/// same side of the chord as `o`.
fn arc_center<T: Real>(a: &Point<T>, b: &Point<T>, o: &Point<T>, radius: T) -> Option<Point<T>> {
    let kind = a.kind;
    let (v, d) = log_raw(a, b);
    let half = d * lit(0.5);
    if !(half < radius) || d == T::zero() {
        return None;
    }
    let mid = exp_raw(a, &(v * lit(0.5)));
    let (u, du) = log_raw(&mid, b);
    let u = u * du.recip();
    let (w, _) = log_raw(&mid, o);
    let nrm = w.axpy(-kind.inner(&w, &u), &u);
    let len = kind.inner(&nrm, &nrm).max(T::zero()).sqrt();
    if !(len > T::epsilon()) {
        return None;
    }
    let s = match kind {
        SpaceformKind::Euclidean => (radius * radius - half * half).sqrt(),
        SpaceformKind::Spherical => (radius.cos() / half.cos()).min(T::one()).acos(),
        SpaceformKind::Hyperbolic => (radius.cosh() / half.cosh()).max(T::one()).acosh(),
    };
    Some(exp_raw(&mid, &(nrm * (s / len))))
}

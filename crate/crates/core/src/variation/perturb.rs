use serde::{Deserialize, Serialize};

use crate::body::{Measure, RadialBody};
use crate::curvature::{default_tolerance, shape_operator, strict_point_from, CurvatureReport};
use crate::error::{GeomError, Result};
use crate::scalar::{lit, Real};
use crate::spaceform::TangentVector;

use super::{
    deform, direction_bump, integrate, killing_stability_test, normal_speed, quadratic_form_from, PushDirection,
    VariationField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    Auto,
    Case1,
    Case2,
}

/// Which variation drives the area increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbCase {
    /// Mean curvature varies on the region: first-order gain.
    One,
    /// Mean curvature is constant on the region: second-order gain.
    Two,
}

impl PerturbCase {
    /// Default step of the `t` schedule. Case 2 bumps are normalized in
    /// L1, so their curvature moves faster and they get a finer step.
    pub fn default_step<T: Real>(self) -> T {
        match self {
            PerturbCase::One => lit(1e-5),
            PerturbCase::Two => lit(2e-6),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            PerturbCase::One => 1,
            PerturbCase::Two => 2,
        }
    }
}

/// Geometry parameters for [`BumpPair::select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BumpOptions<T: Real> {
    /// Chord radius (in direction space) of the region around the strict point.
    pub region_radius: T,
    /// Initial chord radius of each bump.
    pub bump_radius: T,
    /// Smallest accepted `<push, nu>` on the region (Case 1).
    pub min_alignment: T,
    /// Relative oscillation of `H` below which the region counts as CMC.
    pub h_constant_tol: T,
    /// Curvature tolerance for strictness and convexity.
    pub tol: T,
}

impl<T: Real> BumpOptions<T> {
    pub fn for_dimension(n: usize) -> Self {
        BumpOptions {
            region_radius: lit(0.8),
            bump_radius: if n == 1 { lit(0.2) } else { lit(0.3) },
            min_alignment: lit(0.5),
            h_constant_tol: lit(1e-6),
            tol: default_tolerance(n),
        }
    }
}

/// Two disjoint bumps `F` (on `omega1`) and `G` (on `omega2`) driving
/// `psi(p, t, s) = exp_p((t F(p) + s G(p)) push(p))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BumpPair<T: Real> {
    pub case: PerturbCase,
    pub strict_node: usize,
    pub omega1: Vec<bool>,
    pub omega2: Vec<bool>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub direction: PushDirection<T>,
    /// Case 1: `int H (G - F) <push, nu>`; Case 2: `-int F T(F)`.
    pub predicted_gain: T,
    /// Case 2: Killing certificate on `omega1`.
    pub killing_stable: Option<bool>,
}

impl<T: Real> BumpPair<T> {
    /// Builds a bump pair around the strict point of a lambda-convex body.
    pub fn select(body: &RadialBody<T>, lambda: T, mode: PerturbMode, opts: &BumpOptions<T>) -> Result<Self> {
        let report = shape_operator(body)?;
        let p0 = match strict_point_from(&report, lambda, opts.tol) {
            Ok(i) => i,
            Err(GeomError::NoStrictPoint { max_kappa, .. }) => {
                return Err(GeomError::TrivialBody(format!(
                    "no node has kappa_1 > lambda + tol (max kappa_1 = {max_kappa})"
                )))
            }
            Err(e) => return Err(e),
        };
        let kmin = report.kappa_min();
        let h = report.mean_curvature();
        let dirs = body.grid().directions();
        let c0 = dirs[p0];
        let mut radius = opts.region_radius;
        let nu0 = report.nodes[p0].normal.vec;
        let (omega, case) = loop {
            let omega: Vec<bool> = (0..body.len())
                .map(|i| (dirs[i] - c0).norm() < radius && kmin[i] > lambda + opts.tol)
                .collect();
            let case = match mode {
                PerturbMode::Case1 => PerturbCase::One,
                PerturbMode::Case2 => PerturbCase::Two,
                PerturbMode::Auto => {
                    let vals: Vec<T> = (0..body.len()).filter(|&i| omega[i]).map(|i| h[i]).collect();
                    let (lo, hi) = vals.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), x| (a.min(*x), b.max(*x)));
                    let mean = vals.iter().copied().sum::<T>() / lit(vals.len() as f64);
                    if (hi - lo) / mean.abs() < opts.h_constant_tol {
                        PerturbCase::Two
                    } else {
                        PerturbCase::One
                    }
                }
            };
            let aligned = case == PerturbCase::Two
                || (0..body.len()).filter(|&i| omega[i]).all(|i| {
                    let c = &report.nodes[i];
                    let push = c.normal.base.project_tangent(&nu0);
                    c.normal.base.kind.inner(&push, &c.normal.vec) >= opts.min_alignment
                });
            if aligned {
                break (omega, case);
            }
            radius = radius * lit(0.8);
            if radius < body.grid().spacing() * lit(8.0) {
                return Err(GeomError::Invalid("no region with positive alignment around the strict point".into()));
            }
        };
        match case {
            PerturbCase::One => case1(body, &report, p0, &omega, opts),
            PerturbCase::Two => case2(body, &report, p0, &omega, opts),
        }
    }

    /// Field `t F + s G` along the push direction.
    pub fn field(&self, t: T, s: T) -> VariationField<T> {
        let v = self.f.iter().zip(&self.g).map(|(f, g)| t * *f + s * *g).collect();
        VariationField::normal(v).with_direction(self.direction)
    }

    /// Both bumps multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.f.iter_mut().for_each(|x| *x *= c);
        out.g.iter_mut().for_each(|x| *x *= c);
        out.predicted_gain = match self.case {
            PerturbCase::One => self.predicted_gain * c,
            PerturbCase::Two => self.predicted_gain * c * c,
        };
        out
    }

    pub fn omega(&self) -> Vec<bool> {
        self.omega1.iter().zip(&self.omega2).map(|(a, b)| *a || *b).collect()
    }
}

/// Nodes of `omega` whose bump of chord radius `r` stays inside `omega`.
fn fitting_centers<T: Real>(body: &RadialBody<T>, omega: &[bool], r: T) -> Vec<usize> {
    let dirs = body.grid().directions();
    let outside: Vec<usize> = (0..omega.len()).filter(|&i| !omega[i]).collect();
    (0..omega.len())
        .filter(|&i| omega[i] && outside.iter().all(|&j| (dirs[j] - dirs[i]).norm() > r))
        .collect()
}

fn mask<T: Real>(f: &[T]) -> Vec<bool> {
    f.iter().map(|x| *x != T::zero()).collect()
}

fn case1<T: Real>(
    body: &RadialBody<T>,
    report: &CurvatureReport<T>,
    p0: usize,
    omega: &[bool],
    opts: &BumpOptions<T>,
) -> Result<BumpPair<T>> {
    let h = report.mean_curvature();
    let dirs = body.grid().directions();
    let nu0 = report.nodes[p0].normal.vec;
    let direction = PushDirection::Fixed(nu0);
    let align: Vec<T> = normal_speed(report, &VariationField::normal(vec![T::one(); body.len()]).with_direction(direction));
    let mut r = opts.bump_radius;
    let min_r = body.grid().spacing() * lit(2.5);
    while r >= min_r {
        let centers = fitting_centers(body, omega, r);
        // range of H over the support of a bump at each candidate center
        let ranges: Vec<(T, T)> = centers
            .iter()
            .map(|&c| {
                (0..h.len())
                    .filter(|&i| (dirs[i] - dirs[c]).norm() < r)
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| (lo.min(h[i]), hi.max(h[i])))
            })
            .collect();
        let best2 = (0..centers.len()).max_by(|&a, &b| ranges[a].0.partial_cmp(&ranges[b].0).expect("finite H"));
        let best1 = best2.and_then(|k2| {
            (0..centers.len())
                .filter(|&k| (dirs[centers[k]] - dirs[centers[k2]]).norm() > r + r)
                .min_by(|&a, &b| ranges[a].1.partial_cmp(&ranges[b].1).expect("finite H"))
        });
        if let (Some(k1), Some(k2)) = (best1, best2) {
            let (c1, c2) = (centers[k1], centers[k2]);
            let bf = direction_bump(body, c1, r);
            let bg = direction_bump(body, c2, r);
            let (o1, o2) = (mask(&bf), mask(&bg));
            let sup1 = (0..h.len()).filter(|&i| o1[i]).fold(T::neg_infinity(), |m, i| m.max(h[i]));
            let inf2 = (0..h.len()).filter(|&i| o2[i]).fold(T::infinity(), |m, i| m.min(h[i]));
            if sup1 < inf2 {
                let wf: Vec<T> = bf.iter().zip(&align).map(|(b, a)| *b * *a).collect();
                let wg: Vec<T> = bg.iter().zip(&align).map(|(b, a)| *b * *a).collect();
                let nf = integrate(body, report, &wf);
                let ng = integrate(body, report, &wg);
                let f: Vec<T> = bf.iter().map(|x| *x / nf).collect();
                let g: Vec<T> = bg.iter().map(|x| *x / ng).collect();
                let gain: Vec<T> = (0..h.len()).map(|i| h[i] * (g[i] - f[i]) * align[i]).collect();
                return Ok(BumpPair {
                    case: PerturbCase::One,
                    strict_node: p0,
                    omega1: o1,
                    omega2: o2,
                    f,
                    g,
                    direction,
                    predicted_gain: integrate(body, report, &gain),
                    killing_stable: None,
                });
            }
        }
        r = r * lit(0.7);
    }
    Err(GeomError::Invalid("mean curvature does not separate two bumps in the region".into()))
}

fn case2<T: Real>(
    body: &RadialBody<T>,
    report: &CurvatureReport<T>,
    p0: usize,
    omega: &[bool],
    opts: &BumpOptions<T>,
) -> Result<BumpPair<T>> {
    let dirs = body.grid().directions();
    let mut r = opts.bump_radius;
    let min_r = body.grid().spacing() * lit(3.0);
    while r >= min_r {
        let centers = fitting_centers(body, omega, r);
        let c1 = centers
            .iter()
            .copied()
            .min_by(|&a, &b| (dirs[a] - dirs[p0]).norm().partial_cmp(&(dirs[b] - dirs[p0]).norm()).expect("finite"));
        let c2 = c1.and_then(|c1| {
            centers
                .iter()
                .copied()
                .filter(|&i| (dirs[i] - dirs[c1]).norm() > lit::<T>(2.2) * r)
                .min_by(|&a, &b| (dirs[a] - dirs[c1]).norm().partial_cmp(&(dirs[b] - dirs[c1]).norm()).expect("finite"))
        });
        if let (Some(c1), Some(c2)) = (c1, c2) {
            let bump = direction_bump(body, c1, r);
            let (_, tangents) = body.grid().chart_direction(c1, [T::zero(); 2]);
            let e = tangents[0];
            let odd: Vec<T> = (0..bump.len()).map(|i| bump[i] * (dirs[i] - dirs[c1]).dot(&e) / r).collect();
            let shift = integrate(body, report, &odd) / integrate(body, report, &bump);
            let mut f: Vec<T> = (0..bump.len()).map(|i| odd[i] - shift * bump[i]).collect();
            let abs: Vec<T> = f.iter().map(|x| x.abs()).collect();
            let nf = integrate(body, report, &abs);
            f.iter_mut().for_each(|x| *x /= nf);
            let bg = direction_bump(body, c2, r);
            let ng = integrate(body, report, &bg);
            let g: Vec<T> = bg.iter().map(|x| *x / ng).collect();
            let o1 = mask(&bump);
            let nu = report.nodes[c1].normal;
            let dir = TangentVector { base: nu.base, vec: nu.vec };
            let killing = killing_stability_test(body, &o1, &dir)?.stable;
            let gain = quadratic_form_from(body, report, &f);
            return Ok(BumpPair {
                case: PerturbCase::Two,
                strict_node: p0,
                omega1: o1,
                omega2: mask(&g),
                f,
                g,
                direction: PushDirection::Normal,
                predicted_gain: gain,
                killing_stable: Some(killing),
            });
        }
        r = r * lit(0.7);
    }
    Err(GeomError::Invalid("region too small for two disjoint bumps".into()))
}

/// Finds `s = b(t)` with `vol(psi(., t, s)) = vol(body)` to relative `tol`.
pub fn solve_volume_constraint<T: Real>(body: &RadialBody<T>, bumps: &BumpPair<T>, t: T, tol: T) -> Result<T> {
    let v0 = body.measure().volume;
    let target = tol * v0;
    let eval = |s: T| -> Option<T> { deform(body, &bumps.field(t, s), T::one()).ok().map(|b| b.measure().volume - v0) };
    let report = shape_operator(body)?;
    let dg = normal_speed(&report, &VariationField::normal(bumps.g.clone()).with_direction(bumps.direction));
    let slope0 = -integrate(body, &report, &dg);
    if !(slope0 < T::zero()) {
        return Err(GeomError::NoBracket("volume is not decreasing in s".into()));
    }
    let mut s0 = -t;
    let mut f0 = eval(s0).ok_or_else(|| GeomError::NoBracket("initial guess leaves the graph range".into()))?;
    if f0.abs() <= target {
        return Ok(s0);
    }
    // Bracket [lo, hi] with f(lo) > 0 > f(hi) once found.
    let mut lo: Option<(T, T)> = None;
    let mut hi: Option<(T, T)> = None;
    let record = |s: T, f: T, lo: &mut Option<(T, T)>, hi: &mut Option<(T, T)>| {
        if f > T::zero() {
            if lo.is_none_or(|(ls, _)| s > ls) {
                *lo = Some((s, f));
            }
        } else if hi.is_none_or(|(hs, _)| s < hs) {
            *hi = Some((s, f));
        }
    };
    record(s0, f0, &mut lo, &mut hi);
    let mut slope = slope0;
    for _ in 0..80 {
        let mut s1 = s0 - f0 / slope;
        if let (Some((a, _)), Some((b, _))) = (lo, hi) {
            if !(s1 > a && s1 < b) {
                s1 = (a + b) * lit(0.5);
            }
        }
        let mut f1 = eval(s1);
        let mut shrink = 0;
        while f1.is_none() && shrink < 30 {
            s1 = (s0 + s1) * lit(0.5);
            f1 = eval(s1);
            shrink += 1;
        }
        let f1 = f1.ok_or_else(|| GeomError::NoBracket(format!("no valid deformation near s = {s1}")))?;
        if f1.abs() <= target {
            return Ok(s1);
        }
        record(s1, f1, &mut lo, &mut hi);
        if s1 == s0 {
            break;
        }
        let sec = (f1 - f0) / (s1 - s0);
        slope = if sec < T::zero() { sec } else { slope0 };
        s0 = s1;
        f0 = f1;
    }
    Err(GeomError::NoBracket(format!("volume residual {f0} above {target}")))
}

/// One accepted deformation with its measurements.
#[derive(Debug, Clone)]
pub struct PerturbEntry<T: Real> {
    pub step: usize,
    pub t: T,
    pub body: RadialBody<T>,
    pub measure: Measure<T>,
    pub b: T,
    pub min_kappa: T,
    /// Bump case driving the step; `None` for the seed and projected steps.
    pub case: Option<PerturbCase>,
}

#[derive(Debug, Clone)]
pub struct PerturbTrajectory<T: Real> {
    pub entries: Vec<PerturbEntry<T>>,
    pub case_used: Option<PerturbCase>,
    /// Reason the schedule stopped early, if it did.
    pub stopped: Option<GeomError>,
}

impl<T: Real> PerturbTrajectory<T> {
    /// CSV with columns `step,t,area,volume,b,min_kappa,case`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "t", "area", "volume", "b", "min_kappa", "case"]).expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.step.to_string(),
                e.t.to_string(),
                e.measure.area.to_string(),
                e.measure.volume.to_string(),
                e.b.to_string(),
                e.min_kappa.to_string(),
                e.case.or(self.case_used).map_or(String::new(), |c| c.number().to_string()),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn accepted_steps(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }
}

/// Volume-constrained deformation `psi(., t, b(t))` with a convexity check.
pub fn perturb_step<T: Real>(
    body: &RadialBody<T>,
    lambda: T,
    bumps: &BumpPair<T>,
    t: T,
    vol_tol: T,
    kappa_tol: T,
) -> Result<PerturbEntry<T>> {
    let b = solve_volume_constraint(body, bumps, t, vol_tol)?;
    let moved = deform(body, &bumps.field(t, b), T::one())?;
    let report = shape_operator(&moved)?;
    let min_kappa = report.global_min_kappa();
    if min_kappa < lambda - kappa_tol {
        return Err(GeomError::ConvexityExit {
            min_kappa: min_kappa.as_f64(),
            lambda: lambda.as_f64(),
            tol: kappa_tol.as_f64(),
        });
    }
    let measure = moved.measure();
    Ok(PerturbEntry { step: 0, t, body: moved, measure, b, min_kappa, case: Some(bumps.case) })
}

/// Step for a linear schedule of `steps` steps: the case default, shrunk
/// so that the linearized drop of `kappa_1` at every node over the whole
/// schedule stays within half of that node's margin above `lambda`.
pub fn fitted_step<T: Real>(body: &RadialBody<T>, lambda: T, bumps: &BumpPair<T>, steps: usize, vol_tol: T) -> Result<T> {
    let probe: T = bumps.case.default_step();
    let before = shape_operator(body)?.kappa_min();
    let e = perturb_step(body, lambda, bumps, probe, vol_tol, T::infinity())?;
    let after = shape_operator(&e.body)?.kappa_min();
    let mut t_max = T::infinity();
    for (k0, k1) in before.iter().zip(&after) {
        let drop = *k0 - *k1;
        if drop > T::zero() && *k0 > lambda {
            t_max = t_max.min(probe * (*k0 - lambda) / drop);
        }
    }
    Ok(probe.min(t_max / lit(2.0 * steps.max(1) as f64)))
}

/// `t_k = k * step` for `k = 1..=steps`.
pub fn linear_schedule<T: Real>(step: T, steps: usize) -> Vec<T> {
    (1..=steps).map(|k| step * lit(k as f64)).collect()
}

/// Applies [`perturb_step`] for each `t` of `schedule` to the same seed and
/// bumps; stops at the first rejected step.
pub fn perturb_trajectory<T: Real>(
    body: &RadialBody<T>,
    lambda: T,
    bumps: &BumpPair<T>,
    schedule: &[T],
    vol_tol: T,
    kappa_tol: T,
) -> Result<PerturbTrajectory<T>> {
    let report = shape_operator(body)?;
    let seed = PerturbEntry {
        step: 0,
        t: T::zero(),
        body: body.clone(),
        measure: body.measure(),
        b: T::zero(),
        min_kappa: report.global_min_kappa(),
        case: None,
    };
    let mut traj = PerturbTrajectory { entries: vec![seed], case_used: Some(bumps.case), stopped: None };
    for (k, &t) in schedule.iter().enumerate() {
        match perturb_step(body, lambda, bumps, t, vol_tol, kappa_tol) {
            Ok(mut e) => {
                e.step = k + 1;
                traj.entries.push(e);
            }
            Err(e) => {
                traj.stopped = Some(e);
                break;
            }
        }
    }
    Ok(traj)
}

//! The subcommands. Each returns an [`Outcome`]; input errors become
//! [`RunError::Config`].

use std::sync::Arc;

use lambda_convex::body::{
    make_ball, make_ellipse, make_lens_body, make_perturbed_ball, reference_closed_forms, ClosedForm, RadialBody,
};
use lambda_convex::curvature::{global_blaschke_check, lambda_check_from, shape_operator, strict_point};
use lambda_convex::enclosure::{
    beta_profile_check, circumradius_bruteforce, enclosing_ball_with, lens_from_supports, LensSpec,
};
use lambda_convex::grid::{GridSpec, SphereGrid};
use lambda_convex::linalg::Vector;
use lambda_convex::spaceform::{
    exp_map, lambda_class, lambda_of_radius, radius_of_lambda, warp_functions, Point, TangentVector,
};
use lambda_convex::variation::{
    finite_difference_check, fitted_step, linear_schedule, maximize_area, perturb_trajectory, random_pair, solve_volume_constraint,
    BumpPair, KappaExcess, MaximizeMethod, PerturbCase, PerturbTrajectory,
};
use lambda_convex::{GeomError, RadialBody64, SpaceformKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{BodySpec, ExperimentConfig, Subcommand};
use crate::report::{csv_table, Failure, Outcome};

#[derive(Debug)]
pub enum RunError {
    Config(String),
}

fn input<T>(what: &str, r: lambda_convex::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Config(format!("{what}: {e}")))
}

fn geom_failure(property: &str, e: &GeomError) -> Failure {
    Failure::new(property, format!("{}: {e}", e.code()))
}

pub fn run_experiment(cfg: &ExperimentConfig, verbose: bool) -> Result<Outcome, RunError> {
    let sub = cfg.subcommand.expect("resolved config names its subcommand");
    let out = match sub {
        Subcommand::SpaceformTable => spaceform_table(cfg),
        Subcommand::Measure => measure(cfg)?,
        Subcommand::Check => check(cfg)?,
        Subcommand::VariationVerify => variation_verify(cfg, verbose)?,
        Subcommand::Perturb => perturb(cfg)?,
        Subcommand::Maximize => maximize(cfg)?,
        Subcommand::Lens => lens(cfg)?,
    };
    Ok(out)
}

fn grid_of(spec: GridSpec) -> Result<Arc<SphereGrid<f64>>, RunError> {
    Ok(Arc::new(input("grid", SphereGrid::new(spec))?))
}

pub fn build_body(cfg: &ExperimentConfig) -> Result<RadialBody64, RunError> {
    let grid = grid_of(cfg.grid.expect("resolved"))?;
    let (kind, n) = (cfg.kind, cfg.n);
    let origin = Point::origin(kind, n + 1);
    let body = match cfg.body.as_ref().expect("resolved") {
        BodySpec::Ball { radius } => make_ball(kind, radius.expect("resolved"), grid, origin),
        BodySpec::PerturbedBall { radius, amplitude, mode } => {
            make_perturbed_ball(kind, *radius, grid, origin, *amplitude, *mode)
        }
        BodySpec::Ellipse { a, b } => {
            if kind != SpaceformKind::Euclidean {
                return Err(RunError::Config("ellipse seeds live in the Euclidean plane".into()));
            }
            make_ellipse(*a, *b, grid)
        }
        BodySpec::Lens { d } => {
            let lens = input("lens", LensSpec::symmetric(kind, cfg.lambda, *d, n + 1))?;
            make_lens_body(&lens, grid)
        }
        BodySpec::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{path}: {e}")))?;
            let b = input(path, RadialBody::from_json(&text))?;
            if b.kind() != kind || b.dimension() != n {
                return Err(RunError::Config(format!("{path}: body does not match kind {kind} and n = {n}")));
            }
            Ok(b)
        }
    };
    input("body", body)
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn spaceform_table(cfg: &ExperimentConfig) -> Outcome {
    let mut out = Outcome::default();
    let h = 1e-5;
    let mut warp_rows = Vec::new();
    let mut radius_rows = Vec::new();
    for kind in SpaceformKind::ALL {
        for &r in &cfg.table.radii {
            let Ok(w) = warp_functions(kind, r) else {
                out.note(format!("{kind}: no warp at r = {r}"));
                continue;
            };
            if r > h {
                if let (Ok(a), Ok(b)) = (warp_functions(kind, r - h), warp_functions(kind, r + h)) {
                    let d_theta = (b.theta - a.theta) / (2.0 * h);
                    let d_big = (b.big_theta - a.big_theta) / (2.0 * h);
                    let err = (d_theta - w.theta_prime).abs().max((d_big - w.theta).abs());
                    if err > 1e-8 {
                        out.fail(Failure::new("warp_derivatives", format!("{kind} r = {r}")).value(err, 1e-8));
                    }
                }
            }
            warp_rows.push(vec![kind.to_string(), fmt(r), fmt(w.theta), fmt(w.theta_prime), fmt(w.big_theta)]);
        }
        for &l in &cfg.table.lambdas {
            let Ok(class) = lambda_class(kind, l) else {
                out.note(format!("{kind}: lambda = {l} is not positive"));
                continue;
            };
            let back = class.radius.and_then(|r| lambda_of_radius(kind, r).ok());
            if let Some(b) = back {
                let err = (b - l).abs();
                if err > 1e-12 * l.max(1.0) {
                    out.fail(Failure::new("radius_round_trip", format!("{kind} lambda = {l}")).value(err, 1e-12));
                }
            }
            radius_rows.push(vec![
                kind.to_string(),
                fmt(l),
                class.radius.map_or(String::new(), fmt),
                back.map_or(String::new(), fmt),
            ]);
        }
    }
    use SpaceformKind::*;
    let anchors = [
        (Euclidean, 2.0, Some(0.5), 0.0),
        (Spherical, 1.0, Some(std::f64::consts::FRAC_PI_4), 1e-10),
        (Hyperbolic, 2.0, Some(0.5 * 3f64.ln()), 1e-10),
        (Hyperbolic, 1.0, None, 0.0),
    ];
    let mut rows = Vec::new();
    for (kind, l, want, tol) in anchors {
        let got = radius_of_lambda(kind, l).ok().and_then(|c| c.radius);
        let ok = match (got, want) {
            (Some(g), Some(w)) => (g - w).abs() <= tol,
            (None, None) => true,
            _ => false,
        };
        out.require(ok, "radius_anchor", || format!("{kind} lambda = {l}: got {got:?}, want {want:?}"));
        rows.push(json!({"kind": kind, "lambda": l, "radius": got, "expected": want, "tol": tol, "pass": ok}));
    }
    out.set("anchors", rows);
    out.set("warp_rows", warp_rows.len());
    out.set("radius_rows", radius_rows.len());
    out.file("warp.csv", csv_table(&["kind", "r", "theta", "theta_prime", "Theta"], warp_rows));
    out.file("radius.csv", csv_table(&["kind", "lambda", "radius", "lambda_of_radius"], radius_rows));
    out
}

fn measure(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let body = build_body(cfg)?;
    let mut out = Outcome::default();
    let m = body.measure();
    out.set("area", m.area);
    out.set("volume", m.volume);
    out.require(m.area > 0.0 && m.volume > 0.0, "positive_measure", || format!("area {} volume {}", m.area, m.volume));
    let reference = match cfg.body.as_ref().expect("resolved") {
        BodySpec::Ball { radius } => Some(ClosedForm::Ball { kind: cfg.kind, n: cfg.n, radius: radius.expect("resolved") }),
        BodySpec::Lens { d } if cfg.kind == SpaceformKind::Euclidean && cfg.n == 1 => {
            Some(ClosedForm::Lens2d { lambda: cfg.lambda, d: *d })
        }
        _ => None,
    };
    if let Some(shape) = reference {
        let r = input("closed form", reference_closed_forms(shape))?;
        let ea = (m.area / r.area - 1.0).abs();
        let ev = (m.volume / r.volume - 1.0).abs();
        out.set("reference", r);
        out.set("rel_error", json!({"area": ea, "volume": ev}));
        if let ClosedForm::Ball { .. } = shape {
            let tol = if cfg.n == 1 { 1e-8 } else { 1e-3 };
            if ea.max(ev) > tol {
                out.fail(Failure::new("ball_measure", "ball area or volume off its closed form").value(ea.max(ev), tol));
            }
        } else {
            out.note("lens reference reported without assertion: the rim kinks limit the fit order");
        }
    }
    let dens = body.area_density();
    let rows = body.rho().iter().zip(&dens).enumerate().map(|(i, (r, a))| vec![i.to_string(), fmt(*r), fmt(*a)]);
    out.file("rho.csv", csv_table(&["node", "rho", "area_density"], rows));
    Ok(out)
}

fn check(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let body = build_body(cfg)?;
    let mut out = Outcome::default();
    let tol = cfg.tol.expect("resolved");
    let report = match shape_operator(&body) {
        Ok(r) => r,
        Err(e) => {
            out.fail(geom_failure("curvature", &e));
            return Ok(out);
        }
    };
    out.file("curvature.csv", report.to_csv());
    let c = lambda_check_from(&report, cfg.lambda, tol);
    out.set("lambda_check", c);
    if !c.is_lambda_convex {
        out.fail(
            Failure::new("lambda_convex", format!("not λ-convex, witness node {}", c.min_node))
                .node(c.min_node)
                .value(c.min_kappa, cfg.lambda - tol),
        );
        return Ok(out);
    }
    match global_blaschke_check(&body, cfg.lambda) {
        Ok(b) => {
            out.set("blaschke", b);
            out.require(b, "blaschke", || "a supporting ball misses part of the body".into());
        }
        Err(e) => out.note(format!("Blaschke check skipped: {e}")),
    }
    Ok(out)
}

fn variation_verify(cfg: &ExperimentConfig, verbose: bool) -> Result<Outcome, RunError> {
    let v = &cfg.variation;
    let grid = grid_of(v.grid.expect("resolved"))?;
    let steps = v.steps.clone().expect("resolved");
    let tol = v.tol.expect("resolved");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    let mut passed = 0;
    for pair in 0..v.pairs {
        let (body, field) = input("random pair", random_pair(cfg.kind, grid.clone(), &mut rng))?;
        let rep = match finite_difference_check(&body, &field, &[1, 2], &steps, tol) {
            Ok(r) => r,
            Err(e) => {
                out.fail(geom_failure("fd_check", &e).node(pair));
                continue;
            }
        };
        for s in &rep.series {
            for r in &s.rows {
                rows.push(vec![pair.to_string(), s.name.clone(), fmt(r.h), fmt(r.fd), fmt(s.analytic), fmt(r.error)]);
            }
            let min_order = s.observed_orders.iter().flatten().fold(f64::INFINITY, |m, o| m.min(*o));
            match worst.iter_mut().find(|w| w.0 == s.name) {
                Some(w) => {
                    w.1 = w.1.max(s.rel_error);
                    w.2 = w.2.min(min_order);
                }
                None => worst.push((s.name.clone(), s.rel_error, min_order)),
            }
            if !s.pass {
                let why = if s.order_ok { "relative error" } else { "observed order" };
                out.fail(Failure::new(&format!("fd_{}", s.name), format!("pair {pair}: {why}")).value(s.rel_error, tol));
            }
        }
        passed += usize::from(rep.pass);
        if verbose {
            eprintln!("pair {pair}: pass = {}", rep.pass);
        }
    }
    out.set("pairs", v.pairs);
    out.set("pairs_passed", passed);
    let series: Vec<_> = worst
        .iter()
        .map(|(n, e, o)| json!({"series": n, "max_rel_error": e, "min_observed_order": o.is_finite().then_some(*o)}))
        .collect();
    out.set("series", series);
    out.file("fd.csv", csv_table(&["pair", "series", "h", "fd", "analytic", "error"], rows));
    Ok(out)
}

/// Trajectory checks shared by `perturb` and `maximize`.
fn check_trajectory(out: &mut Outcome, traj: &PerturbTrajectory<f64>, drift_tol: f64, strict: bool) {
    let e = &traj.entries;
    let v0 = e[0].measure.volume;
    let drift = e.iter().map(|x| (x.measure.volume / v0 - 1.0).abs()).fold(0.0, f64::max);
    out.set("volume_drift", drift);
    if drift > drift_tol {
        out.fail(Failure::new("volume_conserved", "relative volume drift").value(drift, drift_tol));
    }
    for w in e.windows(2) {
        let (a, b) = (w[0].measure.area, w[1].measure.area);
        if b < a || (strict && b == a) {
            out.fail(Failure::new("area_increasing", format!("area drops at step {}", w[1].step)).value(b - a, 0.0));
            break;
        }
    }
}

fn perturb(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let body = build_body(cfg)?;
    let p = &cfg.perturb;
    let mut out = Outcome::default();
    let header = PerturbTrajectory::<f64> { entries: vec![], case_used: None, stopped: None }.to_csv();
    let bumps = match BumpPair::select(&body, cfg.lambda, p.mode, &p.bumps.expect("resolved")) {
        Ok(b) => b,
        Err(e @ GeomError::TrivialBody(_)) => {
            out.set("accepted_steps", 0);
            out.note(format!("{}: {e}", e.code()));
            out.file("trajectory.csv", header);
            return Ok(out);
        }
        Err(e) => {
            out.fail(geom_failure("bump_selection", &e));
            out.file("trajectory.csv", header);
            return Ok(out);
        }
    };
    let (vol_tol, kappa_tol) = (p.vol_tol.expect("resolved"), p.kappa_tol.expect("resolved"));
    let step = match p.t_step {
        Some(t) => t,
        None => match fitted_step(&body, cfg.lambda, &bumps, p.steps, vol_tol) {
            Ok(t) => t,
            Err(e) => {
                out.fail(geom_failure("trajectory", &e));
                out.file("trajectory.csv", header);
                return Ok(out);
            }
        },
    };
    out.set("case", bumps.case.number());
    out.set("strict_node", bumps.strict_node);
    out.set("predicted_gain", bumps.predicted_gain);
    out.set("killing_stable", bumps.killing_stable);
    out.set("t_step", step);
    let traj = match perturb_trajectory(&body, cfg.lambda, &bumps, &linear_schedule(step, p.steps), vol_tol, kappa_tol) {
        Ok(t) => t,
        Err(e) => {
            out.fail(geom_failure("trajectory", &e));
            out.file("trajectory.csv", header);
            return Ok(out);
        }
    };
    let accepted = traj.accepted_steps();
    out.set("accepted_steps", accepted);
    if let Some(e) = &traj.stopped {
        out.set("stopped", json!({"code": e.code(), "message": e.to_string()}));
    }
    if accepted < p.min_accepted {
        out.fail(Failure::new("accepted_steps", "too few accepted steps").value(accepted as f64, p.min_accepted as f64));
    }
    check_trajectory(&mut out, &traj, p.drift_tol, true);
    if bumps.case == PerturbCase::One {
        let h = p.b_prime_h;
        match (
            solve_volume_constraint(&body, &bumps, h, vol_tol),
            solve_volume_constraint(&body, &bumps, -h, vol_tol),
        ) {
            (Ok(bp), Ok(bm)) => {
                let d = (bp - bm) / (2.0 * h);
                out.set("b_prime_0", d);
                if (d + 1.0).abs() > p.b_prime_tol {
                    out.fail(Failure::new("b_prime_0", "b'(0) differs from -1").value(d, -1.0));
                }
            }
            (Err(e), _) | (_, Err(e)) => out.fail(geom_failure("b_prime_0", &e)),
        }
    }
    out.file("trajectory.csv", traj.to_csv());
    Ok(out)
}

/// Perimeter of the Euclidean planar lens of curvature `lambda` enclosing `area`.
pub fn matched_lens_perimeter(lambda: f64, area: f64) -> Option<f64> {
    let reference = |d| reference_closed_forms(ClosedForm::Lens2d { lambda, d }).ok();
    let (mut lo, mut hi) = (0.0, 2.0 / lambda);
    for _ in 0..200 {
        let d = 0.5 * (lo + hi);
        if reference(d)?.volume > area {
            lo = d;
        } else {
            hi = d;
        }
    }
    Some(reference(0.5 * (lo + hi))?.area)
}

fn maximize(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let body = build_body(cfg)?;
    let m = &cfg.maximize;
    let run = m.run.expect("resolved");
    let mut out = Outcome::default();
    let res = match maximize_area(&body, cfg.lambda, &run) {
        Ok(r) => r,
        Err(e) => {
            out.fail(geom_failure("maximize", &e));
            return Ok(out);
        }
    };
    let traj = &res.trajectory;
    let steps = traj.accepted_steps();
    let (seed, fin) = (traj.entries[0].measure, res.body.measure());
    out.set("method", run.method);
    out.set("accepted_steps", steps);
    out.set("seed", seed);
    out.set("final", fin);
    if let Some(e) = &traj.stopped {
        out.set("stopped", json!({"code": e.code(), "message": e.to_string()}));
    }
    let trivial = steps == 0 && matches!(traj.stopped, Some(GeomError::TrivialBody(_)));
    out.file("trajectory.csv", traj.to_csv());
    write_excess(&mut out, &res.excess);
    if trivial {
        out.note("TrivialBody: the seed has no strict point, so no admissible step exists");
        return Ok(out);
    }
    check_trajectory(&mut out, traj, m.drift_tol, false);
    out.require(fin.area > seed.area, "area_gain", || format!("final area {} not above seed {}", fin.area, seed.area));
    let bound = 5.0 * run.kappa_tol;
    let share = res.excess.fraction_within(bound);
    out.set("excess_within_5tol", share);
    if let Some(min) = m.concentration_min {
        if share < min {
            out.fail(Failure::new("curvature_concentration", "kappa_1 - lambda above 5 tol on too much length").value(share, min));
        }
    }
    if cfg.kind == SpaceformKind::Euclidean && cfg.n == 1 && run.method == MaximizeMethod::Hull {
        if let Some(lens) = matched_lens_perimeter(cfg.lambda, seed.volume) {
            out.set("lens_perimeter", lens);
            if fin.area > lens + m.lens_slack {
                out.fail(Failure::new("lens_bound", "final perimeter above the matched lens").value(fin.area, lens + m.lens_slack));
            }
        }
    }
    Ok(out)
}

fn write_excess(out: &mut Outcome, ex: &KappaExcess<f64>) {
    let rows = (0..ex.nodes.len()).map(|k| vec![ex.nodes[k].to_string(), fmt(ex.excess[k]), fmt(ex.weights[k])]);
    out.file("excess.csv", csv_table(&["node", "excess", "weight"], rows));
    if !ex.nodes.is_empty() {
        out.set("excess_min", ex.min());
        out.set("excess_max", ex.max());
    }
}

/// Uniform-ish random point of the lens: geodesic from the midpoint with a
/// random direction and length below the enclosing radius, by rejection.
fn random_lens_point(lens: &LensSpec<f64>, rho: f64, rng: &mut ChaCha8Rng) -> Option<Point<f64>> {
    let mid = lens.midpoint();
    let frame = mid.frame();
    for _ in 0..1000 {
        let mut v = Vector::zeros(mid.coords.len());
        for e in &frame {
            v = v.axpy(rng.gen_range(-1.0..1.0), e);
        }
        let len = lens.kind.inner(&v, &v).sqrt();
        if !(len > 1e-12) {
            continue;
        }
        let r = rho * rng.gen::<f64>();
        let z = exp_map(&TangentVector::new(mid, v * (r / len)).ok()?).ok()?;
        if lens.contains(&z, 0.0) {
            return Some(z);
        }
    }
    None
}

fn lens(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let l = &cfg.lens;
    let mut out = Outcome::default();
    if cfg.kind == SpaceformKind::Hyperbolic && cfg.lambda <= 1.0 {
        let body = build_body(cfg)?;
        out.note("no supporting radius for hyperbolic lambda <= 1: strict point only");
        match strict_point(&body, cfg.lambda, cfg.tol.expect("resolved")) {
            Ok(i) => out.set("strict_node", i),
            Err(e) => out.fail(geom_failure("strict_point", &e)),
        }
        return Ok(out);
    }
    let lens = match l.d {
        Some(d) => input("lens", LensSpec::symmetric(cfg.kind, cfg.lambda, d, cfg.n + 1))?,
        None => {
            let body = build_body(cfg)?;
            match lens_from_supports(&body, cfg.lambda) {
                Ok(s) => {
                    out.set("support_nodes", [s.p_node, s.q_node]);
                    out.set("max_excess", s.max_excess);
                    s.lens
                }
                Err(e @ GeomError::TrivialBody(_)) => {
                    out.note(format!("{}: {e}", e.code()));
                    return Ok(out);
                }
                Err(e) => {
                    out.fail(geom_failure("support_lens", &e));
                    return Ok(out);
                }
            }
        }
    };
    let radius = lens.radius();
    out.set("d", lens.d);
    out.set("R", radius);
    out.set("p", lens.p.coords.to_vec());
    out.set("q", lens.q.coords.to_vec());
    let enc = match enclosing_ball_with(&lens, l.samples.expect("resolved")) {
        Ok(e) => e,
        Err(e) => {
            out.fail(geom_failure("margin_positive", &e));
            return Ok(out);
        }
    };
    out.set("c", enc.c.coords.to_vec());
    out.set("rho", enc.rho);
    out.set("margin", enc.margin);
    let oracle = circumradius_bruteforce(&lens, l.oracle_resolution);
    out.set("rho_oracle", oracle);
    if (enc.rho - oracle).abs() > l.oracle_tol {
        out.fail(Failure::new("oracle_agreement", "midpoint circumradius differs from the scan").value(enc.rho - oracle, l.oracle_tol));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut checked = 0;
    let mut first = None;
    for k in 0..l.beta_points {
        let Some(z) = random_lens_point(&lens, enc.rho, &mut rng) else {
            out.note("could not sample a point inside the lens");
            break;
        };
        match beta_profile_check(&lens, &z, l.beta_samples, l.beta_tol) {
            Ok(b) => {
                if !b.pass {
                    out.fail(Failure::new("beta_profile", format!("point {k}")).value(b.sup_beta, b.bound));
                }
                checked += 1;
                first.get_or_insert(b);
            }
            Err(e) => out.fail(geom_failure("beta_profile", &e).node(k)),
        }
    }
    out.set("beta_points", checked);
    out.file("beta.csv", first.map_or_else(|| csv_table(&["t", "beta"], Vec::<Vec<String>>::new()), |b| b.to_csv()));
    Ok(out)
}

//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime budget.

use std::f64::consts::FRAC_PI_4;
use std::time::{Duration, Instant};

use lambda_convex::body::{make_ball, make_ellipse, reference_closed_forms, ClosedForm};
use lambda_convex::curvature::{
    default_tolerance, global_blaschke_check, lambda_convexity_check, shape_operator,
};
use lambda_convex::enclosure::{circumradius_bruteforce, enclosing_ball, LensSpec};
use lambda_convex::spaceform::{radius_of_lambda, Point, SpaceformKind};
use lambda_convex::variation::{
    default_fd_steps, default_fd_tolerance, finite_difference_check, fitted_step, interior_mask, linear_schedule,
    maximize_area, perturb_trajectory, random_pair, solve_volume_constraint, stability_operator_apply,
    stability_quadratic_form, supersolution_stability_test, BumpOptions, BumpPair, MaximizeConfig, PerturbCase,
    PerturbMode,
};
use lambda_convex::GeomError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{grid, offset_ball, wobbly_ball};

use SpaceformKind::{Euclidean as E, Hyperbolic as H, Spherical as S};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn geom<T>(r: lambda_convex::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn radius(kind: SpaceformKind, l: f64) -> f64 {
    radius_of_lambda(kind, l).unwrap().radius.unwrap()
}

fn c1_radius_anchors() -> Check {
    let r = |k, l| radius_of_lambda(k, l).ok().and_then(|c| c.radius);
    ensure(r(E, 2.0) == Some(0.5), || format!("(E,2) -> {:?}", r(E, 2.0)))?;
    let s = r(S, 1.0).ok_or("(S,1) rejected")?;
    ensure((s - FRAC_PI_4).abs() <= 1e-10, || format!("(S,1) -> {s}"))?;
    let h = r(H, 2.0).ok_or("(H,2) rejected")?;
    ensure((h - 0.5 * 3f64.ln()).abs() <= 1e-10, || format!("(H,2) -> {h}"))?;
    ensure(radius_of_lambda(H, 1.0).is_err(), || "(H,1) accepted".into())?;
    Ok(format!("S err {:.1e}, H err {:.1e}", (s - FRAC_PI_4).abs(), (h - 0.5 * 3f64.ln()).abs()))
}

fn rel_errors(kind: SpaceformKind, n: usize, r: f64, m: lambda_convex::body::Measure<f64>) -> (f64, f64) {
    let exact = reference_closed_forms(ClosedForm::Ball { kind, n, radius: r }).unwrap();
    ((m.area / exact.area - 1.0).abs(), (m.volume / exact.volume - 1.0).abs())
}

fn c2_measure_anchors() -> Check {
    let mut worst = [0.0f64; 2];
    let mut min_order = [f64::INFINITY; 2];
    for kind in SpaceformKind::ALL {
        for (n, res, tol) in [(1usize, 512u32, 1e-8), (2, 5, 1e-3)] {
            let g = grid(n, res);
            let ball = make_ball(kind, 0.7, g.clone(), Point::origin(kind, n + 1)).unwrap();
            for (a, v) in [rel_errors(kind, n, 0.7, ball.measure()), rel_errors(kind, n, 0.7, offset_ball(kind, g, 0.7, 0.25).measure())] {
                ensure(a <= tol && v <= tol, || format!("{kind} n={n}: area {a:.2e} volume {v:.2e}"))?;
                worst[n - 1] = worst[n - 1].max(a).max(v);
            }
        }
        let series = [
            (1usize, vec![12u32, 24, 48], 0.45, 2.0),
            (2, vec![3, 4, 5, 6], 0.3, 1.8),
        ];
        for (n, levels, delta, need) in series {
            let errs: Vec<(f64, f64)> =
                levels.iter().map(|&l| rel_errors(kind, n, 0.6, offset_ball(kind, grid(n, l), 0.6, delta).measure())).collect();
            for pick in [0, 1] {
                let e: Vec<f64> = errs.iter().map(|x| if pick == 0 { x.0 } else { x.1 }).collect();
                for w in e.windows(2).filter(|w| w[1] > 1e-12) {
                    let o = (w[0] / w[1]).log2();
                    ensure(o >= need, || format!("{kind} n={n}: order {o:.2} below {need}"))?;
                    min_order[n - 1] = min_order[n - 1].min(o);
                }
            }
        }
    }
    Ok(format!(
        "max rel err {:.1e} (n=1) {:.1e} (n=2); min order {:.2} (n=1) {:.2} (n=2)",
        worst[0], worst[1], min_order[0], min_order[1]
    ))
}

const FD_PAIRS: usize = 50;

fn fd_suite(kind: SpaceformKind, n: usize, seed: u64) -> Result<(f64, f64), String> {
    let g = grid(n, if n == 1 { 512 } else { 4 });
    let (steps, tol) = (default_fd_steps::<f64>(n), default_fd_tolerance::<f64>(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut order) = (0.0f64, f64::INFINITY);
    for pair in 0..FD_PAIRS {
        let (body, vf) = geom(random_pair(kind, g.clone(), &mut rng))?;
        let rep = geom(finite_difference_check(&body, &vf, &[1, 2], &steps, tol))?;
        for s in &rep.series {
            worst = worst.max(s.rel_error);
            order = s.observed_orders.iter().flatten().fold(order, |m, o| m.min(*o));
            ensure(s.pass, || format!("{kind} n={n} pair {pair} {}: rel {:.2e}, orders {:?}", s.name, s.rel_error, s.observed_orders))?;
        }
    }
    Ok((worst, order))
}

fn c3_variation_suite() -> Check {
    let results: Vec<Result<(f64, f64), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = SpaceformKind::ALL
            .iter()
            .enumerate()
            .flat_map(|(k, &kind)| [1, 2].map(|n| (k, kind, n)))
            .map(|(k, kind, n)| s.spawn(move || fd_suite(kind, n, 100 + 10 * k as u64 + n as u64)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut worst = [0.0f64; 2];
    let mut order = f64::INFINITY;
    for (i, r) in results.into_iter().enumerate() {
        let (w, o) = r?;
        worst[i % 2] = worst[i % 2].max(w);
        order = order.min(o);
    }
    Ok(format!(
        "{FD_PAIRS} pairs x 3 spaceforms x n=1,2; max rel err {:.1e} (n=1) {:.1e} (n=2); min observed order {order:.3}",
        worst[0], worst[1]
    ))
}

fn c4_stability_anchors() -> Check {
    let g = grid(2, 5);
    let body = make_ball(E, 1.0, g.clone(), Point::origin(E, 3)).unwrap();
    let all = vec![true; body.len()];
    let dirs = g.directions();
    let l2 = |f: &[f64]| -> f64 { f.iter().zip(g.weights()).map(|(x, w)| x * x * w).sum() };
    let ratio = |f: Vec<f64>| -> Result<f64, String> { Ok(geom(stability_quadratic_form(&body, &all, &f))? / l2(&f)) };
    let mut deg1 = 0.0f64;
    for k in 0..3 {
        let q = ratio(dirs.iter().map(|d| d[k]).collect())?;
        ensure(q.abs() <= 1e-3, || format!("degree-1 harmonic {k}: Q/|f|^2 = {q:.2e}"))?;
        deg1 = deg1.max(q.abs());
    }
    let deg2: Vec<Box<dyn Fn(&lambda_convex::linalg::Vector<f64>) -> f64>> = vec![
        Box::new(|d| d[0] * d[1]),
        Box::new(|d| d[1] * d[2]),
        Box::new(|d| d[0] * d[2]),
        Box::new(|d| d[0] * d[0] - d[1] * d[1]),
        Box::new(|d| 3.0 * d[2] * d[2] - 1.0),
    ];
    let mut dev2 = 0.0f64;
    for (k, f) in deg2.iter().enumerate() {
        let q = ratio(dirs.iter().map(|d| f(d)).collect())?;
        ensure((q - 4.0).abs() <= 0.01, || format!("degree-2 harmonic {k}: Q/|f|^2 = {q}"))?;
        dev2 = dev2.max((q - 4.0).abs());
    }
    // <nu, e3> for the inward normal is -z: positive on the lower cap, a graph over the horizontal plane
    let u: Vec<f64> = dirs.iter().map(|d| -d[2]).collect();
    let cap: Vec<bool> = dirs.iter().map(|d| d[2] < -0.3).collect();
    let tu = geom(stability_operator_apply(&body, &u))?;
    let inner = interior_mask(&body, &cap);
    let max_abs = (0..u.len()).filter(|&i| inner[i]).fold(0.0f64, |m, i| m.max(tu[i].abs()));
    let tol = default_tolerance::<f64>(2);
    ensure(max_abs <= tol, || format!("|T(u)| = {max_abs:.2e} on the cap"))?;
    let cert = geom(supersolution_stability_test(&body, &cap, &u, tol, 4))?;
    ensure(cert.certified && cert.cross_validated, || format!("certificate {cert:?}"))?;
    Ok(format!("deg-1 |Q|/|f|^2 <= {deg1:.1e}; deg-2 |Q/|f|^2 - 4| <= {dev2:.1e}; |T(u)| <= {max_abs:.1e}"))
}

fn c5_lenses() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_margin = f64::INFINITY;
    for trial in 0..200 {
        let kind = SpaceformKind::ALL[trial % 3];
        let m = if trial % 2 == 0 { 2 } else { 3 };
        let l = if kind == H { rng.gen_range(1.05..3.0) } else { rng.gen_range(0.3..3.0) };
        let d = rng.gen_range(0.05..1.95) * radius(kind, l);
        let lens = geom(LensSpec::symmetric(kind, l, d, m))?;
        let enc = enclosing_ball(&lens).map_err(|e| format!("{kind} m={m} lambda={l} d={d}: {e}"))?;
        ensure(enc.margin > 0.0, || format!("{kind} lambda={l} d={d}: margin {}", enc.margin))?;
        min_margin = min_margin.min(enc.margin);
    }
    let lens = geom(LensSpec::symmetric(E, 1.0, 1.0, 2))?;
    let want = 0.75f64.sqrt();
    let mid = geom(enclosing_ball(&lens))?.rho;
    let brute = circumradius_bruteforce(&lens, 4096);
    ensure((mid - want).abs() <= 1e-6 && (brute - want).abs() <= 1e-6, || format!("anchor: midpoint {mid}, brute force {brute}"))?;
    Ok(format!("200 lenses, min margin {min_margin:.3e}; anchor rho {mid:.8} (brute force {brute:.8})"))
}

fn c6_blaschke() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut convex, mut rejected, mut skipped) = (0, 0, 0);
    for trial in 0..200 {
        let kind = SpaceformKind::ALL[trial % 3];
        let n = if trial % 4 == 3 { 2 } else { 1 };
        let r = rng.gen_range(0.3..0.9);
        let body = wobbly_ball(kind, grid(n, if n == 1 { 256 } else { 3 }), r, r * rng.gen_range(0.0..0.04), rng.gen_range(2..=4));
        let kmin = geom(shape_operator(&body))?.global_min_kappa();
        let floor = if kind == H { 1.0 } else { 0.0 };
        let lambda = floor + (kmin - floor) * rng.gen_range(0.3..1.2);
        if lambda <= floor {
            skipped += 1;
            continue;
        }
        let check = geom(lambda_convexity_check(&body, lambda, default_tolerance(n)))?;
        if check.is_lambda_convex {
            convex += 1;
            let ok = geom(global_blaschke_check(&body, lambda))?;
            ensure(ok, || format!("trial {trial}: {kind} n={n} lambda={lambda} fails the global check"))?;
        } else {
            rejected += 1;
            ensure(global_blaschke_check(&body, lambda).is_err(), || format!("trial {trial}: rejected body accepted globally"))?;
        }
    }
    ensure(convex >= 100 && rejected >= 1, || format!("{convex} convex, {rejected} rejected"))?;
    Ok(format!("{convex} lambda-convex bodies all pass the global check; {rejected} rejected upstream; {skipped} draws with lambda at the floor"))
}

fn c7_perturb() -> Check {
    let g = grid(1, 512);
    let opts = BumpOptions::for_dimension(1);
    let mut lines = Vec::new();
    let e = make_ellipse(1.0, 0.8, g.clone()).unwrap();
    let o = Point::origin(E, 2);
    let seeds = [
        ("ellipse", e, 0.7, PerturbCase::One),
        ("E ball", make_ball(E, 0.9, g.clone(), o).unwrap(), 0.8, PerturbCase::Two),
        ("H ball", make_ball(H, 0.9, g.clone(), Point::origin(H, 2)).unwrap(), 0.8, PerturbCase::Two),
    ];
    for (name, body, lambda, case) in seeds {
        let bumps = geom(BumpPair::select(&body, lambda, PerturbMode::Auto, &opts))?;
        ensure(bumps.case == case, || format!("{name}: selected {:?}", bumps.case))?;
        let step = geom(fitted_step(&body, lambda, &bumps, 12, 1e-12))?;
        let tr = geom(perturb_trajectory(&body, lambda, &bumps, &linear_schedule(step, 12), 1e-12, opts.tol))?;
        ensure(tr.accepted_steps() >= 10, || format!("{name}: {} steps ({:?})", tr.accepted_steps(), tr.stopped))?;
        let v0 = tr.entries[0].measure.volume;
        let mut drift = 0.0f64;
        for w in tr.entries.windows(2) {
            ensure(w[1].measure.area > w[0].measure.area, || format!("{name}: area drops at step {}", w[1].step))?;
            drift = drift.max((w[1].measure.volume / v0 - 1.0).abs());
        }
        ensure(drift <= 1e-8, || format!("{name}: volume drift {drift:.2e}"))?;
        let gain = tr.entries.last().unwrap().measure.area - tr.entries[0].measure.area;
        lines.push(format!("{name}: case {} {} steps gain {gain:.2e} drift {drift:.1e}", case.number(), tr.accepted_steps()));
        if case == PerturbCase::One {
            let h = 1e-3;
            let bp = geom(solve_volume_constraint(&body, &bumps, h, 1e-13))?;
            let bm = geom(solve_volume_constraint(&body, &bumps, -h, 1e-13))?;
            let slope = (bp - bm) / (2.0 * h);
            ensure((slope + 1.0).abs() <= 1e-3, || format!("b'(0) = {slope}"))?;
            lines.push(format!("b'(0) = {slope:.6}"));
        }
    }
    Ok(lines.join("; "))
}

fn matched_lens_perimeter(lambda: f64, area: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0 / lambda);
    for _ in 0..200 {
        let d = 0.5 * (lo + hi);
        if reference_closed_forms(ClosedForm::Lens2d { lambda, d }).unwrap().volume > area {
            lo = d;
        } else {
            hi = d;
        }
    }
    reference_closed_forms(ClosedForm::Lens2d { lambda, d: 0.5 * (lo + hi) }).unwrap().area
}

fn c8_maximize() -> Check {
    let e = make_ellipse(1.0, 0.8, grid(1, 512)).unwrap();
    let cfg = MaximizeConfig::for_dimension(1);
    let out = geom(maximize_area(&e, 0.8, &cfg))?;
    let (seed, fin) = (e.measure(), out.body.measure());
    let share = out.excess.fraction_within(5.0 * cfg.kappa_tol);
    let lens = matched_lens_perimeter(0.8, seed.volume);
    ensure(share >= 0.95, || format!("kappa_1 - lambda <= 5 tol on only {share:.4} of smooth length"))?;
    ensure(fin.area > seed.area, || format!("final perimeter {} not above seed {}", fin.area, seed.area))?;
    ensure(fin.area <= lens + 1e-2, || format!("final perimeter {} above lens {lens} + 1e-2", fin.area))?;
    Ok(format!(
        "{} steps; perimeter {:.7} -> {:.7} (lens {lens:.7}); share within 5 tol {share:.4}",
        out.trajectory.accepted_steps(),
        seed.area,
        fin.area
    ))
}

fn c9_extremal_balls() -> Check {
    let mut seen = Vec::new();
    for (kind, lambda) in [(E, 0.8), (S, 0.8), (H, 2.0)] {
        for n in [1, 2] {
            let r = radius(kind, lambda);
            let g = grid(n, if n == 1 { 512 } else { 4 });
            let ball = make_ball(kind, r, g, Point::origin(kind, n + 1)).unwrap();
            let out = geom(maximize_area(&ball, lambda, &MaximizeConfig::for_dimension(n)))?;
            let steps = out.trajectory.accepted_steps();
            let reason = out.trajectory.stopped.as_ref().map(|e| e.code());
            ensure(
                steps == 0 && matches!(out.trajectory.stopped, Some(GeomError::TrivialBody(_) | GeomError::ConvexityExit { .. })),
                || format!("{kind} n={n}: {steps} steps, stopped {reason:?}"),
            )?;
            seen.push(format!("{kind}{}", n + 1));
        }
    }
    Ok(format!("zero steps (TrivialBody) for {}", seen.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Check, u64); 9] = [
        ("warp/radius anchors", c1_radius_anchors, 1),
        ("measure anchors and convergence", c2_measure_anchors, 30),
        ("variation finite-difference suite", c3_variation_suite, 300),
        ("stability anchors", c4_stability_anchors, 60),
        ("lens enclosure margin", c5_lenses, 120),
        ("Blaschke property", c6_blaschke, 120),
        ("perturbation trajectories", c7_perturb, 120),
        ("area maximization", c8_maximize, 600),
        ("extremal-ball criticality", c9_extremal_balls, 60),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = run();
        let dt = t.elapsed();
        let res = match res {
            Ok(msg) if dt > Duration::from_secs(*budget) => Err(format!("{msg}; runtime {dt:.1?} over {budget} s")),
            r => r,
        };
        match res {
            Ok(msg) => println!("PASS criterion {}: {name} [{dt:.2?} / {budget} s] {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{dt:.2?} / {budget} s] {msg}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

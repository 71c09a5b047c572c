use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body::{Measure, RadialBody};
use crate::grid::SphereGrid;
use crate::linalg::Vector;
use crate::spaceform::{Point, SpaceformKind};
use crate::curvature::shape_operator;
use crate::error::{GeomError, Result};
use crate::scalar::{lit, Real};

use super::{
    deform, first_variations_from, integrate, normal_speed, second_variations_from, stability_operator_from,
    PushDirection, VariationField,
};

/// Least observed order accepted for the centered differences (nominal 2).
pub const MIN_ORDER: f64 = 1.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdRow<T> {
    pub h: T,
    pub fd: T,
    /// `|analytic - fd|`
    pub error: T,
}

/// Comparison of one analytic variation with its finite differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSeries<T> {
    pub name: String,
    pub derivative: u8,
    pub analytic: T,
    pub rows: Vec<FdRow<T>>,
    /// Richardson extrapolation of the two smallest steps.
    pub extrapolated: T,
    /// Integral of the absolute integrand, used as a floor for the relative error.
    pub scale: T,
    pub rel_error: T,
    /// `log_r |D_k| / |D_{k+1}|` for successive differences `D_k = FD(h_k) - FD(h_{k+1})`;
    /// `None` where the differences sit at the rounding floor.
    pub observed_orders: Vec<Option<f64>>,
    pub order_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport<T> {
    pub tol: T,
    pub series: Vec<FdSeries<T>>,
    pub pass: bool,
}

/// Checks the analytic first (`orders` containing 1) and second (2)
/// variations of volume and area against centered differences of
/// [`deform`] over the decreasing steps `h_sequence`.
pub fn finite_difference_check<T: Real>(
    body: &RadialBody<T>,
    vf: &VariationField<T>,
    orders: &[u8],
    h_sequence: &[T],
    tol: T,
) -> Result<FdReport<T>> {
    if h_sequence.len() < 2 || h_sequence.windows(2).any(|w| !(w[1] < w[0] && w[1] > T::zero())) {
        return Err(GeomError::Invalid("need at least two positive decreasing steps".into()));
    }
    let report = shape_operator(body)?;
    let m0 = body.measure();
    let mut plus = Vec::with_capacity(h_sequence.len());
    let mut minus = Vec::with_capacity(h_sequence.len());
    for &h in h_sequence {
        plus.push(deform(body, vf, h)?.measure());
        minus.push(deform(body, vf, -h)?.measure());
    }
    let v = normal_speed(&report, vf);
    let hmean: Vec<T> = report.mean_curvature();
    let abs_int = |f: &dyn Fn(usize) -> T| {
        let vals: Vec<T> = (0..v.len()).map(|i| f(i).abs()).collect();
        integrate(body, &report, &vals)
    };
    let mut series = Vec::new();
    if orders.contains(&1) {
        let fv = first_variations_from(body, &report, vf)?;
        let s_vol = abs_int(&|i| v[i]);
        let s_area = abs_int(&|i| v[i] * hmean[i]);
        series.push(make_series("dVol", 1, fv.d_vol, s_vol, h_sequence, &plus, &minus, m0, |m| m.volume, tol));
        series.push(make_series("dArea", 1, fv.d_area, s_area, h_sequence, &plus, &minus, m0, |m| m.area, tol));
    }
    if orders.contains(&2) && vf.direction == PushDirection::Normal {
        let sv = second_variations_from(body, &report, vf)?;
        let tv = stability_operator_from(body, &report, &vf.v);
        let a = vf.a.clone().unwrap_or_else(|| vec![T::zero(); v.len()]);
        let s_vol = abs_int(&|i| v[i] * v[i] * hmean[i]) + abs_int(&|i| a[i]);
        let s_area = abs_int(&|i| v[i] * tv[i]) + abs_int(&|i| hmean[i] * hmean[i] * v[i] * v[i]) + abs_int(&|i| a[i] * hmean[i]);
        series.push(make_series("d2Vol", 2, sv.d2_vol, s_vol, h_sequence, &plus, &minus, m0, |m| m.volume, tol));
        series.push(make_series("d2Area", 2, sv.d2_area, s_area, h_sequence, &plus, &minus, m0, |m| m.area, tol));
    }
    let pass = series.iter().all(|s| s.pass);
    Ok(FdReport { tol, series, pass })
}

#[allow(clippy::too_many_arguments)]
fn make_series<T: Real>(
    name: &str,
    derivative: u8,
    analytic: T,
    scale: T,
    hs: &[T],
    plus: &[Measure<T>],
    minus: &[Measure<T>],
    m0: Measure<T>,
    pick: impl Fn(&Measure<T>) -> T,
    tol: T,
) -> FdSeries<T> {
    let f0 = pick(&m0);
    let two = lit::<T>(2.0);
    let fds: Vec<T> = hs
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let (p, m) = (pick(&plus[k]), pick(&minus[k]));
            if derivative == 1 {
                (p - m) / (two * h)
            } else {
                (p - two * f0 + m) / (h * h)
            }
        })
        .collect();
    let rows = hs
        .iter()
        .zip(&fds)
        .map(|(&h, &fd)| FdRow { h, fd, error: (analytic - fd).abs() })
        .collect();
    // Rounding level of one difference quotient at step h.
    let floor = |h: T| {
        let mag = f0.abs().max(scale);
        let e = T::epsilon() * mag * lit(1e3);
        if derivative == 1 {
            e / h
        } else {
            e / (h * h)
        }
    };
    let k = hs.len();
    let mut observed = Vec::new();
    for i in 0..k.saturating_sub(2) {
        let d0 = (fds[i] - fds[i + 1]).abs();
        let d1 = (fds[i + 1] - fds[i + 2]).abs();
        if d1 <= floor(hs[i + 2]) || d0 <= floor(hs[i + 1]) {
            observed.push(None);
        } else {
            let r = (hs[i] / hs[i + 1]).as_f64();
            observed.push(Some((d0 / d1).as_f64().ln() / r.ln()));
        }
    }
    let order_ok = observed.iter().all(|o| o.is_none_or(|x| x >= MIN_ORDER));
    let r = hs[k - 2] / hs[k - 1];
    let extrapolated = fds[k - 1] + (fds[k - 1] - fds[k - 2]) / (r * r - T::one());
    let denom = analytic.abs().max(scale).max(T::min_positive_value());
    let rel_error = (analytic - extrapolated).abs() / denom;
    FdSeries {
        name: name.to_string(),
        derivative,
        analytic,
        rows,
        extrapolated,
        scale,
        rel_error,
        observed_orders: observed,
        order_ok,
        pass: order_ok && rel_error <= tol,
    }
}

/// Relative error bound of the randomized suite for sphere dimension `n`.
pub fn default_fd_tolerance<T: Real>(n: usize) -> T {
    if n == 1 {
        lit(1e-6)
    } else {
        lit(1e-3)
    }
}

/// Halving step sequence used by the randomized suite.
pub fn default_fd_steps<T: Real>(n: usize) -> Vec<T> {
    let h0 = if n == 1 { 4e-3 } else { 8e-3 };
    (0..4).map(|k| lit(h0 / f64::from(1u32 << k))).collect()
}

/// Random smooth (body, field) pair: a ball of radius in `[0.4, 0.9]`
/// perturbed by a quadratic polynomial of the direction, with a normal
/// speed and acceleration that are cubic polynomials of the direction.
pub fn random_pair<T: Real, R: Rng>(
    kind: SpaceformKind,
    grid: Arc<SphereGrid<T>>,
    rng: &mut R,
) -> Result<(RadialBody<T>, VariationField<T>)> {
    let m = grid.dimension() + 1;
    let radius = rng.gen_range(0.4..0.9);
    let shape = Poly::random(m, 2, 0.08, rng);
    let speed = Poly::random(m, 3, 1.0, rng);
    let accel = Poly::random(m, 3, 0.5, rng);
    let body = RadialBody::from_fn(kind, Point::origin(kind, m), grid.clone(), |d| {
        lit::<T>(radius) * (T::one() + shape.eval(d))
    })?;
    let dirs = grid.directions();
    let v = dirs.iter().map(|d| lit::<T>(speed.c0) + speed.eval(d)).collect();
    let a = dirs.iter().map(|d| accel.eval(d)).collect();
    Ok((body, VariationField::normal(v).with_acceleration(a)))
}

/// Polynomial without constant term in the direction components, stored by monomial.
struct Poly {
    c0: f64,
    terms: Vec<(Vec<usize>, f64)>,
}

impl Poly {
    fn random<R: Rng>(m: usize, degree: usize, scale: f64, rng: &mut R) -> Self {
        let mut monomials = Vec::new();
        let mut stack: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
        while let Some(idx) = stack.pop() {
            if idx.len() < degree {
                let last = *idx.last().expect("non-empty");
                for j in last..m {
                    let mut next = idx.clone();
                    next.push(j);
                    stack.push(next);
                }
            }
            monomials.push(idx);
        }
        let c = scale / monomials.len() as f64;
        let terms = monomials.into_iter().map(|idx| (idx, c * rng.gen_range(-1.0..1.0))).collect();
        Poly { c0: rng.gen_range(0.5..1.5), terms }
    }

    fn eval<T: Real>(&self, d: &Vector<T>) -> T {
        self.terms
            .iter()
            .map(|(idx, c)| idx.iter().fold(lit::<T>(*c), |acc, &i| acc * d[i]))
            .sum()
    }
}

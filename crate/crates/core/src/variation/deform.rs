use crate::body::RadialBody;
use crate::error::{GeomError, Result};
use crate::grid::FitCoeffs;
use crate::linalg::{solve_dense, Vector};
use crate::scalar::{lit, Real};
use crate::spaceform::{exp_raw, log_raw, Point, SpaceformKind};

use super::{push_vector, VariationField};

const MAX_NEWTON: usize = 40;

/// Moves every boundary point `p` to `exp_p((t v(p) + t^2 a(p) / 2) push(p))` and resamples
/// the moved boundary on the grid rays.
///
/// The moved surface is parametrized through the local fits of `rho`, `v`
/// and `a`; for each node ray the source chart point is found by Newton's
/// method. Rays whose stencil carries no motion keep their value exactly.
pub fn deform<T: Real>(body: &RadialBody<T>, vf: &VariationField<T>, t: T) -> Result<RadialBody<T>> {
    if vf.v.len() != body.len() {
        return Err(GeomError::Invalid("variation field length mismatch".into()));
    }
    if t == T::zero() || vf.is_zero() {
        return Ok(body.clone());
    }
    let grid = body.grid().clone();
    let moving: Vec<bool> = (0..body.len())
        .map(|j| grid.stencil(j).iter().chain([&j]).any(|&k| vf.v[k] != T::zero() || vf.a.as_ref().is_some_and(|a| a[k] != T::zero())))
        .collect();
    let mut rho = body.rho().to_vec();
    let ctx = Ctx { body, vf, t };
    for j in 0..body.len() {
        if moving[j] {
            rho[j] = ctx.solve_ray(j)?;
        }
    }
    for (j, r) in rho.iter().enumerate() {
        if !(*r > T::zero()) || (body.kind() == SpaceformKind::Spherical && *r >= T::FRAC_PI_2()) {
            return Err(GeomError::GraphFailure { node: j, reason: format!("moved radius {r} out of range") });
        }
    }
    body.with_rho(rho)
}

struct Ctx<'a, T: Real> {
    body: &'a RadialBody<T>,
    vf: &'a VariationField<T>,
    t: T,
}

struct Chart<T> {
    node: usize,
    rho: FitCoeffs<T>,
    v: FitCoeffs<T>,
    a: Option<FitCoeffs<T>>,
}

impl<T: Real> Ctx<'_, T> {
    fn chart(&self, node: usize) -> Chart<T> {
        let g = self.body.grid();
        let a = self.vf.a.as_ref().map(|a| g.fit(node, a));
        Chart { node, rho: g.fit(node, self.body.rho()), v: g.fit(node, &self.vf.v), a }
    }

    /// Moved position of the boundary point at chart coordinate `s`.
    fn moved(&self, ch: &Chart<T>, s: [T; 2]) -> Option<Point<T>> {
        let body = self.body;
        let grid = body.grid();
        let n = body.dimension();
        let kind = body.kind();
        let (r, dr) = grid.eval_fit(&ch.rho, s);
        let (mut w, _) = grid.eval_fit(&ch.v, s);
        if let Some(a) = &ch.a {
            w += grid.eval_fit(a, s).0 * self.t * lit(0.5);
        }
        let (xi, dxi) = grid.chart_direction(ch.node, s);
        let c = body.center().coords;
        let m = body.map_direction(&xi);
        let p = kind.radial_profile(r);
        let x = match kind {
            SpaceformKind::Euclidean => c.axpy(r, &m),
            _ => (c * p.a).axpy(p.b, &m),
        };
        let xr = (c * p.da).axpy(p.db, &m);
        let mut tang = [Vector::zeros(c.len()); 2];
        for a in 0..n {
            tang[a] = (xr * dr[a]).axpy(p.b, &body.map_direction(&dxi[a]));
        }
        let nu = normal_from(kind, &xr, &tang[..n])?;
        let xp = Point { kind, coords: x };
        let push = push_vector(&self.vf.direction, &xp, &nu) * (self.t * w);
        if kind == SpaceformKind::Spherical && kind.inner(&push, &push).sqrt() >= T::PI() {
            return None;
        }
        Some(exp_raw(&xp, &push))
    }

    /// Chart coordinates of the direction of `q` seen from the center, in
    /// the chart of node `j`, and its distance from the center.
    fn ray_coords(&self, j: usize, q: &Point<T>) -> Option<([T; 2], T)> {
        let (v, d) = log_raw(self.body.center(), q);
        if !(d > T::zero()) {
            return None;
        }
        let dir = self.body.unmap_direction(&v);
        Some((self.body.grid().to_chart(j, &dir)?, d))
    }

    fn residual(&self, j: usize, ch: &Chart<T>, s: [T; 2]) -> Option<([T; 2], T)> {
        let q = self.moved(ch, s)?;
        self.ray_coords(j, &q)
    }

    fn solve_ray(&self, j: usize) -> Result<T> {
        let grid = self.body.grid();
        let n = self.body.dimension();
        let h = grid.spacing();
        let fail = |reason: &str| GeomError::GraphFailure { node: j, reason: reason.to_string() };
        let mut ch = self.chart(j);
        let mut s = [T::zero(); 2];
        let eps = h * lit(1e-6);
        let mut best: Option<(T, T)> = None;
        for _ in 0..MAX_NEWTON {
            let (r, d) = self.residual(j, &ch, s).ok_or_else(|| fail("moved point left the chart"))?;
            let rn = r[0].abs().max(r[1].abs());
            best = match best {
                Some((bn, bd)) if bn <= rn => Some((bn, bd)),
                _ => Some((rn, d)),
            };
            if rn <= T::epsilon() * h {
                break;
            }
            let mut jac = vec![T::zero(); n * n];
            for b in 0..n {
                let mut sp = s;
                let mut sm = s;
                sp[b] += eps;
                sm[b] -= eps;
                let (rp, _) = self.residual(j, &ch, sp).ok_or_else(|| fail("moved point left the chart"))?;
                let (rm, _) = self.residual(j, &ch, sm).ok_or_else(|| fail("moved point left the chart"))?;
                for a in 0..n {
                    jac[a * n + b] = (rp[a] - rm[a]) / (eps + eps);
                }
            }
            let det = if n == 1 { jac[0] } else { jac[0] * jac[3] - jac[1] * jac[2] };
            if !(det > T::zero()) {
                return Err(fail("moved boundary folds over the ray"));
            }
            let step = solve_dense(&jac, &[-r[0], -r[1]][..n], n).ok_or_else(|| fail("singular Jacobian"))?;
            let mut moved = T::zero();
            for a in 0..n {
                s[a] += step[a];
                moved = moved.max(step[a].abs());
            }
            if s[0].abs().max(s[1].abs()) > h * lit(1.5) {
                // Re-centre on the node nearest to the current source direction.
                let (xi, _) = grid.chart_direction(ch.node, s);
                let k = grid.nearest_node(&xi, ch.node);
                if k != ch.node {
                    s = grid.to_chart(k, &xi).ok_or_else(|| fail("chart switch failed"))?;
                    ch = self.chart(k);
                }
            }
            if moved <= T::epsilon() * h {
                let (r, d) = self.residual(j, &ch, s).ok_or_else(|| fail("moved point left the chart"))?;
                let rn = r[0].abs().max(r[1].abs());
                if best.is_none_or(|(bn, _)| rn <= bn) {
                    best = Some((rn, d));
                }
                break;
            }
        }
        match best {
            Some((rn, d)) if rn <= h * lit(1e-10) => Ok(d),
            _ => Err(fail("ray re-projection did not converge")),
        }
    }
}

/// Inward unit normal from the radial derivative and chart tangents.
pub(crate) fn normal_from<T: Real>(kind: SpaceformKind, xr: &Vector<T>, tang: &[Vector<T>]) -> Option<Vector<T>> {
    let n = tang.len();
    let mut g = [[T::zero(); 2]; 2];
    for a in 0..n {
        for b in 0..n {
            g[a][b] = kind.inner(&tang[a], &tang[b]);
        }
    }
    let gi = crate::linalg::inverse_small(&g, n)?;
    let mut proj = [T::zero(); 2];
    for a in 0..n {
        proj[a] = kind.inner(xr, &tang[a]);
    }
    let mut nrm = *xr;
    for a in 0..n {
        let mut c = T::zero();
        for b in 0..n {
            c += gi[a][b] * proj[b];
        }
        nrm = nrm.axpy(-c, &tang[a]);
    }
    let len = kind.inner(&nrm, &nrm).max(T::zero()).sqrt();
    (len > T::zero()).then(|| nrm * -len.recip())
}

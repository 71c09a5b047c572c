//! Direction grids on the unit `n`-sphere (`n in {1, 2}`) with quadrature
//! weights and local polynomial fits used as derivative stencils.
//!
//! Every node carries a chart: the angle offset for `n = 1`, and gnomonic
//! coordinates on the tangent plane for `n = 2`. A node's fit expresses a
//! nodal field near that node as `f(x) = f_i + sum_k c_k m_k(x)` over the
//! monomials `m_k` of degree `1..=8` (`n = 1`, nine-point interpolation) or
//! degree `1..=4` (`n = 2`, least squares over the three-ring).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{pseudo_inverse, Vector};
use crate::scalar::{lit, Real};

/// Serializable grid descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GridSpec {
    /// `nodes` uniform angles on the circle.
    Circle { nodes: usize },
    /// Vertices of the icosahedron subdivided `level` times.
    Icosphere { level: u32 },
}

impl GridSpec {
    pub fn dimension(&self) -> usize {
        match self {
            GridSpec::Circle { .. } => 1,
            GridSpec::Icosphere { .. } => 2,
        }
    }

    /// Default resolution for the given sphere dimension.
    pub fn default_for(n: usize) -> Self {
        match n {
            1 => GridSpec::Circle { nodes: 512 },
            _ => GridSpec::Icosphere { level: 5 },
        }
    }
}

/// Half-width of the centered circle stencil.
pub const CIRCLE_HALF_WIDTH: usize = 4;
const CIRCLE_DEGREE: usize = 2 * CIRCLE_HALF_WIDTH;
const ICO_DEGREE: usize = 4;
const ICO_RINGS: usize = 3;
const WEIGHT_POWER: i32 = 4;

#[derive(Debug, Clone)]
struct LocalFit<T> {
    neighbors: Vec<usize>,
    /// Row-major `ncoef x neighbors.len()`.
    coef: Vec<T>,
}

/// Monomial exponents, in coefficient order.
fn exponents(n: usize) -> Vec<(u32, u32)> {
    match n {
        1 => (1..=CIRCLE_DEGREE as u32).map(|a| (a, 0)).collect(),
        _ => {
            let mut out = Vec::new();
            for d in 1..=ICO_DEGREE as u32 {
                for b in 0..=d {
                    out.push((d - b, b));
                }
            }
            out
        }
    }
}

/// A direction grid on the unit `n`-sphere.
#[derive(Debug, Clone)]
pub struct SphereGrid<T: Real> {
    spec: GridSpec,
    dirs: Vec<Vector<T>>,
    weights: Vec<T>,
    /// Tangent basis of each chart (one vector for `n = 1`, two for `n = 2`).
    tangents: Vec<[Vector<T>; 2]>,
    fits: Vec<LocalFit<T>>,
    exps: Vec<(u32, u32)>,
    ring1: Vec<Vec<usize>>,
    faces: Vec<[usize; 3]>,
    spacing: T,
}

impl<T: Real> SphereGrid<T> {
    pub fn new(spec: GridSpec) -> Result<Self> {
        match spec {
            GridSpec::Circle { nodes } => Self::circle(nodes),
            GridSpec::Icosphere { level } => Self::icosphere(level),
        }
    }

    /// Uniform grid of `nodes` angles `2 pi i / nodes`.
    pub fn circle(nodes: usize) -> Result<Self> {
        if nodes < 2 * CIRCLE_HALF_WIDTH + 4 {
            return Err(GeomError::Invalid(format!("circle grid needs at least {} nodes", 2 * CIRCLE_HALF_WIDTH + 4)));
        }
        let h = T::TAU() / lit(nodes as f64);
        let dirs: Vec<Vector<T>> = (0..nodes)
            .map(|i| {
                let th = h * lit(i as f64);
                Vector::from_slice(&[th.cos(), th.sin()])
            })
            .collect();
        let tangents = dirs.iter().map(|d| [Vector::from_slice(&[-d[1], d[0]]), Vector::zeros(2)]).collect();
        let weights = vec![h; nodes];
        // Interpolating polynomial through offsets -w..=w (centre excluded from
        // the unknowns since the fit reproduces f_i exactly).
        let w = CIRCLE_HALF_WIDTH as i64;
        let offs: Vec<i64> = (-w..=w).filter(|k| *k != 0).collect();
        let m = offs.len();
        let mut a = vec![T::zero(); m * CIRCLE_DEGREE];
        for (r, k) in offs.iter().enumerate() {
            let x: T = lit(*k as f64);
            for d in 0..CIRCLE_DEGREE {
                a[r * CIRCLE_DEGREE + d] = x.powi(d as i32 + 1);
            }
        }
        let p = pseudo_inverse(&a, m, CIRCLE_DEGREE)
            .ok_or_else(|| GeomError::Invalid("singular circle stencil".into()))?;
        let mut coef = p;
        for d in 0..CIRCLE_DEGREE {
            let s = h.powi(d as i32 + 1).recip();
            for j in 0..m {
                coef[d * m + j] *= s;
            }
        }
        let fits = (0..nodes)
            .map(|i| LocalFit {
                neighbors: offs.iter().map(|k| (i as i64 + k).rem_euclid(nodes as i64) as usize).collect(),
                coef: coef.clone(),
            })
            .collect();
        let ring1 = (0..nodes).map(|i| vec![(i + nodes - 1) % nodes, (i + 1) % nodes]).collect();
        Ok(SphereGrid {
            spec: GridSpec::Circle { nodes },
            dirs,
            weights,
            tangents,
            fits,
            exps: exponents(1),
            ring1,
            faces: Vec::new(),
            spacing: h,
        })
    }

    /// Icosphere of subdivision `level` (`10 * 4^level + 2` vertices).
    pub fn icosphere(level: u32) -> Result<Self> {
        if !(2..=7).contains(&level) {
            return Err(GeomError::Invalid(format!("icosphere level {level} outside 2..=7")));
        }
        let (verts, faces) = icosphere_mesh(level);
        let dirs: Vec<Vector<T>> = verts
            .iter()
            .map(|v| Vector::from_slice(&[lit(v[0]), lit(v[1]), lit(v[2])]))
            .collect();
        let nv = dirs.len();
        let mut weights = vec![T::zero(); nv];
        let third = lit::<T>(1.0 / 3.0);
        for f in &faces {
            let e = spherical_triangle_area(&dirs[f[0]], &dirs[f[1]], &dirs[f[2]]);
            for &k in f {
                weights[k] += e * third;
            }
        }
        let mut ring1: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for f in &faces {
            for a in 0..3 {
                let (u, v) = (f[a], f[(a + 1) % 3]);
                if !ring1[u].contains(&v) {
                    ring1[u].push(v);
                }
                if !ring1[v].contains(&u) {
                    ring1[v].push(u);
                }
            }
        }
        let mut edge_sum = T::zero();
        let mut edge_count = 0usize;
        for (u, nb) in ring1.iter().enumerate() {
            for &v in nb {
                if v > u {
                    edge_sum += dirs[u].dot(&dirs[v]).min(T::one()).acos();
                    edge_count += 1;
                }
            }
        }
        let spacing = edge_sum / lit(edge_count as f64);
        let tangents: Vec<[Vector<T>; 2]> = dirs.iter().map(tangent_basis).collect();
        let exps = exponents(2);
        let ncoef = exps.len();
        let mut fits = Vec::with_capacity(nv);
        for i in 0..nv {
            let neighbors = k_ring(&ring1, i, ICO_RINGS);
            let m = neighbors.len();
            let mut a = vec![T::zero(); m * ncoef];
            let mut rw = vec![T::one(); m];
            for (r, &j) in neighbors.iter().enumerate() {
                let (x, y) = gnomonic(&dirs[i], &tangents[i], &dirs[j]);
                let (x, y) = (x / spacing, y / spacing);
                // Row weights favour the inner rings.
                rw[r] = (T::one() + x * x + y * y).powi(WEIGHT_POWER).recip();
                for (k, &(ea, eb)) in exps.iter().enumerate() {
                    a[r * ncoef + k] = rw[r] * x.powi(ea as i32) * y.powi(eb as i32);
                }
            }
            let mut coef = pseudo_inverse(&a, m, ncoef)
                .ok_or_else(|| GeomError::Invalid(format!("rank deficient stencil at node {i}")))?;
            for (k, &(ea, eb)) in exps.iter().enumerate() {
                let s = spacing.powi((ea + eb) as i32).recip();
                for j in 0..m {
                    coef[k * m + j] *= s * rw[j];
                }
            }
            fits.push(LocalFit { neighbors, coef });
        }
        Ok(SphereGrid {
            spec: GridSpec::Icosphere { level },
            dirs,
            weights,
            tangents,
            fits,
            exps,
            ring1,
            faces,
            spacing,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Dimension `n` of the sphere of directions.
    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vector<T>] {
        &self.dirs
    }

    pub fn direction(&self, i: usize) -> &Vector<T> {
        &self.dirs[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Nominal angular spacing between neighbouring nodes.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn one_ring(&self, i: usize) -> &[usize] {
        &self.ring1[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Nodes entering the local fit of node `i`.
    pub fn stencil(&self, i: usize) -> &[usize] {
        &self.fits[i].neighbors
    }

    /// Fit coefficients of a nodal field around node `i`.
    pub fn fit(&self, i: usize, values: &[T]) -> FitCoeffs<T> {
        let fit = &self.fits[i];
        let m = fit.neighbors.len();
        let base = values[i];
        let mut c = [T::zero(); 14];
        for (k, ck) in c.iter_mut().enumerate().take(self.exps.len()) {
            let row = &fit.coef[k * m..(k + 1) * m];
            let mut s = T::zero();
            for (w, &j) in row.iter().zip(&fit.neighbors) {
                s += *w * (values[j] - base);
            }
            *ck = s;
        }
        FitCoeffs { value: base, c }
    }

    /// First and second chart derivatives of a nodal field at node `i`.
    pub fn derivatives(&self, i: usize, values: &[T]) -> Jet<T> {
        let c = self.fit(i, values);
        let two = lit::<T>(2.0);
        match self.dimension() {
            1 => Jet { value: c.value, grad: [c.c[0], T::zero()], hess: [[two * c.c[1], T::zero()], [T::zero(), T::zero()]] },
            _ => Jet {
                value: c.value,
                grad: [c.c[0], c.c[1]],
                hess: [[two * c.c[2], c.c[3]], [c.c[3], two * c.c[4]]],
            },
        }
    }

    /// Value and gradient of a fitted field at chart point `x` of node `i`.
    pub fn eval_fit(&self, coeffs: &FitCoeffs<T>, x: [T; 2]) -> (T, [T; 2]) {
        let mut v = coeffs.value;
        let mut gx = T::zero();
        let mut gy = T::zero();
        for (k, &(a, b)) in self.exps.iter().enumerate() {
            let ck = coeffs.c[k];
            let xa = pow(x[0], a);
            let yb = pow(x[1], b);
            v += ck * xa * yb;
            if a > 0 {
                gx += ck * lit::<T>(a as f64) * pow(x[0], a - 1) * yb;
            }
            if b > 0 {
                gy += ck * lit::<T>(b as f64) * xa * pow(x[1], b - 1);
            }
        }
        (v, [gx, gy])
    }

    /// Direction at chart point `x` of node `i`, with its chart derivatives.
    pub fn chart_direction(&self, i: usize, x: [T; 2]) -> (Vector<T>, [Vector<T>; 2]) {
        match self.dimension() {
            1 => {
                let th = self.spacing * lit(i as f64) + x[0];
                let (s, c) = th.sin_cos();
                (Vector::from_slice(&[c, s]), [Vector::from_slice(&[-s, c]), Vector::zeros(2)])
            }
            _ => {
                let [e1, e2] = &self.tangents[i];
                let p = self.dirs[i].axpy(x[0], e1).axpy(x[1], e2);
                let inv = p.norm().recip();
                let xi = p * inv;
                let dx = e1.axpy(-xi.dot(e1), &xi) * inv;
                let dy = e2.axpy(-xi.dot(e2), &xi) * inv;
                (xi, [dx, dy])
            }
        }
    }

    /// Chart coordinates of a unit direction in the chart of node `i`;
    /// `None` if the direction lies in the opposite hemisphere.
    pub fn to_chart(&self, i: usize, dir: &Vector<T>) -> Option<[T; 2]> {
        match self.dimension() {
            1 => {
                let th = dir[1].atan2(dir[0]);
                let th0 = self.spacing * lit(i as f64);
                let mut d = th - th0;
                let tau = T::TAU();
                while d > T::PI() {
                    d -= tau;
                }
                while d < -T::PI() {
                    d += tau;
                }
                Some([d, T::zero()])
            }
            _ => {
                let c = dir.dot(&self.dirs[i]);
                if c <= T::zero() {
                    return None;
                }
                Some(gnomonic_raw(c, &self.tangents[i], dir))
            }
        }
    }

    /// Node whose direction is closest to `dir`, searching from `hint`.
    pub fn nearest_node(&self, dir: &Vector<T>, hint: usize) -> usize {
        match self.dimension() {
            1 => {
                let th = dir[1].atan2(dir[0]);
                let k = (th / self.spacing).round().to_i64().unwrap_or(0);
                k.rem_euclid(self.len() as i64) as usize
            }
            _ => {
                let mut cur = hint.min(self.len() - 1);
                let mut best = self.dirs[cur].dot(dir);
                loop {
                    let mut moved = false;
                    for &j in &self.ring1[cur] {
                        let d = self.dirs[j].dot(dir);
                        if d > best {
                            best = d;
                            cur = j;
                            moved = true;
                        }
                    }
                    if !moved {
                        return cur;
                    }
                }
            }
        }
    }
}

#[inline]
fn pow<T: Real>(x: T, k: u32) -> T {
    match k {
        0 => T::one(),
        1 => x,
        2 => x * x,
        _ => x.powi(k as i32),
    }
}

/// Fit of a nodal field: node value plus monomial coefficients.
#[derive(Debug, Clone, Copy)]
pub struct FitCoeffs<T> {
    pub value: T,
    pub c: [T; 14],
}

/// Value, gradient and Hessian in chart coordinates at a node.
#[derive(Debug, Clone, Copy)]
pub struct Jet<T> {
    pub value: T,
    pub grad: [T; 2],
    pub hess: [[T; 2]; 2],
}

fn tangent_basis<T: Real>(d: &Vector<T>) -> [Vector<T>; 2] {
    let mut k = 0;
    for j in 1..3 {
        if d[j].abs() < d[k].abs() {
            k = j;
        }
    }
    let a = Vector::basis(3, k);
    let e1 = a.axpy(-a.dot(d), d);
    let e1 = e1 * e1.norm().recip();
    let e2 = Vector::from_slice(&[
        d[1] * e1[2] - d[2] * e1[1],
        d[2] * e1[0] - d[0] * e1[2],
        d[0] * e1[1] - d[1] * e1[0],
    ]);
    [e1, e2]
}

fn gnomonic<T: Real>(center: &Vector<T>, basis: &[Vector<T>; 2], d: &Vector<T>) -> (T, T) {
    let [x, y] = gnomonic_raw(d.dot(center), basis, d);
    (x, y)
}

fn gnomonic_raw<T: Real>(c: T, basis: &[Vector<T>; 2], d: &Vector<T>) -> [T; 2] {
    [d.dot(&basis[0]) / c, d.dot(&basis[1]) / c]
}

fn spherical_triangle_area<T: Real>(a: &Vector<T>, b: &Vector<T>, c: &Vector<T>) -> T {
    let cross = [
        b[1] * c[2] - b[2] * c[1],
        b[2] * c[0] - b[0] * c[2],
        b[0] * c[1] - b[1] * c[0],
    ];
    let triple = a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2];
    let denom = T::one() + a.dot(b) + b.dot(c) + c.dot(a);
    lit::<T>(2.0) * triple.abs().atan2(denom)
}

fn k_ring(ring1: &[Vec<usize>], i: usize, k: usize) -> Vec<usize> {
    let mut seen = vec![i];
    let mut frontier = vec![i];
    for _ in 0..k {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &ring1[u] {
                if !seen.contains(&v) {
                    seen.push(v);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    seen.remove(0);
    seen
}

/// Vertices and faces of the subdivided icosahedron, in `f64`.
fn icosphere_mesh(level: u32) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let norm = |v: [f64; 3]| {
        let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / s, v[1] / s, v[2] / s]
    };
    let mut verts: Vec<[f64; 3]> = raw.iter().map(|v| norm(*v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(norm([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sphere_area() {
        let g = SphereGrid::<f64>::circle(512).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - std::f64::consts::TAU).abs() < 1e-10);
        for level in 2..5 {
            let g = SphereGrid::<f64>::icosphere(level).unwrap();
            assert_eq!(g.len(), 10 * 4usize.pow(level) + 2);
            let s: f64 = g.weights().iter().sum();
            assert!((s - 4.0 * std::f64::consts::PI).abs() < 1e-10, "level {level}: {s}");
            assert!(g.weights().iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn circle_derivatives_of_trig_polynomial() {
        let g = SphereGrid::<f64>::circle(256).unwrap();
        let f: Vec<f64> = (0..256).map(|i| (3.0 * g.spacing() * i as f64).sin()).collect();
        for i in [0usize, 17, 255] {
            let th = g.spacing() * i as f64;
            let j = g.derivatives(i, &f);
            assert!((j.grad[0] - 3.0 * (3.0 * th).cos()).abs() < 1e-9);
            assert!((j.hess[0][0] + 9.0 * (3.0 * th).sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn icosphere_fit_reproduces_quartics() {
        let g = SphereGrid::<f64>::icosphere(3).unwrap();
        // f = z restricted to the sphere; in each chart the Laplacian on the
        // unit sphere is -2 z and the tangent gradient is e_z projected.
        let f: Vec<f64> = g.directions().iter().map(|d| d[2]).collect();
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let j = g.derivatives(i, &f);
            // chart metric is the identity at the node, Christoffels vanish for gnomonic charts.
            let lap = j.hess[0][0] + j.hess[1][1];
            worst = worst.max((lap + 2.0 * f[i]).abs());
        }
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn nearest_node_walk() {
        let g = SphereGrid::<f64>::icosphere(2).unwrap();
        for i in (0..g.len()).step_by(7) {
            assert_eq!(g.nearest_node(g.direction(i), 0), i);
        }
        let c = SphereGrid::<f64>::circle(64).unwrap();
        assert_eq!(c.nearest_node(c.direction(63), 0), 63);
    }
}

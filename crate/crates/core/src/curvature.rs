//! Second fundamental form of radial boundaries and lambda-convexity checks.

use serde::{Deserialize, Serialize};

use crate::body::RadialBody;
use crate::error::{GeomError, Result};
use crate::linalg::{inverse_small, sym2_eigenvalues, Vector};
use crate::scalar::{lit, Real};
use crate::spaceform::{distance_raw, exp_raw, radius_of_lambda, Point, TangentVector};

/// Immersion threshold on the chart metric determinant.
pub const MIN_METRIC_DET: f64 = 1e-14;

/// Curvature data at one node. Matrices are in the node chart and only the
/// leading `n x n` block is meaningful.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NodeCurvature<T: Real> {
    /// Inward unit normal.
    pub normal: TangentVector<T>,
    pub metric: [[T; 2]; 2],
    pub second_form: [[T; 2]; 2],
    /// Principal curvatures, ascending; the second entry is unused for `n = 1`.
    pub kappa: [T; 2],
    pub mean: T,
    pub trace_a2: T,
    #[serde(skip)]
    pub(crate) metric_inv: [[T; 2]; 2],
    /// `g^{ij} Gamma^k_ij`, so that `Laplace f = g^{ij} f_ij - gamma^k f_k`.
    #[serde(skip)]
    pub(crate) gamma: [T; 2],
    #[serde(skip)]
    pub(crate) area_density: T,
}

impl<T: Real> NodeCurvature<T> {
    pub fn kappa_min(&self) -> T {
        self.kappa[0]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvatureReport<T: Real> {
    pub n: usize,
    pub nodes: Vec<NodeCurvature<T>>,
}

impl<T: Real> CurvatureReport<T> {
    pub fn kappa_min(&self) -> Vec<T> {
        self.nodes.iter().map(|c| c.kappa[0]).collect()
    }

    pub fn mean_curvature(&self) -> Vec<T> {
        self.nodes.iter().map(|c| c.mean).collect()
    }

    pub fn trace_a2(&self) -> Vec<T> {
        self.nodes.iter().map(|c| c.trace_a2).collect()
    }

    /// `sqrt(det g)` per node (area element against the unit-sphere measure).
    pub fn area_density(&self) -> Vec<T> {
        self.nodes.iter().map(|c| c.area_density).collect()
    }

    /// Principal curvatures of node `i` (`n` values).
    pub fn principal(&self, i: usize) -> &[T] {
        &self.nodes[i].kappa[..self.n]
    }

    pub fn global_min_kappa(&self) -> T {
        self.nodes.iter().fold(T::infinity(), |m, c| m.min(c.kappa[0]))
    }

    /// CSV with columns `node,k1..kn,H`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["node".to_string()];
        header.extend((1..=self.n).map(|k| format!("k{k}")));
        header.push("H".into());
        w.write_record(&header).expect("in-memory write");
        for (i, c) in self.nodes.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(c.kappa[..self.n].iter().map(|k| format!("{k}")));
            row.push(format!("{}", c.mean));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Shape operator of the boundary at every node.
pub fn shape_operator<T: Real>(body: &RadialBody<T>) -> Result<CurvatureReport<T>> {
    let n = body.dimension();
    let kind = body.kind();
    let ip = |a: &Vector<T>, b: &Vector<T>| kind.inner(a, b);
    let mut nodes = Vec::with_capacity(body.len());
    for i in 0..body.len() {
        let jet = body.surface_jet(i);
        let (g, det) = body.metric_at(&jet);
        if !(det >= lit(MIN_METRIC_DET)) {
            return Err(GeomError::NumericalDegeneracy { node: i, reason: format!("metric determinant {det}") });
        }
        let gi = inverse_small(&g, n)
            .ok_or_else(|| GeomError::NumericalDegeneracy { node: i, reason: "singular metric".into() })?;
        let mut nrm = jet.xr;
        let mut proj = [T::zero(); 2];
        for a in 0..n {
            proj[a] = ip(&jet.xr, &jet.xi[a]);
        }
        for a in 0..n {
            let mut s = T::zero();
            for b in 0..n {
                s += gi[a][b] * proj[b];
            }
            nrm = nrm.axpy(-s, &jet.xi[a]);
        }
        let len = ip(&nrm, &nrm).max(T::zero()).sqrt();
        if !(len > T::zero()) {
            return Err(GeomError::NumericalDegeneracy { node: i, reason: "radial direction tangent to the boundary".into() });
        }
        let nu = nrm * -len.recip();
        let mut h = [[T::zero(); 2]; 2];
        for a in 0..n {
            for b in 0..n {
                h[a][b] = ip(&jet.xij[a][b], &nu);
            }
        }
        let (kappa, mean, trace_a2) = if n == 1 {
            let k = h[0][0] * gi[0][0];
            ([k, T::zero()], k, k * k)
        } else {
            // Whiten with the Cholesky factor g = L L^T so the eigenproblem is symmetric.
            let l00 = g[0][0].sqrt();
            let l10 = g[1][0] / l00;
            let l11 = (g[1][1] - l10 * l10).sqrt();
            let s00 = h[0][0] / (l00 * l00);
            let s01 = (h[0][1] - l10 * s00 * l00) / (l00 * l11);
            let s11 = (h[1][1] - lit::<T>(2.0) * l10 * s01 * l11 - l10 * l10 * s00) / (l11 * l11);
            let (k0, k1) = sym2_eigenvalues(s00, s01, s11);
            ([k0, k1], k0 + k1, k0 * k0 + k1 * k1)
        };
        let mut gamma = [T::zero(); 2];
        for k in 0..n {
            let mut s = T::zero();
            for a in 0..n {
                for b in 0..n {
                    let mut chr = T::zero();
                    for l in 0..n {
                        chr += gi[k][l] * ip(&jet.xij[a][b], &jet.xi[l]);
                    }
                    s += gi[a][b] * chr;
                }
            }
            gamma[k] = s;
        }
        let x = Point { kind, coords: jet.x };
        nodes.push(NodeCurvature {
            normal: TangentVector { base: x, vec: nu },
            metric: g,
            second_form: h,
            kappa,
            mean,
            trace_a2,
            metric_inv: gi,
            gamma,
            area_density: det.sqrt(),
        });
    }
    Ok(CurvatureReport { n, nodes })
}

/// Default convexity tolerance for a boundary of dimension `n`.
pub fn default_tolerance<T: Real>(n: usize) -> T {
    if n == 1 {
        lit(1e-6)
    } else {
        lit(1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LambdaCheck<T: Real> {
    pub lambda: T,
    pub is_lambda_convex: bool,
    pub min_kappa: T,
    /// Node of largest `kappa_1`, if that exceeds `lambda + tol`.
    pub witness_strict: Option<usize>,
    /// Node attaining `min_kappa`.
    pub min_node: usize,
}

pub fn lambda_convexity_check<T: Real>(body: &RadialBody<T>, lambda: T, tol: T) -> Result<LambdaCheck<T>> {
    let report = shape_operator(body)?;
    Ok(lambda_check_from(&report, lambda, tol))
}

pub fn lambda_check_from<T: Real>(report: &CurvatureReport<T>, lambda: T, tol: T) -> LambdaCheck<T> {
    let k = report.kappa_min();
    let (mut min_node, mut max_node) = (0, 0);
    for (i, v) in k.iter().enumerate() {
        if *v < k[min_node] {
            min_node = i;
        }
        if *v > k[max_node] {
            max_node = i;
        }
    }
    LambdaCheck {
        lambda,
        is_lambda_convex: k[min_node] >= lambda - tol,
        min_kappa: k[min_node],
        witness_strict: (k[max_node] > lambda + tol).then_some(max_node),
        min_node,
    }
}

/// Center of the supporting ball of radius `radius` at node `i`.
pub fn supporting_center<T: Real>(report: &CurvatureReport<T>, i: usize, radius: T) -> Point<T> {
    let nu = &report.nodes[i].normal;
    exp_raw(&nu.base, &(nu.vec * radius))
}

/// Neighbourhood radius used by [`supporting_ball_test`], in grid spacings.
pub const SUPPORT_NEIGHBORHOOD: f64 = 5.0;

/// Whether the boundary nodes within `5` grid spacings of node `i` lie in
/// the closed supporting ball of curvature `lambda` at `i`.
pub fn supporting_ball_test<T: Real>(body: &RadialBody<T>, report: &CurvatureReport<T>, node: usize, lambda: T) -> Result<bool> {
    let radius = radius_of_lambda(body.kind(), lambda)?.require_radius()?;
    let c = supporting_center(report, node, radius);
    let p = body.node_point(node);
    let local = report.nodes[node].area_density.powf(T::one() / lit(body.dimension() as f64));
    let delta = lit::<T>(SUPPORT_NEIGHBORHOOD) * body.grid().spacing() * local;
    let tol = lit::<T>(1e-12) * (T::one() + radius);
    for j in 0..body.len() {
        let q = body.node_point(j);
        if distance_raw(&p, &q) <= delta && distance_raw(&c, &q) > radius + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Node of largest `kappa_1` (lowest index among values within `tol` of the
/// maximum); fails when no node exceeds `lambda + tol`.
pub fn strict_point<T: Real>(body: &RadialBody<T>, lambda: T, tol: T) -> Result<usize> {
    let report = shape_operator(body)?;
    strict_point_from(&report, lambda, tol)
}

pub fn strict_point_from<T: Real>(report: &CurvatureReport<T>, lambda: T, tol: T) -> Result<usize> {
    let k = report.kappa_min();
    let max = k.iter().fold(T::neg_infinity(), |m, v| m.max(*v));
    if !(max > lambda + tol) {
        return Err(GeomError::NoStrictPoint { max_kappa: max.as_f64(), lambda: lambda.as_f64() });
    }
    Ok(k.iter().position(|v| *v >= max - tol).expect("maximum exists"))
}

/// Distance tolerance of [`global_blaschke_check`].
pub const BLASCHKE_TOL: f64 = 1e-8;

/// Whether every supporting ball of curvature `lambda` contains every node.
pub fn global_blaschke_check<T: Real>(body: &RadialBody<T>, lambda: T) -> Result<bool> {
    let report = shape_operator(body)?;
    let tol = default_tolerance(body.dimension());
    let check = lambda_check_from(&report, lambda, tol);
    if !check.is_lambda_convex {
        return Err(GeomError::domain(format!(
            "body is not {lambda}-convex (min kappa {} at node {})",
            check.min_kappa, check.min_node
        )));
    }
    let radius = radius_of_lambda(body.kind(), lambda)?.require_radius()?;
    let pts = body.boundary_points();
    let bound = radius + lit(BLASCHKE_TOL);
    for i in 0..body.len() {
        let c = supporting_center(&report, i, radius);
        if pts.iter().any(|q| distance_raw(&c, q) > bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

//! Small fixed-capacity vectors and the dense solvers needed by the stencils.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Largest model dimension used anywhere: the hyperboloid / sphere model of a
/// three dimensional spaceform lives in R^4.
pub const MAX_DIM: usize = 4;

/// Coordinate vector of length at most [`MAX_DIM`], stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector<T> {
    data: [T; MAX_DIM],
    len: usize,
}

impl<T: Real> Vector<T> {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_DIM, "vector length {len} exceeds {MAX_DIM}");
        Self { data: [T::zero(); MAX_DIM], len }
    }

    pub fn basis(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[k] = T::one();
        v
    }

    pub fn from_slice(s: &[T]) -> Self {
        let mut v = Self::zeros(s.len());
        v.data[..s.len()].copy_from_slice(s);
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data[..self.len]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.as_slice().to_vec()
    }

    /// Euclidean dot product.
    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len, other.len);
        let mut s = T::zero();
        for k in 0..self.len {
            s += self.data[k] * other.data[k];
        }
        s
    }

    /// Minkowski product with signature (-, +, ..., +).
    #[inline]
    pub fn mdot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len, other.len);
        let mut s = -self.data[0] * other.data[0];
        for k in 1..self.len {
            s += self.data[k] * other.data[k];
        }
        s
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// `self + s * other`
    #[inline]
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        let mut out = *self;
        for k in 0..self.len {
            out.data[k] += s * other.data[k];
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl<T: Real> Add for Vector<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.axpy(T::one(), &rhs)
    }
}

impl<T: Real> Sub for Vector<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.axpy(-T::one(), &rhs)
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -T::one()
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Self;
    fn mul(mut self, s: T) -> Self {
        for k in 0..self.len {
            self.data[k] *= s;
        }
        self
    }
}

impl<T: Real> std::fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl<T: Real> Serialize for Vector<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Vector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<T> = Vec::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "vector length {} outside 1..={MAX_DIM}",
                v.len()
            )));
        }
        Ok(Vector::from_slice(&v))
    }
}

/// Solves the dense system `a x = b` (row-major `n x n`) by Gaussian
/// elimination with partial pivoting. Returns `None` for singular systems.
pub fn solve_dense<T: Real>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * n + col].abs() <= T::min_positive_value() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[row * n + k] -= f * v;
            }
            let v = x[col];
            x[row] -= f * v;
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    Some(x)
}

/// Pseudo-inverse of a tall `rows x cols` matrix (row-major) of full column
/// rank, via Householder QR. Returns the `cols x rows` matrix `P` with
/// `P a = I`, or `None` when the matrix is rank deficient.
pub fn pseudo_inverse<T: Real>(a: &[T], rows: usize, cols: usize) -> Option<Vec<T>> {
    assert!(rows >= cols);
    let mut r = a.to_vec();
    // Q^T accumulated as a rows x rows matrix.
    let mut qt = vec![T::zero(); rows * rows];
    for i in 0..rows {
        qt[i * rows + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    for k in 0..cols {
        let mut norm = T::zero();
        for i in k..rows {
            norm += r[i * cols + k] * r[i * cols + k];
        }
        let norm = norm.sqrt();
        if norm <= scale * T::epsilon() * T::lit(16.0) {
            return None;
        }
        let alpha = if r[k * cols + k] > T::zero() { -norm } else { norm };
        let mut v = vec![T::zero(); rows];
        for i in k..rows {
            v[i] = r[i * cols + k];
        }
        v[k] -= alpha;
        let vnorm2: T = v[k..].iter().map(|x| *x * *x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for j in 0..cols {
            let mut s = T::zero();
            for i in k..rows {
                s += v[i] * r[i * cols + j];
            }
            let f = two * s / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= f * v[i];
            }
        }
        for j in 0..rows {
            let mut s = T::zero();
            for i in k..rows {
                s += v[i] * qt[i * rows + j];
            }
            let f = two * s / vnorm2;
            for i in k..rows {
                qt[i * rows + j] -= f * v[i];
            }
        }
    }
    // Back substitution R x = Q^T e_j for the leading `cols` rows.
    let mut p = vec![T::zero(); cols * rows];
    for j in 0..rows {
        for i in (0..cols).rev() {
            let mut s = qt[i * rows + j];
            for k in i + 1..cols {
                s -= r[i * cols + k] * p[k * rows + j];
            }
            p[i * rows + j] = s / r[i * cols + i];
        }
    }
    Some(p)
}

/// Eigenvalues (ascending) of the symmetric 2x2 matrix `[[a, b], [b, c]]`.
pub fn sym2_eigenvalues<T: Real>(a: T, b: T, c: T) -> (T, T) {
    let half = T::lit(0.5);
    let mean = (a + c) * half;
    let diff = (a - c) * half;
    let rad = (diff * diff + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Inverse of a symmetric positive definite `n x n` matrix, `n in {1, 2}`.
pub fn inverse_small<T: Real>(g: &[[T; 2]; 2], n: usize) -> Option<[[T; 2]; 2]> {
    let z = T::zero();
    match n {
        1 => {
            if g[0][0] <= z {
                return None;
            }
            Some([[T::one() / g[0][0], z], [z, z]])
        }
        2 => {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            if det <= z {
                return None;
            }
            Some([
                [g[1][1] / det, -g[0][1] / det],
                [-g[1][0] / det, g[0][0] / det],
            ])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_dense_recovers_solution() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|k| a[i * 3 + k] * x[k]).sum()).collect();
        let got = solve_dense(&a, &b, 3).unwrap();
        for k in 0..3 {
            assert!((got[k] - x[k]).abs() < 1e-13);
        }
        assert!(solve_dense(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn pseudo_inverse_is_left_inverse() {
        let rows = 6;
        let cols = 3;
        let a: Vec<f64> = (0..rows * cols).map(|k| ((k * 7 + 3) % 11) as f64 - 4.0).collect();
        let p = pseudo_inverse(&a, rows, cols).unwrap();
        for i in 0..cols {
            for j in 0..cols {
                let s: f64 = (0..rows).map(|k| p[i * rows + k] * a[k * cols + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12, "{i} {j} {s}");
            }
        }
    }

    #[test]
    fn minkowski_product_signature() {
        let v = Vector::from_slice(&[2.0, 1.0, 1.0]);
        assert_eq!(v.mdot(&v), -2.0);
        assert_eq!(v.dot(&v), 6.0);
    }

    #[test]
    fn sym2_eigen() {
        let (l0, l1) = sym2_eigenvalues(2.0f64, 1.0, 2.0);
        assert!((l0 - 1.0).abs() < 1e-15 && (l1 - 3.0).abs() < 1e-15);
    }
}

//! Dense symmetric linear algebra.
//!
//! Eigendecompositions are delegated to `faer` and always run single-threaded;
//! parallelism lives one level up, across independent trials.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Matrices larger than this use Lanczos for spectral norms.
pub const DENSE_NORM_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Dense square matrix in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn filled(n: usize, v: f64) -> Self {
        Self { n, data: vec![v; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from row-major data. Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "data length must be n*n");
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn as_faer(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.n, self.n)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Sum of all entries, i.e. `<J, M>`, with compensated (Neumaier) summation.
    pub fn sum(&self) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &x in &self.data {
            let t = s + x;
            c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
            s = t;
        }
        s + c
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Frobenius inner product in twice the working precision (Dot2 with
    /// FMA-based exact products and compensated summation).
    pub fn inner_accurate(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            let p = a * b;
            let pe = a.mul_add(b, -p);
            let t = s + p;
            let se = if s.abs() >= p.abs() { (s - t) + p } else { (p - t) + s };
            s = t;
            c += se + pe;
        }
        s + c
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// Max-norm distance `max |A_ij - B_ij|`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Matrix {
        let mut m = self.clone();
        m.scale(alpha);
        m
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Quadratic form `x^T M x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Symmetrises in place as `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set_sym(i, j, v);
            }
        }
    }

    /// Product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        {
            let dst = faer::MatMut::from_row_major_slice_mut(&mut out, n, n);
            matmul(dst, Accum::Replace, self.as_faer(), other.as_faer(), 1.0, Par::Seq);
        }
        Matrix::from_row_major(n, out)
    }

    fn check_symmetric(&self) -> Result<(), LinalgError> {
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let asym = self.asymmetry();
        if asym > 1e-12 * self.max_abs().max(1.0) {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(())
    }
}

/// Eigendecomposition with ascending eigenvalues.
///
/// `vectors` holds eigenvector `k` in column `k`; each is normalised so that its
/// first coordinate of magnitude above `1e-12` is positive.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.n()).map(|i| self.vectors.get(i, k)).collect()
    }
}

pub fn sym_eig(m: &Matrix) -> Result<Eigen, LinalgError> {
    m.check_symmetric()?;
    let n = m.n();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: Matrix::zeros(0) });
    }
    let evd = m
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence)?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|k| s[k]).collect();
    let mut vectors = Matrix::zeros(n);
    for k in 0..n {
        let sign = (0..n)
            .map(|i| u[(i, k)])
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            vectors.set(i, k, sign * u[(i, k)]);
        }
    }
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    m.check_symmetric()?;
    if m.n() == 0 {
        return Ok(vec![]);
    }
    m.as_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence)
}

pub fn lambda_min(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(m)?.first().copied().unwrap_or(0.0))
}

pub fn lambda_max(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

/// Counts of eigenvalues kept and dropped by a PSD projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PsdInfo {
    pub positive: usize,
    pub negative: usize,
}

/// Frobenius-nearest PSD matrix.
pub fn psd_project(m: &Matrix) -> Result<(Matrix, PsdInfo), LinalgError> {
    m.check_symmetric()?;
    psd_project_unchecked(m)
}

/// PSD projection without the symmetry check. The lower triangle of `m` is
/// read; the output is exactly symmetric.
pub(crate) fn psd_project_unchecked(m: &Matrix) -> Result<(Matrix, PsdInfo), LinalgError> {
    let n = m.n();
    if n == 0 {
        return Ok((Matrix::zeros(0), PsdInfo::default()));
    }
    let evd = m
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence)?;
    let s = evd.S();
    let u = evd.U();
    let positive = (0..n).filter(|&k| s[k] > 0.0).count();
    let info = PsdInfo { positive, negative: n - positive };
    // Reconstruct from whichever side of the spectrum is smaller.
    let (cols, sign): (Vec<usize>, f64) = if positive <= n - positive {
        ((0..n).filter(|&k| s[k] > 0.0).collect(), 1.0)
    } else {
        ((0..n).filter(|&k| s[k] <= 0.0).collect(), -1.0)
    };
    let r = cols.len();
    let mut out = if sign > 0.0 { vec![0.0; n * n] } else { m.as_slice().to_vec() };
    if sign < 0.0 {
        // Make the starting point exactly symmetric from the lower triangle.
        for i in 0..n {
            for j in 0..i {
                out[j * n + i] = out[i * n + j];
            }
        }
    }
    if r > 0 {
        let mut w = faer::Mat::<f64>::zeros(n, r);
        for (c, &k) in cols.iter().enumerate() {
            let scale = s[k].abs().sqrt();
            for i in 0..n {
                w[(i, c)] = u[(i, k)] * scale;
            }
        }
        // Positive side: X = W W^T. Negative side: X = T - Σ λ_k v_k v_k^T = T + W W^T.
        let dst = faer::MatMut::from_row_major_slice_mut(&mut out, n, n);
        let accum = if sign > 0.0 { Accum::Replace } else { Accum::Add };
        matmul(dst, accum, w.as_ref(), w.as_ref().transpose(), 1.0, Par::Seq);
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
    }
    Ok((Matrix::from_row_major(n, out), info))
}

/// Spectral norm `max |lambda_i|`. Dense for `n <= DENSE_NORM_LIMIT`, Lanczos above.
pub fn spectral_norm(m: &Matrix) -> Result<f64, LinalgError> {
    m.check_symmetric()?;
    let n = m.n();
    if n == 0 {
        return Ok(0.0);
    }
    if n <= DENSE_NORM_LIMIT {
        let ev = eigenvalues(m)?;
        return Ok(ev[0].abs().max(ev[n - 1].abs()));
    }
    let (lo, hi) = lanczos_extremes(m, 0x5eed)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Extreme Ritz values from Lanczos with full reorthogonalisation.
pub fn lanczos_extremes(m: &Matrix, seed: u64) -> Result<(f64, f64), LinalgError> {
    let n = m.n();
    let steps = n.min(300);
    let mut state = seed | 1;
    let mut q: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut w = m.mul_vec(&q);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        if b < 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        q = w.iter().map(|x| x / b).collect();
    }
    let k = alpha.len();
    let t = Matrix::from_fn(k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let ev = eigenvalues(&t)?;
    Ok((ev[0], ev[k - 1]))
}

/// Smallest eigenvalue of `S` restricted to the orthogonal complement of `xi`.
pub fn lambda2_orth(s: &Matrix, xi: &[f64]) -> Result<f64, LinalgError> {
    let n = s.n();
    if xi.len() != n {
        return Err(LinalgError::Dimension { expected: n, got: xi.len() });
    }
    s.check_symmetric()?;
    if n < 2 {
        return Ok(f64::INFINITY);
    }
    let norm = dot(xi, xi).sqrt();
    if norm == 0.0 {
        return lambda_min(s);
    }
    // Householder reflector H with H xi proportional to e_1; rows/cols 1.. of
    // H S H span the complement of xi.
    let mut v: Vec<f64> = xi.iter().map(|x| x / norm).collect();
    let sgn = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sgn;
    normalize(&mut v);
    let sv = s.mul_vec(&v);
    let vsv = dot(&v, &sv);
    let hsh = Matrix::from_fn(n - 1, |a, b| {
        let (i, j) = (a + 1, b + 1);
        s.get(i, j) - 2.0 * v[i] * sv[j] - 2.0 * sv[i] * v[j] + 4.0 * vsv * v[i] * v[j]
    });
    let mut hsh = hsh;
    hsh.symmetrize();
    lambda_min(&hsh)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
}

//! Dense complex matrices: the handful of primitives the Fock-space code
//! needs (products, adjoints, Kronecker products, the matrix exponential and
//! Hermitian spectra).

use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::scalar::{cr, Real, C};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// `|v><w|`.
    pub fn outer(v: &[C<T>], w: &[C<T>]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * *b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(C::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `A rho A^dag`.
    pub fn sandwich(&self, rho: &Self) -> Self {
        self.matmul(rho).matmul(&self.adjoint())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }

    pub fn scale(&self, k: C<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| *a * k).collect(),
        }
    }

    pub fn add_scaled_identity(&self, k: C<T>) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += k;
        }
        out
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(C::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].norm()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, a| acc.max(a.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Self::from_fn(rows, cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// Matrix exponential by scaling and squaring around a Taylor series.
    pub fn expm(&self) -> Self {
        assert!(self.is_square(), "expm needs a square matrix");
        let n = self.rows;
        let norm = self.norm_one();
        let half = T::lit(0.5);
        let mut squarings = 0u32;
        let mut scale = T::one();
        while norm * scale > half {
            scale *= half;
            squarings += 1;
        }
        let a = self.scale(cr(scale));
        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        let eps = T::epsilon();
        for k in 1..64 {
            term = term.matmul(&a).scale(cr(T::one() / T::lit(k as f64)));
            result = result.add(&term);
            if term.max_abs() <= eps * result.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    ///
    /// The matrix `H = A + iB` is embedded as the real symmetric block
    /// matrix `[[A, -B], [B, A]]`, whose spectrum is that of `H` with every
    /// eigenvalue doubled; cyclic Jacobi rotations diagonalize it.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        assert!(self.is_square(), "eigenvalues need a square matrix");
        let n = self.rows;
        let m = 2 * n;
        let mut s = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                // symmetrize so tiny Hermiticity defects do not stall Jacobi
                let h = (self[(i, j)] + self[(j, i)].conj()) * cr(T::lit(0.5));
                s[i * m + j] = h.re;
                s[(i + n) * m + (j + n)] = h.re;
                s[(i + n) * m + j] = h.im;
                s[i * m + (j + n)] = -h.im;
            }
        }
        jacobi_eigenvalues(&mut s, m);
        let mut ev: Vec<T> = (0..m).map(|i| s[i * m + i]).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        ev.into_iter().step_by(2).collect()
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

fn jacobi_eigenvalues<T: Real>(s: &mut [T], m: usize) {
    let scale = s.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    if scale == T::zero() {
        return;
    }
    let threshold = T::epsilon() * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..m {
            for q in (p + 1)..m {
                off += s[p * m + q] * s[p * m + q];
            }
        }
        if off.sqrt() <= threshold {
            return;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = s[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = s[p * m + p];
                let aqq = s[q * m + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = cs * skp - sn * skq;
                    s[k * m + q] = sn * skp + cs * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = cs * spk - sn * sqk;
                    s[q * m + k] = sn * spk + cs * sqk;
                }
            }
        }
    }
}

/// Trace distance `0.5 * sum |lambda_i(rho - sigma)|` between two Hermitian
/// operators of equal shape.
pub fn trace_distance<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>) -> T {
    let diff = rho.sub(sigma);
    let half = T::lit(0.5);
    diff.hermitian_eigenvalues()
        .into_iter()
        .fold(T::zero(), |acc, l| acc + l.abs())
        * half
}

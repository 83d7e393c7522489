//! Truncated single-mode Fock space: pure and mixed states, ladder
//! operators, displacement and squeezing, moments and fidelities.
//!
//! States live in the basis `|0>, ..., |N-1>`. Every state produced by a
//! library operation is checked for tail mass: the relative population of
//! the top [`tail_window`] indices must stay below the state's truncation
//! tolerance, otherwise a [`Error::Truncation`] is raised. Operators that
//! raise occupancy additionally refuse inputs with population sitting on
//! the last index ([`Error::Headroom`]).

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, cr, sqrt_usize, Real, C};

/// Cutoff used for single-mode analysis unless a caller asks otherwise.
pub const DEFAULT_CUTOFF: usize = 40;
/// Default relative tail mass tolerated at the top of the truncated space.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Norm below which a conditional state is considered to have vanished.
pub const VANISHING_NORM: f64 = 1e-14;
/// Tolerance on `sum |c_n|^2 = 1` (or `tr rho = 1`) for normalized states.
pub const NORM_TOL: f64 = 1e-12;

/// Truncation settings: basis size and tolerated tail mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub dim: usize,
    pub tail_tol: f64,
}

impl Cutoff {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Self::new(DEFAULT_CUTOFF)
    }
}

impl From<usize> for Cutoff {
    fn from(dim: usize) -> Self {
        Self::new(dim)
    }
}

/// Number of top basis indices whose population counts as tail mass:
/// `n >= N - 3` for ordinary cutoffs, only the last index for the tiny
/// auxiliary-mode spaces (N < 12).
pub fn tail_window(dim: usize) -> usize {
    if dim >= 12 {
        3
    } else {
        1
    }
}

/// Common interface of pure and mixed truncated states.
pub trait FockState<T: Real>: Clone + Sized {
    fn dim(&self) -> usize;

    /// `sum |c_n|^2` for vectors, `tr rho` for densities.
    fn norm_sq(&self) -> T;

    /// Photon-number populations (diagonal of the density).
    fn populations(&self) -> Vec<T>;

    fn is_normalized(&self) -> bool;

    fn tail_tol(&self) -> T;

    /// `A|psi>` or `A rho A^dag`; the result is flagged unnormalized.
    fn transform(&self, op: &CMatrix<T>) -> Self;

    /// Divides by the norm (`sqrt(norm_sq)` for vectors, the trace for
    /// densities) and flags the result normalized. Returns that norm.
    fn rescaled(&self) -> (Self, T);

    fn to_density(&self) -> FockDensity<T>;

    /// Expectation value `<X>` (unnormalized states give `tr(X rho)`).
    fn expect(&self, op: &CMatrix<T>) -> C<T>;

    /// Relative tail mass over the top [`tail_window`] indices.
    fn tail_mass(&self) -> T {
        let pops = self.populations();
        let total: T = pops.iter().copied().fold(T::zero(), |a, b| a + b);
        if total <= T::zero() {
            return T::zero();
        }
        let w = tail_window(pops.len()).min(pops.len());
        let tail = pops[pops.len() - w..]
            .iter()
            .copied()
            .fold(T::zero(), |a, b| a + b);
        tail / total
    }

    /// Relative population of the last basis index.
    fn top_population(&self) -> T {
        let pops = self.populations();
        let total: T = pops.iter().copied().fold(T::zero(), |a, b| a + b);
        if total <= T::zero() {
            return T::zero();
        }
        pops[pops.len() - 1] / total
    }
}

/// Pure state as a truncated amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    amps: Vec<C<T>>,
    normalized: bool,
    tail_tol: T,
}

impl<T: Real> FockVector<T> {
    /// Wraps raw amplitudes; the normalized flag reflects the content.
    pub fn from_amps(amps: Vec<C<T>>) -> Self {
        let norm_sq = amps.iter().fold(T::zero(), |a, x| a + x.norm_sqr());
        Self {
            normalized: (norm_sq - T::one()).abs() <= T::tol(NORM_TOL),
            amps,
            tail_tol: T::lit(DEFAULT_TAIL_TOL),
        }
    }

    /// Real amplitudes, zero-padded to `dim`.
    pub fn from_real(coeffs: &[f64], dim: usize) -> Self {
        let mut amps = vec![C::zero(); dim];
        for (a, x) in amps.iter_mut().zip(coeffs) {
            *a = cr(T::lit(*x));
        }
        Self::from_amps(amps)
    }

    /// Number state `|n>`.
    pub fn basis(n: usize, dim: usize) -> Self {
        assert!(n < dim, "basis index {n} outside cutoff {dim}");
        let mut amps = vec![C::zero(); dim];
        amps[n] = C::one();
        Self::from_amps(amps)
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis(0, dim)
    }

    pub fn with_tail_tol(mut self, tol: T) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn amps(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn amp(&self, n: usize) -> C<T> {
        self.amps.get(n).copied().unwrap_or_else(C::zero)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(C::zero(), |acc, (a, b)| acc + a.conj() * *b)
    }

    /// `|<self|other>|^2 / (<self|self><other|other>)`.
    pub fn overlap(&self, other: &Self) -> T {
        let n = self.norm_sq() * other.norm_sq();
        if n <= T::zero() {
            return T::zero();
        }
        self.inner(other).norm_sqr() / n
    }

    pub fn scale(&self, k: C<T>) -> Self {
        Self {
            amps: self.amps.iter().map(|a| *a * k).collect(),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    /// Linear combination `self + k * other`.
    pub fn add_scaled(&self, k: C<T>, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| *a + *b * k)
                .collect(),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    /// Largest amplitude-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    /// Copies into a basis of size `dim`; the discarded amplitudes must be
    /// zero within the tail tolerance.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let mut amps = vec![C::zero(); dim];
        let mut dropped = T::zero();
        for (n, a) in self.amps.iter().enumerate() {
            if n < dim {
                amps[n] = *a;
            } else {
                dropped += a.norm_sqr();
            }
        }
        let total = self.norm_sq();
        if total > T::zero() && dropped / total > self.tail_tol {
            return Err(Error::Truncation {
                tail: (dropped / total).to_f64_lossy(),
                tol: self.tail_tol.to_f64_lossy(),
                dim,
            });
        }
        Ok(Self {
            amps,
            normalized: self.normalized,
            tail_tol: self.tail_tol,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = VectorDoc {
            dim: self.dim(),
            amps: self
                .amps
                .iter()
                .map(|a| (a.re.to_f64_lossy(), a.im.to_f64_lossy()))
                .collect(),
        };
        serde_json::to_string(&doc).expect("state serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VectorDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.amps.len() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                got: doc.amps.len(),
            });
        }
        Ok(Self::from_amps(
            doc.amps
                .into_iter()
                .map(|(re, im)| c(T::lit(re), T::lit(im)))
                .collect(),
        ))
    }
}

impl<T: Real> FockState<T> for FockVector<T> {
    fn dim(&self) -> usize {
        self.amps.len()
    }

    fn norm_sq(&self) -> T {
        self.amps.iter().fold(T::zero(), |a, x| a + x.norm_sqr())
    }

    fn populations(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn tail_tol(&self) -> T {
        self.tail_tol
    }

    fn transform(&self, op: &CMatrix<T>) -> Self {
        Self {
            amps: op.mul_vec(&self.amps),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    fn rescaled(&self) -> (Self, T) {
        let norm = self.norm();
        let inv = cr(T::one() / norm);
        (
            Self {
                amps: self.amps.iter().map(|a| *a * inv).collect(),
                normalized: true,
                tail_tol: self.tail_tol,
            },
            norm,
        )
    }

    fn to_density(&self) -> FockDensity<T> {
        FockDensity {
            mat: CMatrix::outer(&self.amps, &self.amps),
            normalized: self.normalized,
            tail_tol: self.tail_tol,
        }
    }

    fn expect(&self, op: &CMatrix<T>) -> C<T> {
        let v = op.mul_vec(&self.amps);
        self.amps
            .iter()
            .zip(&v)
            .fold(C::zero(), |acc, (a, b)| acc + a.conj() * *b)
    }
}

/// Mixed state as a truncated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity<T> {
    mat: CMatrix<T>,
    normalized: bool,
    tail_tol: T,
}

impl<T: Real> FockDensity<T> {
    pub fn from_matrix(mat: CMatrix<T>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                expected: mat.rows(),
                got: mat.cols(),
            });
        }
        let tr = mat.trace().re;
        Ok(Self {
            normalized: (tr - T::one()).abs() <= T::tol(NORM_TOL),
            mat,
            tail_tol: T::lit(DEFAULT_TAIL_TOL),
        })
    }

    /// Diagonal density with the given populations.
    pub fn diagonal(pops: &[T]) -> Self {
        let diag: Vec<C<T>> = pops.iter().map(|p| cr(*p)).collect();
        Self::from_matrix(CMatrix::from_diag(&diag)).expect("diagonal matrices are square")
    }

    /// `sum_i w_i |psi_i><psi_i|`.
    pub fn mixture(parts: &[(T, &FockVector<T>)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, v)| v.dim())
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let mut mat = CMatrix::zeros(dim, dim);
        for (w, v) in parts {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            mat = mat.add(&CMatrix::outer(v.amps(), v.amps()).scale(cr(*w)));
        }
        Self::from_matrix(mat)
    }

    pub fn with_tail_tol(mut self, tol: T) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn trace(&self) -> T {
        self.mat.trace().re
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.add(&other.mat),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            mat: self.mat.scale(cr(k)),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    pub fn scale_complex(&self, k: C<T>) -> Self {
        Self {
            mat: self.mat.scale(k),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    /// `A rho B^dag` for two different operators (used for cross terms).
    pub fn cross_transform(&self, left: &CMatrix<T>, right: &CMatrix<T>) -> Self {
        Self {
            mat: left.matmul(&self.mat).matmul(&right.adjoint()),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    /// Checks Hermiticity, unit trace (if flagged normalized) and
    /// eigenvalues bounded below by `-1e-10`.
    pub fn validate(&self) -> Result<()> {
        let defect = self.mat.hermiticity_defect();
        if defect > T::tol(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "density is not Hermitian (defect {:.3e})",
                defect.to_f64_lossy()
            )));
        }
        if self.normalized && (self.trace() - T::one()).abs() > T::tol(NORM_TOL) {
            return Err(Error::NotNormalized {
                norm_sq: self.trace().to_f64_lossy(),
            });
        }
        let min = self.mat.hermitian_eigenvalues()[0];
        if min < -T::tol(1e-10) {
            return Err(Error::InvalidParameter(format!(
                "density has negative eigenvalue {:.3e}",
                min.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Copies into a basis of size `dim` (padding or truncating).
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let n = self.dim();
        if dim < n {
            let pops = self.populations();
            let dropped = pops[dim..].iter().copied().fold(T::zero(), |a, b| a + b);
            let total = self.trace();
            if total > T::zero() && dropped / total > self.tail_tol {
                return Err(Error::Truncation {
                    tail: (dropped / total).to_f64_lossy(),
                    tol: self.tail_tol.to_f64_lossy(),
                    dim,
                });
            }
        }
        let mat = CMatrix::from_fn(dim, dim, |i, j| {
            if i < n && j < n {
                self.mat[(i, j)]
            } else {
                C::zero()
            }
        });
        Ok(Self {
            mat,
            normalized: self.normalized,
            tail_tol: self.tail_tol,
        })
    }

    pub fn to_json(&self) -> String {
        let n = self.dim();
        let doc = DensityDoc {
            dim: n,
            mat: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let z = self.mat[(i, j)];
                            (z.re.to_f64_lossy(), z.im.to_f64_lossy())
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("state serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DensityDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.mat.len() != doc.dim || doc.mat.iter().any(|row| row.len() != doc.dim) {
            return Err(Error::Parse(format!("matrix is not {0}x{0}", doc.dim)));
        }
        let mat = CMatrix::from_fn(doc.dim, doc.dim, |i, j| {
            let (re, im) = doc.mat[i][j];
            c(T::lit(re), T::lit(im))
        });
        Self::from_matrix(mat)
    }
}

impl<T: Real> FockState<T> for FockDensity<T> {
    fn dim(&self) -> usize {
        self.mat.rows()
    }

    fn norm_sq(&self) -> T {
        self.trace()
    }

    fn populations(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn tail_tol(&self) -> T {
        self.tail_tol
    }

    fn transform(&self, op: &CMatrix<T>) -> Self {
        Self {
            mat: op.sandwich(&self.mat),
            normalized: false,
            tail_tol: self.tail_tol,
        }
    }

    fn rescaled(&self) -> (Self, T) {
        let tr = self.trace();
        (
            Self {
                mat: self.mat.scale(cr(T::one() / tr)),
                normalized: true,
                tail_tol: self.tail_tol,
            },
            tr,
        )
    }

    fn to_density(&self) -> FockDensity<T> {
        self.clone()
    }

    fn expect(&self, op: &CMatrix<T>) -> C<T> {
        let n = self.dim();
        let mut acc = C::zero();
        for i in 0..n {
            for j in 0..n {
                acc += op[(i, j)] * self.mat[(j, i)];
            }
        }
        acc
    }
}

#[derive(Serialize, Deserialize)]
struct VectorDoc {
    dim: usize,
    amps: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct DensityDoc {
    dim: usize,
    mat: Vec<Vec<(f64, f64)>>,
}

/// Thermal state description by its mean photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSpec<T> {
    nbar: T,
}

impl<T: Real> ThermalSpec<T> {
    pub fn new(nbar: T) -> Result<Self> {
        if !nbar.is_finite() || nbar < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "mean photon number must be finite and >= 0, got {nbar}"
            )));
        }
        Ok(Self { nbar })
    }

    pub fn nbar(&self) -> T {
        self.nbar
    }
}

/// Squeezing parameter `xi = s e^{i phi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeSpec<T> {
    s: T,
    phi: T,
}

impl<T: Real> SqueezeSpec<T> {
    pub fn new(s: T, phi: T) -> Result<Self> {
        if !s.is_finite() || s < T::zero() || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeeze magnitude must be finite and >= 0 (s = {s}, phi = {phi})"
            )));
        }
        let two_pi = T::TAU();
        let mut phi = phi % two_pi;
        if phi < T::zero() {
            phi += two_pi;
        }
        Ok(Self { s, phi })
    }

    pub fn magnitude(&self) -> T {
        self.s
    }

    pub fn phase(&self) -> T {
        self.phi
    }

    pub fn xi(&self) -> C<T> {
        C::from_polar(self.s, self.phi)
    }
}

/// Photon-number moments of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub mean_a: C<T>,
    pub mean_a2: C<T>,
    pub mean_n: T,
    pub mean_n2: T,
}

/// Truncated annihilation operator.
pub fn annihilation<T: Real>(dim: usize) -> CMatrix<T> {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = cr(sqrt_usize(n));
    }
    m
}

/// Truncated creation operator.
pub fn creation<T: Real>(dim: usize) -> CMatrix<T> {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n, n - 1)] = cr(sqrt_usize(n));
    }
    m
}

pub fn number_op<T: Real>(dim: usize) -> CMatrix<T> {
    let diag: Vec<C<T>> = (0..dim).map(|n| cr(T::lit(n as f64))).collect();
    CMatrix::from_diag(&diag)
}

/// `D(beta) = exp(beta a^dag - beta^* a)` on the truncated space.
pub fn displacement_op<T: Real>(beta: C<T>, dim: usize) -> CMatrix<T> {
    let gen = creation::<T>(dim)
        .scale(beta)
        .sub(&annihilation::<T>(dim).scale(beta.conj()));
    gen.expm()
}

/// `S(xi) = exp((xi a^dag^2 - xi^* a^2) / 2)`, the convention for which
/// `S^dag a S = a cosh s + a^dag e^{i phi} sinh s`.
pub fn squeeze_op<T: Real>(spec: &SqueezeSpec<T>, dim: usize) -> CMatrix<T> {
    let a = annihilation::<T>(dim);
    let ad = creation::<T>(dim);
    let xi = spec.xi();
    let half = cr(T::lit(0.5));
    ad.matmul(&ad)
        .scale(xi * half)
        .sub(&a.matmul(&a).scale(xi.conj() * half))
        .expm()
}

/// Matrix elements of `D(alpha) q^n D(alpha)^dag` in the Fock basis,
/// computed from the untruncated operator by recurrence.
pub fn displaced_number_power<T: Real>(alpha: C<T>, q: T, dim: usize) -> CMatrix<T> {
    let lam = T::one() - q;
    let u = alpha * cr(lam);
    let v = alpha.conj() * cr(lam);
    let mut o = CMatrix::zeros(dim, dim);
    if dim == 0 {
        return o;
    }
    o[(0, 0)] = cr((-lam * alpha.norm_sqr()).exp());
    for n in 1..dim {
        o[(0, n)] = v * o[(0, n - 1)] / cr(sqrt_usize::<T>(n));
    }
    for m in 0..dim - 1 {
        let inv = T::one() / sqrt_usize::<T>(m + 1);
        for n in 0..dim {
            let mut acc = u * o[(m, n)];
            if n > 0 {
                acc += o[(m, n - 1)] * cr(q * sqrt_usize::<T>(n));
            }
            o[(m + 1, n)] = acc * cr(inv);
        }
    }
    o
}

/// Errors if the relative tail mass exceeds the state's tolerance.
pub fn check_tail<T: Real, S: FockState<T>>(state: &S) -> Result<()> {
    let tail = state.tail_mass();
    if tail > state.tail_tol() {
        return Err(Error::Truncation {
            tail: tail.to_f64_lossy(),
            tol: state.tail_tol().to_f64_lossy(),
            dim: state.dim(),
        });
    }
    Ok(())
}

/// Errors if an occupancy-raising operator would push population past the
/// last basis index.
pub fn check_headroom<T: Real, S: FockState<T>>(state: &S) -> Result<()> {
    let top = state.top_population();
    if top > state.tail_tol() {
        return Err(Error::Headroom {
            population: top.to_f64_lossy(),
            tol: state.tail_tol().to_f64_lossy(),
        });
    }
    Ok(())
}

/// Coherent state `|alpha0>` with `c_n = e^{-|alpha0|^2/2} alpha0^n / sqrt(n!)`.
///
/// The amplitudes are renormalized over the retained basis; the discarded
/// mass is bounded by the tail tolerance.
pub fn make_coherent<T: Real>(alpha0: C<T>, cutoff: impl Into<Cutoff>) -> Result<FockVector<T>> {
    let cutoff = cutoff.into();
    let dim = cutoff.dim;
    if dim == 0 {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    let mut amps = Vec::with_capacity(dim);
    let mut cur = cr(T::lit(-0.5) * alpha0.norm_sqr()).exp();
    amps.push(cur);
    for n in 1..dim {
        cur = cur * alpha0 / cr(sqrt_usize::<T>(n));
        amps.push(cur);
    }
    let kept = amps.iter().fold(T::zero(), |a, x| a + x.norm_sqr());
    let tol = T::tol(cutoff.tail_tol);
    let missing = (T::one() - kept).max(T::zero());
    if missing > tol {
        return Err(Error::Truncation {
            tail: missing.to_f64_lossy(),
            tol: tol.to_f64_lossy(),
            dim,
        });
    }
    let (v, _) = FockVector::from_amps(amps).with_tail_tol(tol).rescaled();
    check_tail(&v)?;
    Ok(v)
}

/// Thermal state with `p_n = nbar^n / (1 + nbar)^{n+1}`, renormalized over
/// the retained basis.
pub fn make_thermal<T: Real>(
    spec: &ThermalSpec<T>,
    cutoff: impl Into<Cutoff>,
) -> Result<FockDensity<T>> {
    let cutoff = cutoff.into();
    let dim = cutoff.dim;
    if dim == 0 {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    let nbar = spec.nbar();
    let ratio = nbar / (T::one() + nbar);
    let tol = T::tol(cutoff.tail_tol);
    let missing = ratio.powi(dim as i32);
    if missing > tol {
        return Err(Error::Truncation {
            tail: missing.to_f64_lossy(),
            tol: tol.to_f64_lossy(),
            dim,
        });
    }
    let mut pops = Vec::with_capacity(dim);
    let mut p = T::one() / (T::one() + nbar);
    for _ in 0..dim {
        pops.push(p);
        p *= ratio;
    }
    let total = pops.iter().copied().fold(T::zero(), |a, b| a + b);
    for p in &mut pops {
        *p /= total;
    }
    let rho = FockDensity::diagonal(&pops).with_tail_tol(tol);
    check_tail(&rho)?;
    Ok(rho)
}

pub fn apply_annihilate<T: Real, S: FockState<T>>(state: &S) -> Result<S> {
    let out = state.transform(&annihilation(state.dim()));
    check_tail(&out)?;
    Ok(out)
}

pub fn apply_create<T: Real, S: FockState<T>>(state: &S) -> Result<S> {
    check_headroom(state)?;
    let out = state.transform(&creation(state.dim()));
    check_tail(&out)?;
    Ok(out)
}

pub fn apply_displacement<T: Real, S: FockState<T>>(state: &S, beta: C<T>) -> Result<S> {
    check_headroom(state)?;
    let out = state.transform(&displacement_op(beta, state.dim()));
    check_tail(&out)?;
    Ok(out)
}

pub fn apply_squeeze<T: Real, S: FockState<T>>(state: &S, spec: &SqueezeSpec<T>) -> Result<S> {
    check_headroom(state)?;
    let out = state.transform(&squeeze_op(spec, state.dim()));
    check_tail(&out)?;
    Ok(out)
}

/// Divides a state by its norm. Fails for vanishing (conditional) states.
pub fn normalize<T: Real, S: FockState<T>>(state: &S) -> Result<(S, T)> {
    let norm_sq = state.norm_sq();
    let norm = norm_sq.max(T::zero()).sqrt();
    if norm < T::lit(VANISHING_NORM) || !norm.is_finite() {
        return Err(Error::VanishingNorm {
            norm: norm.to_f64_lossy(),
            threshold: VANISHING_NORM,
        });
    }
    Ok(state.rescaled())
}

fn require_normalized<T: Real, S: FockState<T>>(state: &S) -> Result<()> {
    let n = state.norm_sq();
    if (n - T::one()).abs() > T::tol(1e-9) {
        return Err(Error::NotNormalized {
            norm_sq: n.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Exact Fock-basis moments `<a>`, `<a^2>`, `<n>`, `<n^2>`.
pub fn moments<T: Real, S: FockState<T>>(state: &S) -> Result<Moments<T>> {
    require_normalized(state)?;
    let dim = state.dim();
    let a = annihilation::<T>(dim);
    let n = number_op::<T>(dim);
    Ok(Moments {
        mean_a: state.expect(&a),
        mean_a2: state.expect(&a.matmul(&a)),
        mean_n: state.expect(&n).re,
        mean_n2: state.expect(&n.matmul(&n)).re,
    })
}

/// Pure-target fidelity `<target|rho|target>`.
pub fn fidelity<T: Real>(rho: &FockDensity<T>, target: &FockVector<T>) -> Result<T> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: target.dim(),
        });
    }
    let v = rho.matrix().mul_vec(target.amps());
    let f = target
        .amps()
        .iter()
        .zip(&v)
        .fold(C::zero(), |acc, (a, b)| acc + a.conj() * *b);
    Ok(f.re)
}

/// Trace distance between two densities of equal cutoff.
pub fn trace_distance<T: Real>(rho: &FockDensity<T>, sigma: &FockDensity<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    Ok(crate::linalg::trace_distance(rho.matrix(), sigma.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn vacuum_coherent_state() {
        let v = make_coherent::<f64>(C::zero(), 20).unwrap();
        assert_eq!(v.amp(0), C::one());
        assert!(v.amps()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_mean_and_ratio() {
        let v = make_coherent(c(0.5f64, 0.0), 20).unwrap();
        let m = moments(&v).unwrap();
        assert!(close(m.mean_n, 0.25, 1e-10));
        assert!(close((v.amp(1) / v.amp(0)).re, 0.5, 1e-14));
        assert!(v.is_normalized());
    }

    #[test]
    fn coherent_rejects_small_cutoff() {
        let err = make_coherent(c(3.0f64, 0.0), 10).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn thermal_populations() {
        let rho = make_thermal(&ThermalSpec::new(0.0f64).unwrap(), 10).unwrap();
        assert!(close(rho.matrix()[(0, 0)].re, 1.0, 0.0));
        let rho = make_thermal(&ThermalSpec::new(0.1f64).unwrap(), 40).unwrap();
        assert!(close(rho.matrix()[(0, 0)].re, 1.0 / 1.1, 1e-12));
        let rho = make_thermal(&ThermalSpec::new(0.5f64).unwrap(), 40).unwrap();
        assert!(close(moments(&rho).unwrap().mean_n, 0.5, 1e-8));
        rho.validate().unwrap();
    }

    #[test]
    fn thermal_second_moment() {
        let rho = make_thermal(&ThermalSpec::new(0.1f64).unwrap(), 40).unwrap();
        // brute-force sum of n^2 p_n for the geometric distribution
        let oracle: f64 = (0..200)
            .map(|n| (n * n) as f64 * 0.1f64.powi(n) / 1.1f64.powi(n + 1))
            .sum();
        let m = moments(&rho).unwrap();
        assert!(close(m.mean_n2, oracle, 1e-10));
        assert!(close(m.mean_n2, 0.12, 1e-10));
    }

    #[test]
    fn thermal_rejects_small_cutoff() {
        let spec = ThermalSpec::new(1.0f64).unwrap();
        assert!(matches!(
            make_thermal(&spec, 10),
            Err(Error::Truncation { .. })
        ));
        assert!(ThermalSpec::new(-0.1f64).is_err());
    }

    #[test]
    fn ladder_actions_on_number_states() {
        let one = FockVector::<f64>::basis(1, 10);
        let out = apply_annihilate(&one).unwrap();
        assert!(out.max_abs_diff(&FockVector::basis(0, 10)) < 1e-15);
        assert!(!out.is_normalized());
        let out = apply_create(&FockVector::<f64>::vacuum(10)).unwrap();
        assert!(out.max_abs_diff(&FockVector::basis(1, 10)) < 1e-15);
    }

    #[test]
    fn create_refuses_state_at_cutoff() {
        let top = FockVector::<f64>::basis(9, 10);
        assert!(matches!(apply_create(&top), Err(Error::Headroom { .. })));
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let beta = c(0.3f64, 0.0);
        let d = apply_displacement(&FockVector::vacuum(40), beta).unwrap();
        let coh = make_coherent(beta, 40).unwrap();
        assert!(d.overlap(&coh) >= 1.0 - 1e-10);
        assert!(close(d.norm(), 1.0, 1e-10));
    }

    #[test]
    fn squeeze_identity_and_mean() {
        let v = FockVector::<f64>::from_real(&[0.6, 0.0, 0.8], 40);
        let out = apply_squeeze(&v, &SqueezeSpec::new(0.0, 0.0).unwrap()).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-15);
        let sq = apply_squeeze(
            &FockVector::vacuum(40),
            &SqueezeSpec::new(0.2, 0.0).unwrap(),
        )
        .unwrap();
        let m = moments(&normalize(&sq).unwrap().0).unwrap();
        assert!(close(m.mean_n, 0.2f64.sinh().powi(2), 1e-6));
    }

    #[test]
    fn squeeze_phase_is_wrapped() {
        let s = SqueezeSpec::new(0.1f64, -0.5).unwrap();
        assert!(close(s.phase(), std::f64::consts::TAU - 0.5, 1e-15));
        assert!(SqueezeSpec::new(-0.1f64, 0.0).is_err());
    }

    #[test]
    fn number_state_moments() {
        let m = moments(&FockVector::<f64>::basis(1, 10)).unwrap();
        assert_eq!(m.mean_a, C::zero());
        assert!(close(m.mean_n, 1.0, 1e-15));
        let unnorm = FockVector::<f64>::from_real(&[1.0, 1.0], 4);
        assert!(matches!(moments(&unnorm), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn fidelity_examples() {
        let one = FockVector::<f64>::basis(1, 10);
        assert!(close(
            fidelity(&one.to_density(), &one).unwrap(),
            1.0,
            1e-15
        ));
        let vac = FockVector::<f64>::vacuum(10);
        assert!(close(
            fidelity(&vac.to_density(), &one).unwrap(),
            0.0,
            1e-15
        ));
        let th = make_thermal(&ThermalSpec::new(0.1f64).unwrap(), 40).unwrap();
        assert!(close(
            fidelity(&th, &FockVector::vacuum(40)).unwrap(),
            1.0 / 1.1,
            1e-12
        ));
        assert!(matches!(
            fidelity(&th, &vac),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalize_rejects_vanishing_state() {
        let zero = FockVector::<f64>::from_real(&[], 5);
        assert!(matches!(normalize(&zero), Err(Error::VanishingNorm { .. })));
        let (v, n) = normalize(&FockVector::<f64>::from_real(&[3.0, 4.0], 5)).unwrap();
        assert!(close(n, 5.0, 1e-15) && v.is_normalized());
    }

    #[test]
    fn json_round_trip() {
        let v = make_coherent(c(0.4f64, -0.2), 12).unwrap();
        let back = FockVector::<f64>::from_json(&v.to_json()).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-15);
        let rho = v.to_density();
        let back = FockDensity::<f64>::from_json(&rho.to_json()).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        assert!(FockVector::<f64>::from_json("{\"dim\":3,\"amps\":[[1,0]]}").is_err());
    }

    #[test]
    fn single_precision_coherent_state() {
        let v = make_coherent(c(0.5f32, 0.0), 20).unwrap();
        let m = moments(&v).unwrap();
        assert!((m.mean_n - 0.25).abs() < 1e-5);
    }
}

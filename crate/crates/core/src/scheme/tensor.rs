//! Amplitude tensors over up to three truncated modes and the action of
//! ladder-operator polynomials and their exponentials on them.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fock::{tail_window, DEFAULT_TAIL_TOL};
use crate::scalar::{cr, sqrt_usize, Real, C};

/// One ladder operator: mode index and whether it is the creation operator.
pub type Ladder = (usize, bool);

/// `coefficient * op_1 op_2 ...` (rightmost acts first).
#[derive(Debug, Clone, PartialEq)]
pub struct Term<T> {
    pub coef: C<T>,
    pub ops: Vec<Ladder>,
}

impl<T: Real> Term<T> {
    pub fn new(coef: C<T>, ops: &[Ladder]) -> Self {
        Self {
            coef,
            ops: ops.to_vec(),
        }
    }
}

/// Pure state of up to three modes, row-major over `|n_0, n_1, n_2>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTensor<T> {
    dims: Vec<usize>,
    data: Vec<C<T>>,
    tail_tol: T,
}

impl<T: Real> ModeTensor<T> {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "mode tensor needs one to three nonzero cutoffs, got {dims:?}"
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![C::zero(); dims.iter().product()],
            tail_tol: T::lit(DEFAULT_TAIL_TOL),
        })
    }

    /// `|psi> (x) |0> (x) ...` with `psi` on the first mode.
    pub fn with_first_mode(amps: &[C<T>], dims: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(dims)?;
        if amps.len() > dims[0] {
            return Err(Error::DimensionMismatch {
                expected: dims[0],
                got: amps.len(),
            });
        }
        let stride = out.stride(0);
        for (n, a) in amps.iter().enumerate() {
            out.data[n * stride] = *a;
        }
        Ok(out)
    }

    /// Product of single-mode amplitude vectors.
    pub fn product(factors: &[&[C<T>]]) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        let mut out = Self::zeros(&dims)?;
        for (flat, v) in out.data.iter_mut().enumerate() {
            let mut rest = flat;
            let mut amp = C::new(T::one(), T::zero());
            for m in (0..dims.len()).rev() {
                amp *= factors[m][rest % dims[m]];
                rest /= dims[m];
            }
            *v = amp;
        }
        Ok(out)
    }

    pub fn with_tail_tol(mut self, tol: T) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn tail_tol(&self) -> T {
        self.tail_tol
    }

    fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    pub fn get(&self, idx: &[usize]) -> C<T> {
        let flat = idx
            .iter()
            .enumerate()
            .fold(0, |acc, (m, i)| acc * self.dims[m] + i);
        self.data[flat]
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |a, x| a + x.norm_sqr())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    pub fn scale(&self, k: C<T>) -> Self {
        Self {
            data: self.data.iter().map(|a| *a * k).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
            ..self.clone()
        }
    }

    /// Photon-number distribution of one mode.
    pub fn marginal(&self, mode: usize) -> Vec<T> {
        let d = self.dims[mode];
        let stride = self.stride(mode);
        let mut pops = vec![T::zero(); d];
        for (flat, a) in self.data.iter().enumerate() {
            pops[(flat / stride) % d] += a.norm_sqr();
        }
        pops
    }

    /// Errors if any mode's relative tail mass exceeds the tolerance.
    pub fn check_tail(&self) -> Result<()> {
        check_tail_mixture(&[(T::one(), self)])
    }

    /// Errors if a mode has population on its last index.
    pub fn check_headroom(&self) -> Result<()> {
        let total = self.norm_sq();
        if total <= T::zero() {
            return Ok(());
        }
        for mode in 0..self.dims.len() {
            let pops = self.marginal(mode);
            let top = pops[pops.len() - 1] / total;
            if top > self.tail_tol {
                return Err(Error::Headroom {
                    population: top.to_f64_lossy(),
                    tol: self.tail_tol.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Truncated `a_mode` or `a_mode^dag`.
    pub fn ladder(&self, mode: usize, dagger: bool) -> Self {
        let d = self.dims[mode];
        let stride = self.stride(mode);
        let mut out = vec![C::zero(); self.data.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let n = (flat / stride) % d;
            if dagger {
                if n > 0 {
                    *slot = self.data[flat - stride] * cr(sqrt_usize::<T>(n));
                }
            } else if n + 1 < d {
                *slot = self.data[flat + stride] * cr(sqrt_usize::<T>(n + 1));
            }
        }
        Self {
            data: out,
            ..self.clone()
        }
    }

    /// `sum_k coef_k ops_k |self>`.
    pub fn apply_terms(&self, terms: &[Term<T>]) -> Self {
        let mut acc = Self {
            data: vec![C::zero(); self.data.len()],
            ..self.clone()
        };
        for term in terms {
            let mut v = self.clone();
            for (mode, dagger) in term.ops.iter().rev() {
                v = v.ladder(*mode, *dagger);
            }
            for (a, b) in acc.data.iter_mut().zip(&v.data) {
                *a += *b * term.coef;
            }
        }
        acc
    }

    /// `exp(G)|self>` for `G = sum_k terms_k`, by Taylor series over enough
    /// sub-steps that each has operator norm below one.
    pub fn apply_exp(&self, terms: &[Term<T>]) -> Self {
        let bound = terms.iter().fold(T::zero(), |acc, term| {
            let op_norm = term.ops.iter().fold(T::one(), |p, (m, _)| {
                p * sqrt_usize::<T>(self.dims[*m].saturating_sub(1))
            });
            acc + term.coef.norm() * op_norm
        });
        let steps = bound.ceil().to_usize().unwrap_or(1).max(1);
        let scaled: Vec<Term<T>> = terms
            .iter()
            .map(|t| Term {
                coef: t.coef / cr(T::lit(steps as f64)),
                ops: t.ops.clone(),
            })
            .collect();
        let mut v = self.clone();
        for _ in 0..steps {
            let scale = v.norm_sq().sqrt();
            let mut term = v.clone();
            let mut sum = v.clone();
            for k in 1..60 {
                term = term
                    .apply_terms(&scaled)
                    .scale(cr(T::one() / T::lit(k as f64)));
                sum = sum.add(&term);
                if term.norm_sq().sqrt() <= T::epsilon() * T::lit(1e-2) * scale {
                    break;
                }
            }
            v = sum;
        }
        v
    }
}

/// Tail check on the per-mode marginals of `sum_k w_k |u_k><u_k|`.
pub(crate) fn check_tail_mixture<T: Real>(parts: &[(T, &ModeTensor<T>)]) -> Result<()> {
    let Some((_, first)) = parts.first() else {
        return Ok(());
    };
    let tol = first.tail_tol;
    for mode in 0..first.dims.len() {
        let mut pops = vec![T::zero(); first.dims[mode]];
        for (w, u) in parts {
            for (p, q) in pops.iter_mut().zip(u.marginal(mode)) {
                *p += *w * q;
            }
        }
        let total = pops.iter().fold(T::zero(), |a, b| a + *b);
        if total <= T::zero() {
            continue;
        }
        let win = tail_window(pops.len()).min(pops.len());
        let tail = pops[pops.len() - win..]
            .iter()
            .fold(T::zero(), |a, b| a + *b)
            / total;
        if tail > tol {
            return Err(Error::Truncation {
                tail: tail.to_f64_lossy(),
                tol: tol.to_f64_lossy(),
                dim: first.dims[mode],
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn ladder_on_product_state() {
        let one = [C::zero(), C::new(1.0f64, 0.0), C::zero()];
        let vac = [C::new(1.0f64, 0.0), C::zero(), C::zero()];
        let t = ModeTensor::product(&[&one, &vac]).unwrap();
        let down = t.ladder(0, false);
        assert_eq!(down.get(&[0, 0]), C::new(1.0, 0.0));
        let up = t.ladder(1, true);
        assert_eq!(up.get(&[1, 1]), C::new(1.0, 0.0));
    }

    #[test]
    fn exp_of_rotation_generator() {
        // exp(theta (a^dag b - b^dag a)) |1,0> = cos|1,0> + sin|0,1>
        let theta = 0.7f64;
        let t = ModeTensor::with_first_mode(&[C::zero(), c(1.0, 0.0)], &[4, 4]).unwrap();
        let g = [
            Term::new(c(-theta, 0.0), &[(0, true), (1, false)]),
            Term::new(c(theta, 0.0), &[(1, true), (0, false)]),
        ];
        let out = t.apply_exp(&g);
        assert!((out.get(&[1, 0]).re - theta.cos()).abs() < 1e-14);
        assert!((out.get(&[0, 1]).re - theta.sin()).abs() < 1e-14);
        assert!((out.norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tail_and_headroom_checks() {
        let t =
            ModeTensor::with_first_mode(&[C::zero(), C::zero(), c(1.0f64, 0.0)], &[3, 2]).unwrap();
        assert!(matches!(t.check_headroom(), Err(Error::Headroom { .. })));
        assert!(matches!(t.check_tail(), Err(Error::Truncation { .. })));
        assert!(ModeTensor::<f64>::zeros(&[2, 2, 2, 2]).is_err());
    }
}

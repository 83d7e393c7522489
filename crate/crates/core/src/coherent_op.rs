//! The superposed operation `t a + r a^dag`, its displaced conjugate
//! `O(beta, t, r) = D^dag(beta) (t a + r a^dag) D(beta) = t a + r a^dag + beta'`
//! with `beta' = t beta + r beta^*`, sequences of such factors, and the
//! four-part decomposition of the output density.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation, check_headroom, check_tail, creation, displacement_op, normalize, FockDensity,
    FockState, VANISHING_NORM,
};
use crate::linalg::CMatrix;
use crate::scalar::{cr, Real, C};

/// Weights of `t a + r a^dag`.
///
/// Normal construction enforces `|t|^2 + |r|^2 = 1`; [`CoherentOpParams::raw`]
/// skips the check and records that it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentOpParams<T> {
    t: C<T>,
    r: C<T>,
    raw: bool,
}

impl<T: Real> CoherentOpParams<T> {
    pub fn new(t: C<T>, r: C<T>) -> Result<Self> {
        let n = t.norm_sqr() + r.norm_sqr();
        if (n - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "|t|^2 + |r|^2 = {n}, expected 1"
            )));
        }
        Ok(Self { t, r, raw: false })
    }

    /// Rescales arbitrary nonzero weights onto the unit circle.
    pub fn normalized(t: C<T>, r: C<T>) -> Result<Self> {
        let n = (t.norm_sqr() + r.norm_sqr()).sqrt();
        if n <= T::zero() || !n.is_finite() {
            return Err(Error::InvalidParameter("t and r are both zero".into()));
        }
        let k = cr(T::one() / n);
        Ok(Self {
            t: t * k,
            r: r * k,
            raw: false,
        })
    }

    /// Real weights as in all the figures: `t = sqrt(1 - r^2)`, `r` in `[0, 1]`.
    pub fn from_real_r(r: T) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&r) {
            return Err(Error::InvalidParameter(format!("r = {r} outside [0, 1]")));
        }
        Ok(Self {
            t: cr((T::one() - r * r).max(T::zero()).sqrt()),
            r: cr(r),
            raw: false,
        })
    }

    /// Unnormalized weights, e.g. the heralded `t ~ R1 t2`, `r ~ s r2`.
    pub fn raw(t: C<T>, r: C<T>) -> Self {
        Self { t, r, raw: true }
    }

    pub fn t(&self) -> C<T> {
        self.t
    }

    pub fn r(&self) -> C<T> {
        self.r
    }

    pub fn is_raw(&self) -> bool {
        self.raw
    }

    /// Phase of `r = |r| e^{i phi_r}`.
    pub fn phase_r(&self) -> T {
        self.r.arg()
    }

    /// `t a + r a^dag` on a truncated space.
    pub fn operator(&self, dim: usize) -> CMatrix<T> {
        annihilation::<T>(dim)
            .scale(self.t)
            .add(&creation::<T>(dim).scale(self.r))
    }

    /// `M = |t alpha0 + r alpha0^*|^2 + |r|^2`, the squared norm of
    /// `(t a + r a^dag)|alpha0>`.
    pub fn coherent_output_norm_sq(&self, alpha0: C<T>) -> T {
        (self.t * alpha0 + self.r * alpha0.conj()).norm_sqr() + self.r.norm_sqr()
    }

    /// Coherent amplitude `beta` with `<beta|(t a + r a^dag)|alpha0> = 0`,
    /// i.e. `beta^* = -(t / r) alpha0`. `None` for pure subtraction.
    pub fn orthogonal_coherent_witness(&self, alpha0: C<T>) -> Option<C<T>> {
        if self.r.norm() <= T::zero() {
            return None;
        }
        Some((-(self.t / self.r) * alpha0).conj())
    }
}

/// `O(beta, t, r)`: displacement, the coherent operation, inverse displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacedOpParams<T> {
    pub base: CoherentOpParams<T>,
    pub beta: C<T>,
}

impl<T: Real> DisplacedOpParams<T> {
    pub fn new(base: CoherentOpParams<T>, beta: C<T>) -> Self {
        Self { base, beta }
    }

    /// `beta' = t beta + r beta^*`, always derived from the current fields.
    pub fn beta_prime(&self) -> C<T> {
        self.base.t * self.beta + self.base.r * self.beta.conj()
    }

    /// `t a + r a^dag + beta'` on a truncated space.
    pub fn operator(&self, dim: usize) -> CMatrix<T> {
        self.base
            .operator(dim)
            .add_scaled_identity(self.beta_prime())
    }
}

/// Product of displaced operations. Factors are stored in operator-product
/// order, so the rightmost (last) factor acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct OpSequence<T> {
    factors: Vec<DisplacedOpParams<T>>,
}

impl<T: Real> OpSequence<T> {
    pub fn new(factors: Vec<DisplacedOpParams<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter(
                "operation sequence is empty".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[DisplacedOpParams<T>] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// `(t a + r a^dag)|psi>` or `(t a + r a^dag) rho (t^* a^dag + r^* a)`,
/// unnormalized.
pub fn apply_coherent_op<T: Real, S: FockState<T>>(
    params: &CoherentOpParams<T>,
    state: &S,
) -> Result<S> {
    check_headroom(state)?;
    let out = state.transform(&params.operator(state.dim()));
    check_tail(&out)?;
    Ok(out)
}

/// `O(beta, t, r)` through the ladder-plus-scalar form `t a + r a^dag + beta'`.
pub fn apply_displaced_op<T: Real, S: FockState<T>>(
    params: &DisplacedOpParams<T>,
    state: &S,
) -> Result<S> {
    check_headroom(state)?;
    let out = state.transform(&params.operator(state.dim()));
    check_tail(&out)?;
    Ok(out)
}

/// `O(beta, t, r)` through its definition `D^dag(beta) (t a + r a^dag) D(beta)`.
pub fn apply_displaced_op_conjugated<T: Real, S: FockState<T>>(
    params: &DisplacedOpParams<T>,
    state: &S,
) -> Result<S> {
    let dim = state.dim();
    check_headroom(state)?;
    let d = displacement_op(params.beta, dim);
    let displaced = state.transform(&d);
    check_tail(&displaced)?;
    let acted = apply_coherent_op(&params.base, &displaced)?;
    let out = acted.transform(&d.adjoint());
    check_tail(&out)?;
    Ok(out)
}

/// Applies the whole product to `state` (last factor first) and returns the
/// unnormalized result with its norm.
pub fn apply_sequence<T: Real, S: FockState<T>>(seq: &OpSequence<T>, state: &S) -> Result<(S, T)> {
    let mut cur = state.clone();
    for factor in seq.factors().iter().rev() {
        cur = apply_displaced_op(factor, &cur)?;
    }
    let norm = cur.norm_sq().max(T::zero()).sqrt();
    if norm < T::lit(VANISHING_NORM) {
        return Err(Error::VanishingNorm {
            norm: norm.to_f64_lossy(),
            threshold: VANISHING_NORM,
        });
    }
    Ok((cur, norm))
}

/// Finds `O(beta, t, r)` with `O|1> = t|0> + beta'|1> + sqrt(2) r|2>`
/// proportional to `c0|0> + c1|1> + c2|2>`.
///
/// `t : r` follows from `c0 : c2 / sqrt(2)`; `beta` solves the real 2x2
/// system `t beta + r beta^* = beta'`, which is singular for `|t| = |r|`.
/// In that case a solution exists only if `beta'` lies in the range of the
/// map and the minimum-norm one is returned.
pub fn solve_single_step<T: Real>(c0: C<T>, c1: C<T>, c2: C<T>) -> Result<DisplacedOpParams<T>> {
    let sqrt2 = T::SQRT_2();
    let t_raw = c0;
    let r_raw = c2 / cr(sqrt2);
    let scale = (t_raw.norm_sqr() + r_raw.norm_sqr()).sqrt();
    if scale <= T::zero() {
        return Err(Error::InvalidParameter(
            "target has no |0> or |2> component; a single factor cannot reach it".into(),
        ));
    }
    let k = T::one() / scale;
    let base = CoherentOpParams::new(t_raw * cr(k), r_raw * cr(k))?;
    let bp = c1 * cr(k);
    let (t, r) = (base.t, base.r);
    // [[tr + rr, ri - ti], [ti + ri, tr - rr]] [x, y] = [Re b', Im b']
    let m11 = t.re + r.re;
    let m12 = r.im - t.im;
    let m21 = t.im + r.im;
    let m22 = t.re - r.re;
    let det = m11 * m22 - m12 * m21;
    let beta = if det.abs() > T::tol(1e-12) {
        let x = (bp.re * m22 - m12 * bp.im) / det;
        let y = (m11 * bp.im - m21 * bp.re) / det;
        C::new(x, y)
    } else {
        // rank-one map: project onto the first nonzero row direction
        let (u1, u2) = if m11.abs() + m12.abs() >= m21.abs() + m22.abs() {
            (m11, m12)
        } else {
            (m21, m22)
        };
        let nn = u1 * u1 + u2 * u2;
        if nn <= T::zero() {
            return Err(Error::InvalidParameter(
                "degenerate operation weights".into(),
            ));
        }
        let (rhs, other_rhs, (v1, v2)) = if m11.abs() + m12.abs() >= m21.abs() + m22.abs() {
            (bp.re, bp.im, (m21, m22))
        } else {
            (bp.im, bp.re, (m11, m12))
        };
        let x = u1 * rhs / nn;
        let y = u2 * rhs / nn;
        if (v1 * x + v2 * y - other_rhs).abs() > T::tol(1e-9) {
            return Err(Error::InvalidParameter(
                "target unreachable: |t| = |r| and beta' has the wrong phase".into(),
            ));
        }
        C::new(x, y)
    };
    Ok(DisplacedOpParams::new(base, beta))
}

/// Parts of `rho_out ~ |r|^2 rho_{+-} + |t|^2 rho_{-+} + r^* t rho_{--} + r t^* rho_{++}`.
#[derive(Debug, Clone)]
pub struct OutputDecomposition<T> {
    /// `a^dag rho0 a` (photon addition).
    pub rho_pm: FockDensity<T>,
    /// `a rho0 a^dag` (photon subtraction).
    pub rho_mp: FockDensity<T>,
    /// `r^* t a rho0 a + r t^* a^dag rho0 a^dag`, already weighted.
    pub rho_pp_plus_mm: FockDensity<T>,
    /// Weighted sum of all parts (unnormalized).
    pub total: FockDensity<T>,
}

pub fn decompose_output<T: Real>(
    rho0: &FockDensity<T>,
    params: &CoherentOpParams<T>,
) -> Result<OutputDecomposition<T>> {
    check_headroom(rho0)?;
    let dim = rho0.dim();
    let a = annihilation::<T>(dim);
    let ad = creation::<T>(dim);
    let (t, r) = (params.t, params.r);
    let rho_pm = rho0.transform(&ad);
    let rho_mp = rho0.transform(&a);
    // a rho a = a rho (a^dag)^dag, a^dag rho a^dag = a^dag rho (a)^dag
    let mm = rho0.cross_transform(&a, &ad);
    let pp = rho0.cross_transform(&ad, &a);
    let cross = mm
        .scale_complex(r.conj() * t)
        .add(&pp.scale_complex(r * t.conj()));
    let total = rho_pm
        .scale(r.norm_sqr())
        .add(&rho_mp.scale(t.norm_sqr()))
        .add(&cross);
    check_tail(&total)?;
    Ok(OutputDecomposition {
        rho_pm,
        rho_mp,
        rho_pp_plus_mm: cross,
        total,
    })
}

/// Normalized `(t a + r a^dag)|psi>`.
pub fn conditioned_state<T: Real, S: FockState<T>>(
    params: &CoherentOpParams<T>,
    state: &S,
) -> Result<S> {
    Ok(normalize(&apply_coherent_op(params, state)?)?.0)
}

/// Classical mixing check helper: `t a + r a^dag` with `t = 1, r = 0`.
pub fn pure_subtraction<T: Real>() -> CoherentOpParams<T> {
    CoherentOpParams {
        t: C::one(),
        r: C::zero(),
        raw: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_coherent, FockVector};
    use crate::scalar::c;

    fn inv_sqrt2() -> f64 {
        std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn params_enforce_unit_norm() {
        assert!(CoherentOpParams::new(c(1.0f64, 0.0), c(1.0, 0.0)).is_err());
        let p = CoherentOpParams::normalized(c(1.0f64, 0.0), c(1.0, 0.0)).unwrap();
        assert!((p.t().re - inv_sqrt2()).abs() < 1e-15);
        assert!(CoherentOpParams::raw(c(2.0f64, 0.0), C::zero()).is_raw());
        assert!(CoherentOpParams::from_real_r(1.5f64).is_err());
    }

    #[test]
    fn vacuum_goes_to_single_photon() {
        let p = CoherentOpParams::from_real_r(0.6f64).unwrap();
        let out = apply_coherent_op(&p, &FockVector::vacuum(10)).unwrap();
        assert!(out.max_abs_diff(&FockVector::basis(1, 10).scale(c(0.6, 0.0))) < 1e-15);
    }

    #[test]
    fn subtraction_leaves_coherent_state_unchanged() {
        let alpha = c(0.5f64, 0.2);
        let coh = make_coherent(alpha, 30).unwrap();
        let out = apply_coherent_op(&pure_subtraction(), &coh).unwrap();
        // a|alpha> = alpha|alpha> up to the truncated top amplitude
        assert!(out.max_abs_diff(&coh.scale(alpha)) < 1e-12);
    }

    #[test]
    fn addition_on_one_photon() {
        let p = CoherentOpParams::from_real_r(1.0f64).unwrap();
        let out = apply_coherent_op(&p, &FockVector::basis(1, 10)).unwrap();
        assert!((out.amp(2).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn displaced_op_on_one_photon() {
        let base = CoherentOpParams::normalized(c(0.6f64, 0.1), c(0.3, -0.2)).unwrap();
        let params = DisplacedOpParams::new(base, c(0.4, 0.3));
        let out = apply_displaced_op(&params, &FockVector::basis(1, 12)).unwrap();
        assert!((out.amp(0) - base.t()).norm() < 1e-15);
        assert!((out.amp(1) - params.beta_prime()).norm() < 1e-15);
        assert!((out.amp(2) - base.r() * c(2f64.sqrt(), 0.0)).norm() < 1e-14);
        let conj = apply_displaced_op_conjugated(&params, &FockVector::basis(1, 40)).unwrap();
        let direct = apply_displaced_op(&params, &FockVector::basis(1, 40)).unwrap();
        assert!(conj.max_abs_diff(&direct) < 1e-10);
    }

    #[test]
    fn displaced_op_with_zero_beta_is_coherent_op() {
        let base = CoherentOpParams::from_real_r(0.3f64).unwrap();
        let psi = make_coherent(c(0.3f64, 0.1), 30).unwrap();
        let a = apply_displaced_op(&DisplacedOpParams::new(base, C::zero()), &psi).unwrap();
        let b = apply_coherent_op(&base, &psi).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn shifted_subtraction_on_vacuum() {
        // t = 1, r = 0, beta = 1: (a + 1)|0> = |0>
        let params = DisplacedOpParams::new(pure_subtraction::<f64>(), c(1.0, 0.0));
        assert_eq!(params.beta_prime(), c(1.0, 0.0));
        let out = apply_displaced_op(&params, &FockVector::vacuum(8)).unwrap();
        assert!(out.max_abs_diff(&FockVector::vacuum(8)) < 1e-15);
    }

    #[test]
    fn sequence_of_single_factor_matches_direct() {
        let params =
            DisplacedOpParams::new(CoherentOpParams::from_real_r(0.4f64).unwrap(), c(0.2, 0.0));
        let seq = OpSequence::new(vec![params]).unwrap();
        let one = FockVector::basis(1, 10);
        let (out, norm) = apply_sequence(&seq, &one).unwrap();
        let direct = apply_displaced_op(&params, &one).unwrap();
        assert!(out.max_abs_diff(&direct) < 1e-15);
        assert!((norm - direct.norm()).abs() < 1e-15);
        assert!(OpSequence::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn annihilating_twice_kills_one_photon() {
        let ident = DisplacedOpParams::new(pure_subtraction::<f64>(), C::zero());
        let seq = OpSequence::new(vec![ident, ident]).unwrap();
        let err = apply_sequence(&seq, &FockVector::basis(1, 10)).unwrap_err();
        assert!(matches!(err, Error::VanishingNorm { .. }));
    }

    #[test]
    fn sequence_applies_rightmost_first() {
        // a^dag (then) a on |0>: a a^dag |0> = |0>, but a^dag a |0> = 0
        let add = DisplacedOpParams::new(CoherentOpParams::from_real_r(1.0f64).unwrap(), C::zero());
        let sub = DisplacedOpParams::new(pure_subtraction::<f64>(), C::zero());
        let seq = OpSequence::new(vec![sub, add]).unwrap();
        let (out, _) = apply_sequence(&seq, &FockVector::vacuum(6)).unwrap();
        assert!(out.max_abs_diff(&FockVector::vacuum(6)) < 1e-15);
        let seq = OpSequence::new(vec![add, sub]).unwrap();
        assert!(apply_sequence(&seq, &FockVector::vacuum(6)).is_err());
    }

    #[test]
    fn single_step_solver_equal_superposition() {
        let k = c(1.0 / 3f64.sqrt(), 0.0);
        let params = solve_single_step(k, k, k).unwrap();
        let (out, _) =
            normalize(&apply_displaced_op(&params, &FockVector::basis(1, 10)).unwrap()).unwrap();
        let target = FockVector::from_amps(
            [k, k, k]
                .into_iter()
                .chain(std::iter::repeat_n(C::zero(), 7))
                .collect(),
        );
        assert!(out.overlap(&target) >= 1.0 - 1e-9);
        // independent check of the linear match: t : beta' : sqrt2 r = 1 : 1 : 1
        let t = params.base.t();
        assert!((params.beta_prime() - t).norm() < 1e-12);
        assert!((params.base.r() * c(2f64.sqrt(), 0.0) - t).norm() < 1e-12);
    }

    #[test]
    fn single_step_solver_complex_target() {
        let (c0, c1, c2) = (c(0.3f64, 0.1), c(-0.5, 0.4), c(0.2, -0.6));
        let params = solve_single_step(c0, c1, c2).unwrap();
        let out = apply_displaced_op(&params, &FockVector::basis(1, 8)).unwrap();
        let mut amps = vec![C::zero(); 8];
        amps[..3].copy_from_slice(&[c0, c1, c2]);
        assert!(out.overlap(&FockVector::from_amps(amps)) > 1.0 - 1e-12);
    }

    #[test]
    fn single_step_solver_equal_weights_real_target() {
        // |t| = |r|: solvable only for beta' with matching phase
        let s2 = 2f64.sqrt();
        let params = solve_single_step(c(1.0f64, 0.0), c(0.7, 0.0), c(s2, 0.0)).unwrap();
        let out = apply_displaced_op(&params, &FockVector::basis(1, 8)).unwrap();
        assert!(out.overlap(&FockVector::from_real(&[1.0, 0.7, s2], 8)) > 1.0 - 1e-12);
        assert!(solve_single_step(c(1.0f64, 0.0), c(0.0, 0.7), c(s2, 0.0)).is_err());
    }

    #[test]
    fn decomposition_of_vacuum() {
        let p = CoherentOpParams::from_real_r(0.5f64).unwrap();
        let d = decompose_output(&FockVector::vacuum(10).to_density(), &p).unwrap();
        assert!(d.rho_mp.matrix().max_abs() < 1e-15);
        assert!(d.rho_pp_plus_mm.matrix().max_abs() < 1e-15);
        let one = FockVector::<f64>::basis(1, 10).to_density();
        assert!(d.rho_pm.matrix().max_abs_diff(one.matrix()) < 1e-15);
    }

    #[test]
    fn decomposition_recomposes() {
        let p = CoherentOpParams::from_real_r(inv_sqrt2()).unwrap();
        let rho0 = make_coherent(c(0.5f64, 0.0), 40).unwrap().to_density();
        let d = decompose_output(&rho0, &p).unwrap();
        let direct = apply_coherent_op(&p, &rho0).unwrap();
        let td = crate::fock::trace_distance(&d.total, &direct).unwrap();
        assert!(td < 1e-10);
    }

    #[test]
    fn subtraction_part_of_coherent_input_is_classical() {
        let alpha = c(0.5f64, 0.0);
        let rho0 = make_coherent(alpha, 40).unwrap().to_density();
        let d =
            decompose_output(&rho0, &CoherentOpParams::from_real_r(inv_sqrt2()).unwrap()).unwrap();
        let expect = rho0.scale(alpha.norm_sqr());
        assert!(d.rho_mp.matrix().max_abs_diff(expect.matrix()) < 1e-12);
    }

    #[test]
    fn norm_of_output_is_m_factor() {
        let p = CoherentOpParams::normalized(c(0.8f64, 0.1), c(0.3, 0.4)).unwrap();
        let alpha = c(0.7f64, -0.3);
        let out = apply_coherent_op(&p, &make_coherent(alpha, 40).unwrap()).unwrap();
        assert!((out.norm_sq() - p.coherent_output_norm_sq(alpha)).abs() < 1e-10);
    }

    #[test]
    fn witness_is_orthogonal() {
        let p = CoherentOpParams::normalized(c(0.8f64, 0.1), c(0.3, 0.4)).unwrap();
        let alpha = c(0.5f64, 0.2);
        let beta = p.orthogonal_coherent_witness(alpha).unwrap();
        let out = apply_coherent_op(&p, &make_coherent(alpha, 40).unwrap()).unwrap();
        let probe = make_coherent(beta, 40).unwrap();
        assert!(probe.inner(&out).norm() < 1e-10);
        assert!(pure_subtraction::<f64>()
            .orthogonal_coherent_witness(alpha)
            .is_none());
    }
}

//! Exact and first-order propagation through the heralding interferometer,
//! detector POVMs and the reduction to mode `a`.

use num_traits::Zero;

use super::tensor::{check_tail_mixture, ModeTensor, Term};
use super::{check_pair, Branch, DeviceModel, HeraldResult, SchemeDims, SchemeParams};
use crate::error::{Error, Result};
use crate::fock::{
    check_headroom, displaced_number_power, FockDensity, FockState, FockVector, VANISHING_NORM,
};
use crate::linalg::CMatrix;
use crate::scalar::{c, cr, Real, C};

/// Exact unitary or its first-order expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Expansion {
    #[default]
    Exact,
    FirstOrder,
}

fn ndpa_terms<T: Real>(i: usize, j: usize, s: T) -> Vec<Term<T>> {
    vec![
        Term::new(cr(-s), &[(i, true), (j, true)]),
        Term::new(cr(s), &[(i, false), (j, false)]),
    ]
}

/// `K = log V` for `V = [[t, r], [-r^*, t^*]]` in SU(2).
fn su2_log<T: Real>(t: C<T>, r: C<T>) -> [[C<T>; 2]; 2] {
    let v = [[t, r], [-r.conj(), t.conj()]];
    let cos = t.re.max(-T::one()).min(T::one());
    let theta = cos.acos();
    let sin = theta.sin();
    if sin < T::epsilon() {
        if cos > T::zero() {
            return [
                [v[0][0] - cr(T::one()), v[0][1]],
                [v[1][0], v[1][1] - cr(T::one())],
            ];
        }
        return [
            [c(T::zero(), T::PI()), C::zero()],
            [C::zero(), c(T::zero(), -T::PI())],
        ];
    }
    let k = cr(theta / sin);
    [
        [(v[0][0] - cr(cos)) * k, v[0][1] * k],
        [v[1][0] * k, (v[1][1] - cr(cos)) * k],
    ]
}

fn beamsplitter_terms<T: Real>(i: usize, j: usize, t: C<T>, r: C<T>) -> Vec<Term<T>> {
    let k = su2_log(t, r);
    let modes = [i, j];
    let mut terms = Vec::with_capacity(4);
    for (p, row) in k.iter().enumerate() {
        for (q, coef) in row.iter().enumerate() {
            if !coef.is_zero() {
                terms.push(Term::new(*coef, &[(modes[p], true), (modes[q], false)]));
            }
        }
    }
    terms
}

fn check_modes<T: Real>(state: &ModeTensor<T>, (i, j): (usize, usize)) -> Result<()> {
    let n = state.dims().len();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidParameter(format!(
            "mode pair ({i}, {j}) invalid for a {n}-mode state"
        )));
    }
    Ok(())
}

/// Parametric amplifier `exp(-s x_i^dag x_j^dag + s x_i x_j)` on a mode pair.
pub fn ndpa_step<T: Real>(
    state: &ModeTensor<T>,
    modes: (usize, usize),
    s: T,
    expansion: Expansion,
) -> Result<ModeTensor<T>> {
    check_modes(state, modes)?;
    state.check_headroom()?;
    let out = match expansion {
        Expansion::Exact => state.apply_exp(&ndpa_terms(modes.0, modes.1, s)),
        Expansion::FirstOrder => {
            let g = state.apply_terms(&[Term::new(cr(-s), &[(modes.0, true), (modes.1, true)])]);
            state.add(&g)
        }
    };
    out.check_tail()?;
    Ok(out)
}

/// Beam splitter with Heisenberg action `x_i -> t x_i + r x_j`,
/// `x_j -> -r^* x_i + t^* x_j`.
pub fn beamsplitter<T: Real>(
    state: &ModeTensor<T>,
    modes: (usize, usize),
    t: C<T>,
    r: C<T>,
) -> Result<ModeTensor<T>> {
    check_modes(state, modes)?;
    check_pair(t, r, "beam splitter")?;
    state.check_headroom()?;
    let out = state.apply_exp(&beamsplitter_terms(modes.0, modes.1, t, r));
    out.check_tail()?;
    Ok(out)
}

/// `Pi_0 = sum (1 - eta)^n |n><n|`.
pub fn povm_no_click<T: Real>(eta: T, dim: usize) -> CMatrix<T> {
    let q = T::one() - eta;
    let diag: Vec<C<T>> = (0..dim).map(|n| cr(q.powi(n as i32))).collect();
    CMatrix::from_diag(&diag)
}

/// `Pi_1 = I - Pi_0`.
pub fn povm_click<T: Real>(eta: T, dim: usize) -> CMatrix<T> {
    CMatrix::identity(dim).sub(&povm_no_click(eta, dim))
}

/// `max |Pi_0 + Pi_1 - I|`.
pub fn povm_completeness_defect<T: Real>(eta: T, dim: usize) -> T {
    povm_no_click(eta, dim)
        .add(&povm_click(eta, dim))
        .max_abs_diff(&CMatrix::identity(dim))
}

/// `D(gamma)^dag Pi_0 D(gamma)`.
fn displaced_no_click<T: Real>(eta: T, gamma: C<T>, dim: usize) -> CMatrix<T> {
    displaced_number_power(-gamma, T::one() - eta, dim)
}

/// POVM elements on modes `b` and `c` for a branch, optionally in a frame
/// displaced by `(gamma_b, gamma_c)`.
pub(crate) fn branch_povms<T: Real>(
    eta: T,
    branch: Branch,
    dims: SchemeDims,
    shift: Option<(C<T>, C<T>)>,
) -> (CMatrix<T>, CMatrix<T>) {
    let (gb, gc) = shift.unwrap_or((C::zero(), C::zero()));
    let p0b = displaced_no_click(eta, gb, dims.nb);
    let p0c = displaced_no_click(eta, gc, dims.nc);
    match branch {
        Branch::Pd1 => (CMatrix::identity(dims.nb).sub(&p0b), p0c),
        Branch::Pd2 => (p0b, CMatrix::identity(dims.nc).sub(&p0c)),
    }
}

/// `(W_b (x) W_c)` applied to the `b, c` factors of a three-mode tensor.
fn apply_bc<T: Real>(u: &ModeTensor<T>, wb: &CMatrix<T>, wc: &CMatrix<T>) -> Vec<C<T>> {
    let [na, nb, nc] = [u.dims()[0], u.dims()[1], u.dims()[2]];
    let data = u.data();
    let mut tmp = vec![C::zero(); data.len()];
    for i in 0..na {
        for m in 0..nb {
            for k in 0..nc {
                let mut acc = C::zero();
                for j in 0..nb {
                    acc += wb[(m, j)] * data[(i * nb + j) * nc + k];
                }
                tmp[(i * nb + m) * nc + k] = acc;
            }
        }
    }
    let mut out = vec![C::zero(); data.len()];
    for i in 0..na {
        for m in 0..nb {
            for n in 0..nc {
                let mut acc = C::zero();
                for k in 0..nc {
                    acc += wc[(n, k)] * tmp[(i * nb + m) * nc + k];
                }
                out[(i * nb + m) * nc + n] = acc;
            }
        }
    }
    out
}

fn contract<T: Real>(w: &[C<T>], v: &ModeTensor<T>, na: usize, out: &mut CMatrix<T>, k: C<T>) {
    let inner = v.data().len() / na;
    let vd = v.data();
    for i in 0..na {
        let wi = &w[i * inner..(i + 1) * inner];
        for l in 0..na {
            let vl = &vd[l * inner..(l + 1) * inner];
            let acc = wi
                .iter()
                .zip(vl)
                .fold(C::<T>::zero(), |acc, (a, b)| acc + *a * b.conj());
            out[(i, l)] += acc * k;
        }
    }
}

/// `tr_{bc}[(I (x) W_b (x) W_c) |u><v|]` as an operator on mode `a`.
pub fn reduce_to_first_mode<T: Real>(
    u: &ModeTensor<T>,
    v: &ModeTensor<T>,
    wb: &CMatrix<T>,
    wc: &CMatrix<T>,
) -> CMatrix<T> {
    let na = u.dims()[0];
    let mut out = CMatrix::zeros(na, na);
    contract(&apply_bc(u, wb, wc), v, na, &mut out, cr(T::one()));
    out
}

/// The three-mode interferometer for fixed parameters and cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferometer<T> {
    pub params: SchemeParams<T>,
    pub dims: SchemeDims,
}

impl<T: Real> Interferometer<T> {
    pub fn new(params: SchemeParams<T>, dims: SchemeDims) -> Self {
        Self { params, dims }
    }

    fn unitary_terms(&self) -> [Vec<Term<T>>; 3] {
        let p = &self.params;
        [
            ndpa_terms(0, 2, p.s),
            beamsplitter_terms(0, 1, p.t1, p.r1),
            beamsplitter_terms(1, 2, p.t2, p.r2),
        ]
    }

    /// `U |psi, 0, 0>` without truncation checks.
    pub(crate) fn propagate_raw(&self, amps: &[C<T>]) -> Result<ModeTensor<T>> {
        let mut v = ModeTensor::with_first_mode(amps, &self.dims.as_array())?;
        for terms in self.unitary_terms() {
            v = v.apply_exp(&terms);
        }
        Ok(v)
    }

    /// `U |psi, 0, 0>` with headroom and tail checks.
    pub fn propagate(&self, psi: &FockVector<T>) -> Result<ModeTensor<T>> {
        let input = ModeTensor::with_first_mode(psi.amps(), &self.dims.as_array())?;
        input.check_headroom()?;
        let out = self.propagate_raw(psi.amps())?;
        out.check_tail()?;
        Ok(out)
    }

    /// Bogoliubov matrix `M` with `U^dag (x, x^dag) U = M (x, x^dag)` for
    /// `x = (a, b, c)`.
    pub fn heisenberg_matrix(&self) -> CMatrix<T> {
        let p = &self.params;
        let block = |a: &CMatrix<T>, b: &CMatrix<T>| {
            CMatrix::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
                (true, true) => a[(i, j)],
                (true, false) => b[(i, j - 3)],
                (false, true) => b[(i - 3, j)].conj(),
                (false, false) => a[(i - 3, j - 3)].conj(),
            })
        };
        let zero = CMatrix::zeros(3, 3);
        let mut a1 = CMatrix::identity(3);
        a1[(0, 0)] = cr(p.s.cosh());
        a1[(2, 2)] = cr(p.s.cosh());
        let mut b1 = CMatrix::zeros(3, 3);
        b1[(0, 2)] = cr(-p.s.sinh());
        b1[(2, 0)] = cr(-p.s.sinh());
        let mut a2 = CMatrix::identity(3);
        a2[(0, 0)] = p.t1;
        a2[(0, 1)] = p.r1;
        a2[(1, 0)] = -p.r1.conj();
        a2[(1, 1)] = p.t1.conj();
        let mut a3 = CMatrix::identity(3);
        a3[(1, 1)] = p.t2;
        a3[(1, 2)] = p.r2;
        a3[(2, 1)] = -p.r2.conj();
        a3[(2, 2)] = p.t2.conj();
        block(&a3, &zero)
            .matmul(&block(&a2, &zero))
            .matmul(&block(&a1, &b1))
    }

    /// Amplitudes `gamma` with `U D_a(beta) U^dag = D(gamma_a) D(gamma_b) D(gamma_c)`.
    pub fn heisenberg_displacement(&self, beta: C<T>) -> [C<T>; 3] {
        let m = self.heisenberg_matrix();
        let v = [
            beta,
            C::zero(),
            C::zero(),
            beta.conj(),
            C::zero(),
            C::zero(),
        ];
        let g = m.mul_vec(&v);
        [g[0], g[1], g[2]]
    }

    /// Unnormalized mode-`a` operator heralded from `rho` (cut to `Na`).
    pub fn herald_operator(
        &self,
        rho: &FockDensity<T>,
        wb: &CMatrix<T>,
        wc: &CMatrix<T>,
    ) -> Result<CMatrix<T>> {
        let na = self.dims.na;
        let rho = if rho.dim() == na {
            rho.clone()
        } else {
            rho.resized(na)?
        };
        check_headroom(&rho)?;
        let pops = rho.populations();
        let max = pops.iter().fold(T::zero(), |a, b| a.max(*b));
        let support: Vec<usize> = (0..na).filter(|m| pops[*m] > max * T::lit(1e-32)).collect();
        let mut props = Vec::with_capacity(support.len());
        for &m in &support {
            let mut amps = vec![C::zero(); m + 1];
            amps[m] = cr(T::one());
            props.push(self.propagate_raw(&amps)?);
        }
        let weighted: Vec<(T, &ModeTensor<T>)> = support
            .iter()
            .zip(&props)
            .map(|(m, u)| (pops[*m], u))
            .collect();
        check_tail_mixture(&weighted)?;
        let mut out = CMatrix::zeros(na, na);
        for (x, m) in support.iter().enumerate() {
            let w = apply_bc(&props[x], wb, wc);
            for (y, n) in support.iter().enumerate() {
                let k = rho.matrix()[(*m, *n)];
                if !k.is_zero() {
                    contract(&w, &props[y], na, &mut out, k);
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn finish<T: Real>(mat: CMatrix<T>, branch: Branch) -> Result<HeraldResult<T>> {
    let tr = mat.trace().re;
    if !(tr >= T::lit(VANISHING_NORM)) {
        return Err(Error::VanishingNorm {
            norm: tr.to_f64_lossy(),
            threshold: VANISHING_NORM,
        });
    }
    let (rho_out, success_prob) = FockDensity::from_matrix(mat)?.rescaled();
    Ok(HeraldResult {
        rho_out,
        success_prob,
        branch,
    })
}

/// Runs the exact pipeline on `input |0>_b |0>_c` and conditions on the
/// branch's click pattern. Only the detector efficiency of `device` enters.
pub fn herald_coherent_op_with<T: Real, S: FockState<T>>(
    input: &S,
    scheme: &SchemeParams<T>,
    device: &DeviceModel<T>,
    branch: Branch,
    dims: SchemeDims,
) -> Result<HeraldResult<T>> {
    let ifm = Interferometer::new(*scheme, dims);
    let (wb, wc) = branch_povms(device.eta, branch, dims, None);
    finish(ifm.herald_operator(&input.to_density(), &wb, &wc)?, branch)
}

/// [`herald_coherent_op_with`] at the default cutoffs.
pub fn herald_coherent_op<T: Real, S: FockState<T>>(
    input: &S,
    scheme: &SchemeParams<T>,
    device: &DeviceModel<T>,
    branch: Branch,
) -> Result<HeraldResult<T>> {
    herald_coherent_op_with(input, scheme, device, branch, SchemeDims::default())
}

/// Second-order expansion of the interferometer,
/// `[1 - R1 a B^dag - s a^dag C^dag + s R1 a a^dag B^dag C^dag] |psi, 0, 0>`
/// with `B^dag = t2 b^dag - r2^* c^dag` and `C^dag = r2 b^dag + t2^* c^dag`,
/// followed by the same detection and reduction as the exact route.
pub fn herald_perturbative<T: Real>(
    psi: &FockVector<T>,
    scheme: &SchemeParams<T>,
    device: &DeviceModel<T>,
    branch: Branch,
    dims: SchemeDims,
) -> Result<HeraldResult<T>> {
    let p = scheme;
    let big_r = p.r1_ratio();
    let s = cr(p.s);
    let (a, ad, bd, cd) = ((0, false), (0, true), (1, true), (2, true));
    let bdag = [(p.t2, bd), (-p.r2.conj(), cd)];
    let cdag = [(p.r2, bd), (p.t2.conj(), cd)];
    let mut terms = vec![Term::new(cr(T::one()), &[])];
    for (k, op) in bdag {
        terms.push(Term::new(-big_r * k, &[a, op]));
    }
    for (k, op) in cdag {
        terms.push(Term::new(-s * k, &[ad, op]));
    }
    for (k1, op1) in bdag {
        for (k2, op2) in cdag {
            terms.push(Term::new(s * big_r * k1 * k2, &[a, ad, op1, op2]));
        }
    }
    let input = ModeTensor::with_first_mode(psi.amps(), &dims.as_array())?;
    input.check_headroom()?;
    let state = input.apply_terms(&terms);
    state.check_tail()?;
    let (wb, wc) = branch_povms(device.eta, branch, dims, None);
    finish(reduce_to_first_mode(&state, &state, &wb, &wc), branch)
}

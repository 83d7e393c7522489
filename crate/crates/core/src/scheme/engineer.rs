//! Displaced-frame engineering of `C0|0> + C1|1> + C2|2>` targets and the
//! average fidelity over the target sphere.

use rayon::prelude::*;

use super::interferometer::{branch_povms, finish, reduce_to_first_mode, Interferometer};
use super::tensor::ModeTensor;
use super::{Branch, DeviceModel, HeraldResult, SchemeDims, SchemeParams, TargetState};
use crate::error::{Error, Result};
use crate::fock::{check_tail, displacement_op, fidelity, FockDensity, FockState, FockVector};
use crate::linalg::CMatrix;
use crate::quadrature::GaussLegendre;
use crate::scalar::{cr, Real, C};

/// `|C2 + sqrt(2) C0|` below which the target cannot be parametrized.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Second beam splitter and displacement chosen for a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parametrization<T> {
    pub t2: T,
    pub r2: T,
    pub beta: T,
}

/// Beam splitter and displacement that steer the heralded state to
/// `target`, written in the target coefficients so `theta = pi/2` stays
/// finite: `t2 = sqrt2 s C0 sgn(C2 R1) / n`, `r2 = |R1 C2| / n`,
/// `beta = sqrt2 C1 / (C2 + sqrt2 C0)` with `n = sqrt(R1^2 C2^2 + 2 s^2 C0^2)`.
pub fn parametrize<T: Real>(
    target: &TargetState<T>,
    s: T,
    r1_ratio: T,
) -> Result<Parametrization<T>> {
    if !(s > T::zero()) || !s.is_finite() || r1_ratio == T::zero() || !r1_ratio.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "state engineering needs s > 0 and R1 != 0, got s={s}, R1={r1_ratio}"
        )));
    }
    let sqrt2 = T::SQRT_2();
    let [c0, c1, c2] = target.coefficients();
    let den = c2 + sqrt2 * c0;
    if den.abs() < T::tol(SINGULAR_TOL) {
        return Err(Error::SingularParametrization {
            theta: target.theta().to_f64_lossy(),
            phi: target.phi().to_f64_lossy(),
        });
    }
    let sign = if c2 * r1_ratio < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    let norm = (r1_ratio * r1_ratio * c2 * c2 + T::lit(2.0) * s * s * c0 * c0).sqrt();
    Ok(Parametrization {
        t2: sqrt2 * s * c0 * sign / norm,
        r2: (r1_ratio * c2).abs() / norm,
        beta: sqrt2 * c1 / den,
    })
}

/// Perturbative mode-`a` output
/// `eta_s eta (|Phi><Phi| + A|phi><phi|) + (1 - eta_s) eta (|Psi1><Psi1| + A|Psi2><Psi2|)`,
/// unnormalized.
pub fn rho_con_analytic<T: Real>(
    beta: C<T>,
    s: T,
    r1_ratio: C<T>,
    t2: C<T>,
    r2: C<T>,
    device: &DeviceModel<T>,
    dim: usize,
) -> Result<FockDensity<T>> {
    if dim < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: dim,
        });
    }
    let sc = cr(s);
    let sqrt2 = cr(T::SQRT_2());
    let one = cr(T::one());
    let b2 = cr(beta.norm_sqr());
    let mid = r1_ratio * t2 * beta + sc * r2 * beta.conj();
    let vec = |coefs: &[C<T>]| {
        let mut v = vec![C::new(T::zero(), T::zero()); dim];
        v[..coefs.len()].copy_from_slice(coefs);
        v
    };
    let big_phi = vec(&[r1_ratio * t2, mid, sqrt2 * sc * r2]);
    let small_phi = vec(&[beta.conj(), cr(T::lit(2.0)) + b2, sqrt2 * beta]);
    let psi1 = vec(&[mid, sc * r2]);
    let psi2 = vec(&[one + b2, beta]);
    let eta = device.eta;
    let area =
        s * s * r1_ratio.norm_sqr() * (T::one() - eta + T::lit(2.0) * eta * (t2 * r2).norm_sqr());
    let w1 = cr(device.eta_s * eta);
    let w0 = cr((T::one() - device.eta_s) * eta);
    let a = cr(area);
    let mat = CMatrix::outer(&big_phi, &big_phi)
        .add(&CMatrix::outer(&small_phi, &small_phi).scale(a))
        .scale(w1)
        .add(
            &CMatrix::outer(&psi1, &psi1)
                .add(&CMatrix::outer(&psi2, &psi2).scale(a))
                .scale(w0),
        );
    FockDensity::from_matrix(mat)
}

/// Everything about one target that does not depend on the device:
/// propagated `|1,0,0>` and `|0,0,0>` and the frame displacements.
#[derive(Debug, Clone)]
pub struct EngineeringFrame<T> {
    pub target: TargetState<T>,
    pub params: Parametrization<T>,
    pub scheme: SchemeParams<T>,
    dims: SchemeDims,
    gamma: [C<T>; 3],
    one: ModeTensor<T>,
    vac: ModeTensor<T>,
}

impl<T: Real> EngineeringFrame<T> {
    pub fn new(target: &TargetState<T>, s: T, r1_ratio: T, dims: SchemeDims) -> Result<Self> {
        let params = parametrize(target, s, r1_ratio)?;
        let scheme = SchemeParams::from_ratio(s, cr(r1_ratio), cr(params.t2), cr(params.r2))?;
        let ifm = Interferometer::new(scheme, dims);
        let gamma = ifm.heisenberg_displacement(cr(params.beta));
        let one = ifm.propagate(&FockVector::basis(1, dims.na))?;
        let vac = ifm.propagate(&FockVector::vacuum(dims.na))?;
        Ok(Self {
            target: *target,
            params,
            scheme,
            dims,
            gamma,
            one,
            vac,
        })
    }

    /// Heralded, displaced-back output for a device. The displacement is
    /// moved through the interferometer, so only `|1>` and `|0>` are
    /// propagated and the detectors see displaced POVM elements.
    pub fn output(&self, device: &DeviceModel<T>, branch: Branch) -> Result<HeraldResult<T>> {
        frame_output(
            &self.one,
            &self.vac,
            self.gamma,
            cr(self.params.beta),
            self.dims,
            device,
            branch,
        )
    }

    pub fn fidelity(&self, device: &DeviceModel<T>, branch: Branch) -> Result<T> {
        let out = self.output(device, branch)?;
        fidelity(&out.rho_out, &self.target.to_vector(self.dims.na)?)
    }
}

fn frame_output<T: Real>(
    one: &ModeTensor<T>,
    vac: &ModeTensor<T>,
    gamma: [C<T>; 3],
    beta: C<T>,
    dims: SchemeDims,
    device: &DeviceModel<T>,
    branch: Branch,
) -> Result<HeraldResult<T>> {
    let [ga, gb, gc] = gamma;
    let (wb, wc) = branch_povms(device.eta, branch, dims, Some((gb, gc)));
    let mixed = reduce_to_first_mode(one, one, &wb, &wc)
        .scale(cr(device.eta_s))
        .add(&reduce_to_first_mode(vac, vac, &wb, &wc).scale(cr(T::one() - device.eta_s)));
    let shift = displacement_op(ga - beta, dims.na);
    let out = finish(shift.sandwich(&mixed), branch)?;
    check_tail(&out.rho_out)?;
    Ok(out)
}

/// Exact output for an arbitrary scheme: the imperfect single photon is
/// displaced by `beta`, heralded on `branch` and displaced back by `-beta`.
pub fn herald_displaced_photon<T: Real>(
    beta: C<T>,
    scheme: &SchemeParams<T>,
    device: &DeviceModel<T>,
    branch: Branch,
    dims: SchemeDims,
) -> Result<HeraldResult<T>> {
    let ifm = Interferometer::new(*scheme, dims);
    let gamma = ifm.heisenberg_displacement(beta);
    let one = ifm.propagate(&FockVector::basis(1, dims.na))?;
    let vac = ifm.propagate(&FockVector::vacuum(dims.na))?;
    frame_output(&one, &vac, gamma, beta, dims, device, branch)
}

/// Output of [`engineer_state`].
#[derive(Debug, Clone)]
pub struct EngineeredState<T> {
    pub result: HeraldResult<T>,
    pub params: Parametrization<T>,
    pub fidelity: T,
}

pub fn engineer_state_with<T: Real>(
    target: &TargetState<T>,
    s: T,
    r1_ratio: T,
    device: &DeviceModel<T>,
    branch: Branch,
    dims: SchemeDims,
) -> Result<EngineeredState<T>> {
    let frame = EngineeringFrame::new(target, s, r1_ratio, dims)?;
    let result = frame.output(device, branch)?;
    let fidelity = fidelity(&result.rho_out, &target.to_vector(dims.na)?)?;
    Ok(EngineeredState {
        result,
        params: frame.params,
        fidelity,
    })
}

/// Displaces the imperfect single photon by `beta`, heralds on the first
/// detector, displaces back by `-beta`.
pub fn engineer_state<T: Real>(
    target: &TargetState<T>,
    s: T,
    r1_ratio: T,
    device: &DeviceModel<T>,
) -> Result<EngineeredState<T>> {
    engineer_state_with(
        target,
        s,
        r1_ratio,
        device,
        Branch::Pd1,
        SchemeDims::default(),
    )
}

/// Same as [`engineer_state_with`] but propagating the displaced source
/// directly; needs `Na` large enough to hold `D(beta)|1>`.
pub fn engineer_state_direct<T: Real>(
    target: &TargetState<T>,
    s: T,
    r1_ratio: T,
    device: &DeviceModel<T>,
    branch: Branch,
    dims: SchemeDims,
) -> Result<EngineeredState<T>> {
    let params = parametrize(target, s, r1_ratio)?;
    let scheme = SchemeParams::from_ratio(s, cr(r1_ratio), cr(params.t2), cr(params.r2))?;
    let na = dims.na;
    let source = FockDensity::diagonal(
        &(0..na)
            .map(|n| match n {
                0 => T::one() - device.eta_s,
                1 => device.eta_s,
                _ => T::zero(),
            })
            .collect::<Vec<_>>(),
    );
    let d = displacement_op(cr(params.beta), na);
    let input = source.transform(&d);
    check_tail(&input)?;
    let ifm = Interferometer::new(scheme, dims);
    let (wb, wc) = branch_povms(device.eta, branch, dims, None);
    let heralded = ifm.herald_operator(&input, &wb, &wc)?;
    let result = finish(d.adjoint().sandwich(&heralded), branch)?;
    check_tail(&result.rho_out)?;
    let fidelity = fidelity(&result.rho_out, &target.to_vector(na)?)?;
    Ok(EngineeredState {
        result,
        params,
        fidelity,
    })
}

/// Tensor-product Gauss-Legendre rule over `(theta, phi)` and the finer
/// rule used for the error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    pub check: Option<(usize, usize)>,
    pub branch: Branch,
    pub dims: SchemeDims,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_theta: 32,
            n_phi: 32,
            check: Some((48, 48)),
            branch: Branch::Pd1,
            dims: SchemeDims::default(),
        }
    }
}

/// Average fidelity with its error estimate (difference to the finer
/// rule, NaN without one), the nodes moved off singular targets and the
/// nodes excluded because their herald probability underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEstimate<T> {
    pub value: T,
    pub err_estimate: T,
    pub displaced_nodes: usize,
    pub displaced_weight: T,
    pub excluded_nodes: usize,
    pub excluded_weight: T,
}

struct Node<T> {
    weight: T,
    frame: EngineeringFrame<T>,
}

struct Rule<T> {
    nodes: Vec<Node<T>>,
    displaced: usize,
    displaced_weight: T,
}

fn build_rule<T: Real>(
    n_theta: usize,
    n_phi: usize,
    s: T,
    r1_ratio: T,
    dims: SchemeDims,
) -> Result<Rule<T>> {
    let pi = T::PI();
    let gt = GaussLegendre::on_interval(n_theta, T::zero(), pi);
    let gp = GaussLegendre::on_interval(n_phi, T::zero(), pi + pi);
    let step = T::lit(1e-4) * pi / T::lit(n_theta as f64);
    let pairs: Vec<(T, T, T)> = gt
        .nodes
        .iter()
        .zip(&gt.weights)
        .flat_map(|(th, wt)| {
            gp.nodes
                .iter()
                .zip(&gp.weights)
                .map(move |(ph, wp)| (*th, *ph, *wt * *wp * th.sin() / (T::lit(4.0) * pi)))
        })
        .collect();
    let built: Vec<(Node<T>, bool)> = pairs
        .par_iter()
        .map(|&(th, ph, weight)| {
            let mut moved = false;
            for k in 0..41usize {
                let offset = if k == 0 {
                    T::zero()
                } else {
                    let mag = T::lit(k.div_ceil(2) as f64) * step;
                    if k % 2 == 1 {
                        mag
                    } else {
                        -mag
                    }
                };
                let theta = (th + offset).max(T::zero()).min(pi);
                match EngineeringFrame::new(&TargetState::new(theta, ph)?, s, r1_ratio, dims) {
                    Ok(frame) => return Ok((Node { weight, frame }, moved)),
                    Err(Error::SingularParametrization { .. }) => moved = true,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::SingularParametrization {
                theta: th.to_f64_lossy(),
                phi: ph.to_f64_lossy(),
            })
        })
        .collect::<Result<_>>()?;
    let displaced = built.iter().filter(|(_, m)| *m).count();
    let displaced_weight = built
        .iter()
        .filter(|(_, m)| *m)
        .fold(T::zero(), |acc, (n, _)| acc + n.weight);
    Ok(Rule {
        nodes: built.into_iter().map(|(n, _)| n).collect(),
        displaced,
        displaced_weight,
    })
}

struct Integral<T> {
    value: T,
    excluded: usize,
    excluded_weight: T,
}

/// Weighted fidelity over the rule. Nodes whose herald probability
/// underflows (targets next to the singular set, where `beta` is huge and
/// the detectors always fire) are excluded and the rest renormalized.
fn integrate<T: Real>(
    rule: &Rule<T>,
    device: &DeviceModel<T>,
    branch: Branch,
) -> Result<Integral<T>> {
    let parts = rule
        .nodes
        .par_iter()
        .map(|n| match n.frame.fidelity(device, branch) {
            Ok(f) => Ok((n.weight, Some(f))),
            Err(Error::VanishingNorm { .. }) => Ok((n.weight, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = T::zero();
    let mut kept = T::zero();
    let mut excluded = 0;
    let mut excluded_weight = T::zero();
    for (w, f) in parts {
        match f {
            Some(f) => {
                acc += w * f;
                kept += w;
            }
            None => {
                excluded += 1;
                excluded_weight += w;
            }
        }
    }
    if kept <= T::zero() {
        return Err(Error::InvalidParameter(
            "every quadrature node was excluded".into(),
        ));
    }
    Ok(Integral {
        value: acc / kept,
        excluded,
        excluded_weight,
    })
}

/// `F_avg` for several devices, reusing the device-independent propagation.
pub fn average_fidelity_sweep<T: Real>(
    s: T,
    r1_ratio: T,
    devices: &[DeviceModel<T>],
    spec: &QuadratureSpec,
) -> Result<Vec<FidelityEstimate<T>>> {
    let main = build_rule(spec.n_theta, spec.n_phi, s, r1_ratio, spec.dims)?;
    let check = match spec.check {
        Some((nt, np)) => Some(build_rule(nt, np, s, r1_ratio, spec.dims)?),
        None => None,
    };
    devices
        .iter()
        .map(|dev| {
            let main_int = integrate(&main, dev, spec.branch)?;
            let err_estimate = match &check {
                Some(rule) => (integrate(rule, dev, spec.branch)?.value - main_int.value).abs(),
                None => T::nan(),
            };
            Ok(FidelityEstimate {
                value: main_int.value,
                err_estimate,
                displaced_nodes: main.displaced,
                displaced_weight: main.displaced_weight,
                excluded_nodes: main_int.excluded,
                excluded_weight: main_int.excluded_weight,
            })
        })
        .collect()
}

/// `F_avg = (1/4pi) int sin(theta) <Phi|rho_out|Phi> dtheta dphi`.
pub fn average_fidelity<T: Real>(
    s: T,
    r1_ratio: T,
    device: &DeviceModel<T>,
    spec: &QuadratureSpec,
) -> Result<FidelityEstimate<T>> {
    Ok(average_fidelity_sweep(s, r1_ratio, std::slice::from_ref(device), spec)?.remove(0))
}

/// One row of an average-fidelity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T> {
    pub device: DeviceModel<T>,
    pub estimate: FidelityEstimate<T>,
}

/// `eta,eta_s,F_avg,err_estimate` rows.
pub fn fidelity_sweep_csv<T: Real>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from("eta,eta_s,F_avg,err_estimate\n");
    for r in rows {
        out.push_str(&format!(
            "{:.11e},{:.11e},{:.11e},{:.11e}\n",
            r.device.eta.to_f64_lossy(),
            r.device.eta_s.to_f64_lossy(),
            r.estimate.value.to_f64_lossy(),
            r.estimate.err_estimate.to_f64_lossy()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent_op::{apply_displaced_op_conjugated, CoherentOpParams, DisplacedOpParams};
    use crate::fock::trace_distance;
    use crate::scalar::c;

    #[test]
    fn parametrization_reproduces_target_ratios() {
        let (s, r1) = (0.01, 0.01);
        for (th, ph) in [
            (0.3, 0.4),
            (1.2, 2.5),
            (2.6, 5.0),
            (std::f64::consts::FRAC_PI_2, 0.3),
        ] {
            let t = TargetState::new(th, ph).unwrap();
            let p = parametrize(&t, s, r1).unwrap();
            assert!((p.t2 * p.t2 + p.r2 * p.r2 - 1.0).abs() < 1e-14);
            let phi = [
                r1 * p.t2,
                (r1 * p.t2 + s * p.r2) * p.beta,
                2f64.sqrt() * s * p.r2,
            ];
            let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
            let k = t.coefficients();
            let dot: f64 = phi.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / norm;
            assert!((dot.abs() - 1.0).abs() < 1e-12, "({th},{ph}) overlap {dot}");
        }
    }

    #[test]
    fn pure_two_photon_target_is_the_limit() {
        let t = TargetState::new(0.0, 0.0).unwrap();
        let p = parametrize(&t, 0.01, 0.01).unwrap();
        assert_eq!((p.t2, p.r2, p.beta), (0.0, 1.0, 0.0));
        let out = engineer_state(&t, 0.01, 0.01, &DeviceModel::ideal()).unwrap();
        assert!(out.fidelity >= 0.99, "F={}", out.fidelity);
    }

    #[test]
    fn singular_targets_are_rejected() {
        // C2 + sqrt2 C0 = 0
        let th = std::f64::consts::PI - (1.0 / 2f64.sqrt()).atan();
        let t = TargetState::new(th, 0.0).unwrap();
        assert!(matches!(
            parametrize(&t, 0.01, 0.01),
            Err(Error::SingularParametrization { .. })
        ));
        let one =
            TargetState::new(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(matches!(
            parametrize(&one, 0.01, 0.01),
            Err(Error::SingularParametrization { .. })
        ));
    }

    #[test]
    fn analytic_terms_structure() {
        let dev = DeviceModel::new(0.7, 1.0).unwrap();
        let rho = rho_con_analytic(c(0.3, 0.1), 0.01, cr(0.01), cr(0.6), cr(0.8), &dev, 6).unwrap();
        // Only |Phi>, |phi> remain, both inside span{|0>,|1>,|2>}
        assert!(rho.matrix()[(3, 3)].norm() == 0.0);
        let zero = rho_con_analytic(
            C::new(0.0, 0.0),
            0.01,
            cr(0.01),
            cr(0.6),
            cr(0.8),
            &DeviceModel::new(1.0, 0.0).unwrap(),
            4,
        )
        .unwrap();
        // beta = 0 and no photon: Psi2 = |0>, Psi1 = s r2 |1>
        let a = 0.01f64.powi(4) * 2.0 * 0.48f64.powi(2);
        assert!((zero.matrix()[(0, 0)].re - a).abs() < 1e-20);
        assert!((zero.matrix()[(1, 1)].re - (0.008f64).powi(2)).abs() < 1e-18);
    }

    #[test]
    fn ideal_branch_is_displaced_operation_on_single_photon() {
        let (s, r1, t2, r2, beta) = (0.02, 0.03, cr(0.6), c(0.0, 0.8), c(0.4, -0.2));
        let params = CoherentOpParams::raw(cr(r1) * t2, cr(s) * r2);
        let out = apply_displaced_op_conjugated(
            &DisplacedOpParams::new(params, beta),
            &FockVector::basis(1, 30),
        )
        .unwrap();
        let mid = cr(r1) * t2 * beta + cr(s) * r2 * beta.conj();
        assert!((out.amp(0) - cr(r1) * t2).norm() < 1e-12);
        assert!((out.amp(1) - mid).norm() < 1e-12);
        assert!((out.amp(2) - cr(2f64.sqrt() * s) * r2).norm() < 1e-12);
    }

    #[test]
    fn displaced_frame_matches_direct_route() {
        let dims = SchemeDims::new(30, 4, 4);
        let dev = DeviceModel::new(0.7, 0.8).unwrap();
        let t = TargetState::new(0.9, 0.7).unwrap();
        let frame = engineer_state_with(&t, 0.01f64, 0.01, &dev, Branch::Pd1, dims).unwrap();
        let direct = engineer_state_direct(&t, 0.01, 0.01, &dev, Branch::Pd1, dims).unwrap();
        let td = trace_distance(&frame.result.rho_out, &direct.result.rho_out).unwrap();
        assert!(td < 1e-10, "td={td}");
        assert!((frame.result.success_prob - direct.result.success_prob).abs() < 1e-12);
    }

    #[test]
    fn analytic_oracle_close_to_exact() {
        let dev = DeviceModel::new(0.6, 0.85).unwrap();
        let t = TargetState::new(1.0, 0.5).unwrap();
        let out = engineer_state(&t, 0.01, 0.01, &dev).unwrap();
        let p = out.params;
        let ana = rho_con_analytic(cr(p.beta), 0.01, cr(0.01), cr(p.t2), cr(p.r2), &dev, 16)
            .unwrap()
            .rescaled()
            .0;
        let td = trace_distance(&out.result.rho_out, &ana).unwrap();
        assert!(td < 1e-3, "td={td}");
    }

    #[test]
    fn sweep_csv_header() {
        let row = SweepRow {
            device: DeviceModel::ideal(),
            estimate: FidelityEstimate {
                value: 0.9,
                err_estimate: 1e-4,
                displaced_nodes: 0,
                displaced_weight: 0.0,
                excluded_nodes: 0,
                excluded_weight: 0.0,
            },
        };
        let csv = fidelity_sweep_csv(&[row]);
        assert!(csv.starts_with("eta,eta_s,F_avg,err_estimate\n1.00000000000e0,"));
    }
}

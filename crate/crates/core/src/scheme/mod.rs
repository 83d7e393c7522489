//! Heralding interferometer: a non-degenerate parametric amplifier on modes
//! `a, c`, beam splitters on `a, b` and `b, c`, and on-off detectors on `b`
//! and `c`. Also the displaced-frame state engineering of superpositions of
//! `|0>, |1>, |2>` and its average fidelity.

mod engineer;
mod interferometer;
mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::coherent_op::CoherentOpParams;
use crate::error::{Error, Result};
use crate::fock::{FockDensity, FockVector};
use crate::scalar::{c, cr, Real, C};

pub use engineer::{
    average_fidelity, average_fidelity_sweep, engineer_state, engineer_state_direct,
    engineer_state_with, fidelity_sweep_csv, herald_displaced_photon, parametrize,
    rho_con_analytic, EngineeredState, EngineeringFrame, FidelityEstimate, Parametrization,
    QuadratureSpec, SweepRow, SINGULAR_TOL,
};
pub use interferometer::{
    beamsplitter, herald_coherent_op, herald_coherent_op_with, herald_perturbative, ndpa_step,
    povm_click, povm_completeness_defect, povm_no_click, reduce_to_first_mode, Expansion,
    Interferometer,
};
pub use tensor::{Ladder, ModeTensor, Term};

/// Unitarity tolerance for beam-splitter amplitude pairs.
pub const UNITARITY_TOL: f64 = 1e-12;

fn check_pair<T: Real>(t: C<T>, r: C<T>, what: &str) -> Result<()> {
    let defect = (t.norm_sqr() + r.norm_sqr() - T::one()).abs();
    if defect > T::tol(UNITARITY_TOL) || !defect.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what}: |t|^2 + |r|^2 - 1 = {:.3e}",
            defect.to_f64_lossy()
        )));
    }
    Ok(())
}

/// Amplifier coupling and the two beam splitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams<T> {
    pub s: T,
    pub t1: C<T>,
    pub r1: C<T>,
    pub t2: C<T>,
    pub r2: C<T>,
}

impl<T: Real> SchemeParams<T> {
    pub fn new(s: T, t1: C<T>, r1: C<T>, t2: C<T>, r2: C<T>) -> Result<Self> {
        if !(s >= T::zero()) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling s must be finite and >= 0, got {s}"
            )));
        }
        check_pair(t1, r1, "first beam splitter")?;
        check_pair(t2, r2, "second beam splitter")?;
        Ok(Self { s, t1, r1, t2, r2 })
    }

    /// Builds the first beam splitter from `R1 = r1^* / t1` with real `t1 > 0`.
    pub fn from_ratio(s: T, r1_ratio: C<T>, t2: C<T>, r2: C<T>) -> Result<Self> {
        let t1 = T::one() / (T::one() + r1_ratio.norm_sqr()).sqrt();
        Self::new(s, cr(t1), r1_ratio.conj() * cr(t1), t2, r2)
    }

    /// `R1 = r1^* / t1`.
    pub fn r1_ratio(&self) -> C<T> {
        self.r1.conj() / self.t1
    }

    /// The `(t, r)` the herald implements to leading order in `s` and `R1`.
    pub fn effective_op(&self, branch: Branch) -> CoherentOpParams<T> {
        let s = cr(self.s);
        let big_r = self.r1_ratio();
        match branch {
            Branch::Pd1 => CoherentOpParams::raw(big_r * self.t2, s * self.r2),
            Branch::Pd2 => CoherentOpParams::raw(big_r * self.r2.conj(), -s * self.t2.conj()),
        }
    }
}

/// Detector efficiency and single-photon source efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceModel<T> {
    pub eta: T,
    pub eta_s: T,
}

impl<T: Real> DeviceModel<T> {
    pub fn new(eta: T, eta_s: T) -> Result<Self> {
        for (name, v) in [("eta", eta), ("eta_s", eta_s)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self { eta, eta_s })
    }

    pub fn ideal() -> Self {
        Self {
            eta: T::one(),
            eta_s: T::one(),
        }
    }
}

/// `sin(theta)cos(phi)|0> + sin(theta)sin(phi)|1> + cos(theta)|2>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState<T> {
    theta: T,
    phi: T,
}

impl<T: Real> TargetState<T> {
    pub fn new(theta: T, phi: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::PI()) || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "target angles out of range: theta={theta}, phi={phi}"
            )));
        }
        let two_pi = T::PI() + T::PI();
        let mut phi = phi % two_pi;
        if phi < T::zero() {
            phi += two_pi;
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// `[C0, C1, C2]`.
    pub fn coefficients(&self) -> [T; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `tan(theta) cos(phi)`; infinite at `theta = pi/2`.
    pub fn b1(&self) -> T {
        let [c0, _, c2] = self.coefficients();
        c0 / c2
    }

    /// `tan(theta) sin(phi)`.
    pub fn b2(&self) -> T {
        let [_, c1, c2] = self.coefficients();
        c1 / c2
    }

    pub fn to_vector(&self, dim: usize) -> Result<FockVector<T>> {
        if dim < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: dim,
            });
        }
        let mut amps = vec![c(T::zero(), T::zero()); dim];
        for (a, k) in amps.iter_mut().zip(self.coefficients()) {
            *a = cr(k);
        }
        Ok(FockVector::from_amps(amps))
    }
}

/// Which detector clicked: `Pd1` watches mode `b`, `Pd2` watches mode `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Pd1,
    Pd2,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Pd1 => "pd1",
            Branch::Pd2 => "pd2",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd1" => Ok(Branch::Pd1),
            "pd2" => Ok(Branch::Pd2),
            other => Err(Error::Parse(format!(
                "unknown branch '{other}' (expected pd1 or pd2)"
            ))),
        }
    }
}

/// Per-mode cutoffs of the three-mode pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeDims {
    pub na: usize,
    pub nb: usize,
    pub nc: usize,
}

impl Default for SchemeDims {
    fn default() -> Self {
        Self {
            na: 16,
            nb: 4,
            nc: 4,
        }
    }
}

impl SchemeDims {
    pub fn new(na: usize, nb: usize, nc: usize) -> Self {
        Self { na, nb, nc }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.na, self.nb, self.nc]
    }
}

/// Normalized mode-`a` output of a heralding event.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldResult<T> {
    pub rho_out: FockDensity<T>,
    pub success_prob: T,
    pub branch: Branch,
}

impl<T: Real> HeraldResult<T> {
    pub fn to_json(&self) -> String {
        let rho: serde_json::Value =
            serde_json::from_str(&self.rho_out.to_json()).unwrap_or(serde_json::Value::Null);
        serde_json::json!({
            "success_prob": self.success_prob.to_f64_lossy(),
            "branch": self.branch.as_str(),
            "rho_out": rho,
        })
        .to_string()
    }
}

//! Observable nonclassicality: optimized quadrature squeezing and the
//! Mandel Q factor, their closed forms for coherent and thermal inputs,
//! and parameter scans for the onset of each effect.

use rayon::prelude::*;

use crate::coherent_op::{apply_coherent_op, CoherentOpParams};
use crate::error::{Error, Result};
use crate::fock::{
    make_coherent, make_thermal, moments, normalize, Cutoff, FockDensity, FockState, FockVector,
    ThermalSpec,
};
use crate::optim::bisect_root;
use crate::phase_space::{quasiprob_minimum, snap_noise, PhaseGrid, DEFAULT_MARGIN};
use crate::scalar::{Real, C};

/// Optimized normally-ordered quadrature variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport<T> {
    /// `min_theta <:Delta^2 X_theta:>`; negative means squeezed.
    pub s_opt: T,
    /// Minimizing angle in `[0, 2 pi)` (the other minimizer is `+ pi`).
    pub theta_opt: T,
    pub squeezed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelReport<T> {
    pub q: T,
    pub sub_poissonian: bool,
}

/// `S_opt = -2|<a^2> - <a>^2| + 2<n> - 2|<a>|^2` from exact moments, with
/// `X_theta = a e^{-i theta} + a^dag e^{i theta}`.
pub fn squeezing_opt<T: Real, S: FockState<T>>(state: &S) -> Result<SqueezingReport<T>> {
    let m = moments(state)?;
    let two = T::lit(2.0);
    let d = m.mean_a2 - m.mean_a * m.mean_a;
    let s_opt = -two * d.norm() + two * m.mean_n - two * m.mean_a.norm_sqr();
    let mut theta = (d.arg() - T::PI()) * T::lit(0.5);
    if theta < T::zero() {
        theta += T::PI();
    }
    Ok(SqueezingReport {
        s_opt,
        theta_opt: theta,
        squeezed: s_opt < T::zero(),
    })
}

/// `S_opt = (2|r|^2 / M - 1/2)^2 - 1/4` for a coherent input.
pub fn squeezing_coherent_analytic<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>) -> T {
    let m = coherent_m(alpha0, t, r);
    let half = T::lit(0.5);
    let x = T::lit(2.0) * r.norm_sqr() / m - half;
    x * x - half * half
}

/// `M = |t alpha0 + r alpha0^*|^2 + |r|^2`.
pub fn coherent_m<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>) -> T {
    (t * alpha0 + r * alpha0.conj()).norm_sqr() + r.norm_sqr()
}

/// Optimal `|r|` for squeezing a coherent input of magnitude `|alpha0|`,
/// `|r|^2 = |alpha0|^2 (3 + 2 sqrt3 |alpha0| + 2 |alpha0|^2) / (9 + 4 |alpha0|^4)`,
/// which assumes `cos(phi_r - 2 phi) = 1`. Photon addition (`1`) beyond
/// `|alpha0| = sqrt3`.
pub fn optimal_r_for_squeezing<T: Real>(alpha0_mag: T) -> T {
    let a = alpha0_mag.abs();
    let sqrt3 = T::lit(3.0).sqrt();
    if a >= sqrt3 {
        return T::one();
    }
    let a2 = a * a;
    let r2 = a2 * (T::lit(3.0) + T::lit(2.0) * sqrt3 * a + T::lit(2.0) * a2)
        / (T::lit(9.0) + T::lit(4.0) * a2 * a2);
    r2.min(T::one()).sqrt()
}

/// Optimal `|r|` for a given phase factor `cos_phase = cos(phi_r - 2 phi)`:
/// the root of `|alpha0|^2 (1 + 2 |t||r| cos_phase) = 3 |r|^2` in `(0, 1]`,
/// or `1` if the condition cannot be met.
pub fn optimal_r_for_squeezing_with_phase<T: Real>(alpha0_mag: T, cos_phase: T) -> T {
    let a2 = alpha0_mag * alpha0_mag;
    if a2 <= T::zero() {
        return T::zero();
    }
    let g = |r: T| {
        let t = (T::one() - r * r).max(T::zero()).sqrt();
        a2 * (T::one() + T::lit(2.0) * t * r * cos_phase) - T::lit(3.0) * r * r
    };
    if g(T::one()) >= T::zero() {
        return T::one();
    }
    bisect_root(g, T::zero(), T::one(), T::tol(1e-14)).unwrap_or(T::one())
}

/// `Q = <(Delta n)^2> / <n> - 1`.
pub fn mandel_q<T: Real, S: FockState<T>>(state: &S) -> Result<MandelReport<T>> {
    let m = moments(state)?;
    if m.mean_n < T::lit(1e-14) {
        return Err(Error::VanishingMean {
            mean: m.mean_n.to_f64_lossy(),
        });
    }
    let q = (m.mean_n2 - m.mean_n * m.mean_n) / m.mean_n - T::one();
    Ok(MandelReport {
        q,
        sub_poissonian: q < T::zero(),
    })
}

/// `Q = |a0|^2 [M^2 + M - (1 - 2|r|^2)^2 |a0|^2] / (M [M + (M - 1 + 2|r|^2)|a0|^2]) - 1`
/// for a coherent input.
pub fn mandel_q_coherent_analytic<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>) -> T {
    let m = coherent_m(alpha0, t, r);
    let a2 = alpha0.norm_sqr();
    let r2 = r.norm_sqr();
    let one = T::one();
    let two = T::lit(2.0);
    let k = one - two * r2;
    a2 * (m * m + m - k * k * a2) / (m * (m + (m - one + two * r2) * a2)) - one
}

/// `Q = [2n^2 (n + r^2)^2 - r^4 (1 + n)^2] / [(n + r^2)(2n^2 + r^2 + 3n r^2)]`
/// for a thermal input; it does not depend on `t`.
pub fn mandel_q_thermal_analytic<T: Real>(nbar: T, r: T) -> T {
    let n = nbar;
    let r2 = r * r;
    let two = T::lit(2.0);
    let num = two * n * n * (n + r2) * (n + r2) - r2 * r2 * (T::one() + n) * (T::one() + n);
    let den = (n + r2) * (two * n * n + r2 + T::lit(3.0) * n * r2);
    num / den
}

/// `r^2 = sqrt2 n^2 / [1 - (sqrt2 - 1) n]`, above which a thermal input
/// becomes sub-Poissonian. Returns `r` (`None` if it exceeds 1).
pub fn subpoisson_threshold_r<T: Real>(nbar: T) -> Option<T> {
    let sqrt2 = T::SQRT_2();
    let den = T::one() - (sqrt2 - T::one()) * nbar;
    if den <= T::zero() {
        return None;
    }
    let r = (sqrt2 * nbar * nbar / den).sqrt();
    (r <= T::one()).then_some(r)
}

/// Coherent-input squeezing requires `M > 2|r|^2`.
pub fn squeezing_condition<T: Real>(alpha0: C<T>, t: C<T>, r: C<T>) -> bool {
    coherent_m(alpha0, t, r) > T::lit(2.0) * r.norm_sqr()
}

/// Input state family for scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSpec<T> {
    Coherent(C<T>),
    Thermal(T),
    Fock(usize),
}

impl<T: Real> InputSpec<T> {
    /// The scalar reported in the `param` column of scan output.
    pub fn param(&self) -> T {
        match self {
            InputSpec::Coherent(a) => a.norm(),
            InputSpec::Thermal(n) => *n,
            InputSpec::Fock(n) => T::lit(*n as f64),
        }
    }

    pub fn density(&self, cutoff: impl Into<Cutoff>) -> Result<FockDensity<T>> {
        let cutoff = cutoff.into();
        match self {
            InputSpec::Coherent(a) => Ok(make_coherent(*a, cutoff)?.to_density()),
            InputSpec::Thermal(n) => make_thermal(&ThermalSpec::new(*n)?, cutoff),
            InputSpec::Fock(n) => {
                if *n + 1 >= cutoff.dim {
                    return Err(Error::InvalidParameter(format!(
                        "number state |{n}> needs a cutoff above {}",
                        n + 1
                    )));
                }
                Ok(FockVector::basis(*n, cutoff.dim).to_density())
            }
        }
    }

    /// Normalized `(t a + r a^dag) rho (t a + r a^dag)^dag`.
    pub fn output(
        &self,
        params: &CoherentOpParams<T>,
        cutoff: impl Into<Cutoff>,
    ) -> Result<FockDensity<T>> {
        let rho = self.density(cutoff)?;
        Ok(normalize(&apply_coherent_op(params, &rho)?)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    Squeezing,
    SubPoisson,
    WignerNegativity,
}

impl ScanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanKind::Squeezing => "squeezing",
            ScanKind::SubPoisson => "subpoisson",
            ScanKind::WignerNegativity => "wigner-negativity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow<T> {
    pub r: T,
    /// `S_opt`, `Q` or the minimum of `W`; negative means nonclassical.
    pub metric: T,
    pub crossed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan<T> {
    pub kind: ScanKind,
    pub param: T,
    pub rows: Vec<ScanRow<T>>,
    /// First sign change of the metric along the grid, refined by bisection.
    pub crossing: Option<T>,
}

impl<T: Real> ThresholdScan<T> {
    /// CSV with header `param,r,metric,crossed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,r,metric,crossed\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:.11e},{:.11e},{:.11e},{}\n",
                self.param.to_f64_lossy(),
                row.r.to_f64_lossy(),
                row.metric.to_f64_lossy(),
                row.crossed
            ));
        }
        out
    }
}

/// Value of one nonclassicality metric on the normalized output for real
/// `r` (and `t = sqrt(1 - r^2)`).
pub fn scan_metric<T: Real>(
    kind: ScanKind,
    input: &InputSpec<T>,
    r: T,
    cutoff: impl Into<Cutoff>,
) -> Result<T> {
    let params = CoherentOpParams::from_real_r(r)?;
    let rho = input.output(&params, cutoff)?;
    match kind {
        ScanKind::Squeezing => Ok(squeezing_opt(&rho)?.s_opt),
        ScanKind::SubPoisson => Ok(mandel_q(&rho)?.q),
        ScanKind::WignerNegativity => {
            let center = crate::phase_space::mean_amplitude(&rho);
            let grid = PhaseGrid::around(center, T::lit(DEFAULT_MARGIN), T::lit(0.1))?;
            Ok(snap_noise(quasiprob_minimum(&rho, &grid, T::zero())?.1))
        }
    }
}

/// Evaluates `kind` over `r_grid` in parallel and locates the first
/// change of side (nonclassical means a negative metric), bisecting the
/// bracketing grid interval down to `1e-10`.
pub fn threshold_scan<T: Real>(
    kind: ScanKind,
    input: &InputSpec<T>,
    r_grid: &[T],
    cutoff: impl Into<Cutoff>,
) -> Result<ThresholdScan<T>> {
    let cutoff = cutoff.into();
    let rows = r_grid
        .par_iter()
        .map(|r| {
            let metric = scan_metric(kind, input, *r, cutoff)?;
            Ok(ScanRow {
                r: *r,
                metric,
                crossed: metric < T::zero(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossing = first_crossing(kind, input, &rows, cutoff)?;
    Ok(ThresholdScan {
        kind,
        param: input.param(),
        rows,
        crossing,
    })
}

fn first_crossing<T: Real>(
    kind: ScanKind,
    input: &InputSpec<T>,
    rows: &[ScanRow<T>],
    cutoff: Cutoff,
) -> Result<Option<T>> {
    let Some(k) = rows.windows(2).position(|w| w[0].crossed != w[1].crossed) else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (rows[k].r, rows[k + 1].r);
    let side = rows[k + 1].crossed;
    let tol = T::tol(1e-10);
    while (hi - lo).abs() > tol {
        let mid = (lo + hi) * T::lit(0.5);
        if (scan_metric(kind, input, mid, cutoff)? < T::zero()) == side {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((lo + hi) * T::lit(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{c, cr};

    #[test]
    fn squeezing_examples() {
        let coh = make_coherent(c(0.7f64, 0.2), 40).unwrap();
        assert!(squeezing_opt(&coh).unwrap().s_opt.abs() < 1e-10);
        let one = FockVector::<f64>::basis(1, 10);
        let rep = squeezing_opt(&one).unwrap();
        assert!((rep.s_opt - 2.0).abs() < 1e-14 && !rep.squeezed);
    }

    #[test]
    fn squeezing_closed_form_extremes() {
        // M = 4 r^2: real alpha0 with (t + r)^2 alpha0^2 = 3 r^2
        let r = 0.5f64;
        let t = (1.0 - r * r).sqrt();
        let a0 = (3.0f64).sqrt() * r / (t + r);
        assert!((squeezing_coherent_analytic(cr(a0), cr(t), cr(r)) + 0.25).abs() < 1e-14);
        // M = 2 r^2: (t + r) alpha0 = r
        let a0 = r / (t + r);
        assert!(squeezing_coherent_analytic(cr(a0), cr(t), cr(r)).abs() < 1e-14);
    }

    #[test]
    fn squeezing_closed_form_matches_moments() {
        for (a0, r) in [(0.5f64, 0.3f64), (1.0, 0.7), (0.2, 1.0)] {
            let p = CoherentOpParams::from_real_r(r).unwrap();
            let rho = InputSpec::Coherent(cr(a0)).output(&p, 40).unwrap();
            let num = squeezing_opt(&rho).unwrap().s_opt;
            assert!((num - squeezing_coherent_analytic(cr(a0), p.t(), p.r())).abs() < 1e-9);
        }
    }

    #[test]
    fn photon_addition_squeezes_only_above_unit_amplitude() {
        let one = C::new(1.0f64, 0.0);
        let zero = C::new(0.0f64, 0.0);
        assert!(squeezing_coherent_analytic(cr(0.9f64), zero, one) > 0.0);
        assert!(squeezing_coherent_analytic(cr(1.1f64), zero, one) < 0.0);
        assert!(squeezing_coherent_analytic(cr(1.0f64), zero, one).abs() < 1e-15);
    }

    #[test]
    fn optimal_r_limits() {
        assert!((optimal_r_for_squeezing(3f64.sqrt()) - 1.0).abs() < 1e-15);
        assert_eq!(optimal_r_for_squeezing(2.0f64), 1.0);
        assert!(optimal_r_for_squeezing(1e-4f64) < 1e-3);
        for a in [0.2f64, 0.5, 1.0] {
            let phased = optimal_r_for_squeezing_with_phase(a, 1.0);
            assert!((phased - optimal_r_for_squeezing(a)).abs() < 1e-10);
        }
    }

    #[test]
    fn mandel_examples() {
        assert!((mandel_q(&FockVector::<f64>::basis(1, 10)).unwrap().q + 1.0).abs() < 1e-14);
        let coh = make_coherent(c(0.5f64, 0.3), 40).unwrap();
        assert!(mandel_q(&coh).unwrap().q.abs() < 1e-10);
        let th = make_thermal(&ThermalSpec::new(0.5f64).unwrap(), 60).unwrap();
        assert!((mandel_q(&th).unwrap().q - 0.5).abs() < 1e-10);
        let vac = FockVector::<f64>::vacuum(10);
        assert!(matches!(mandel_q(&vac), Err(Error::VanishingMean { .. })));
    }

    #[test]
    fn mandel_closed_forms_match_moments() {
        for (a0, r) in [(0.5f64, 0.3f64), (1.0, 0.7), (0.1, 1.0)] {
            let p = CoherentOpParams::from_real_r(r).unwrap();
            let rho = InputSpec::Coherent(cr(a0)).output(&p, 40).unwrap();
            let e = mandel_q_coherent_analytic(cr(a0), p.t(), p.r());
            assert!((mandel_q(&rho).unwrap().q - e).abs() < 1e-8);
        }
        for (n, r) in [(0.1f64, 0.5f64), (0.5, 0.9)] {
            let p = CoherentOpParams::from_real_r(r).unwrap();
            let rho = InputSpec::Thermal(n).output(&p, 60).unwrap();
            assert!((mandel_q(&rho).unwrap().q - mandel_q_thermal_analytic(n, r)).abs() < 1e-8);
        }
    }

    #[test]
    fn thermal_mandel_vanishes_at_threshold() {
        let r = subpoisson_threshold_r(0.1f64).unwrap();
        assert!(mandel_q_thermal_analytic(0.1, r).abs() < 1e-9);
        assert!(mandel_q_thermal_analytic(0.0f64, 0.3) < 0.0);
    }

    #[test]
    fn squeezing_scan_crosses_where_m_is_twice_r2() {
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0).collect();
        let scan = threshold_scan(
            ScanKind::Squeezing,
            &InputSpec::Coherent(cr(0.5)),
            &grid,
            40,
        )
        .unwrap();
        // oracle: root of M(r) - 2 r^2 for alpha0 = 0.5
        let f = |r: f64| {
            let t = (1.0 - r * r).sqrt();
            0.25 * (t + r).powi(2) + r * r - 2.0 * r * r
        };
        let root = bisect_root(f, 0.05, 1.0, 1e-12);
        match (scan.crossing, root) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-8, "{x} vs {y}"),
            (None, None) => {}
            other => panic!("crossing mismatch {other:?}"),
        }
        assert!(scan.to_csv().starts_with("param,r,metric,crossed\n"));
    }

    #[test]
    fn vacuum_thermal_always_subpoissonian() {
        let grid = [0.1f64, 0.5, 1.0];
        let scan =
            threshold_scan(ScanKind::SubPoisson, &InputSpec::Thermal(0.0), &grid, 20).unwrap();
        assert!(scan.rows.iter().all(|row| row.crossed));
    }
}

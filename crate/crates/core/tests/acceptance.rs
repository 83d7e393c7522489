//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subadd::coherent_op::{conditioned_state, CoherentOpParams};
use subadd::fock::{
    annihilation, creation, fidelity, make_coherent, normalize, trace_distance, FockDensity,
    FockState, FockVector,
};
use subadd::nonclassicality::{
    coherent_m, mandel_q, mandel_q_coherent_analytic, optimal_r_for_squeezing, squeezing_opt,
    subpoisson_threshold_r, threshold_scan, InputSpec, ScanKind,
};
use subadd::optim::{bisect_root, golden_section};
use subadd::phase_space::{
    circle_center, mean_amplitude, measure_negativity, nonclassical_depth, s_ordered_quasiprob,
    thermal_depth_analytic, thermal_ellipse, thermal_ellipse_printed, thermal_negativity_threshold,
    wigner, wigner_coherent_analytic, wigner_thermal_analytic, DepthMethod, DepthOptions,
    PhaseGrid, DEFAULT_SPACING,
};
use subadd::scheme::{
    average_fidelity_sweep, beamsplitter, herald_coherent_op, herald_displaced_photon, ndpa_step,
    povm_completeness_defect, rho_con_analytic, Branch, DeviceModel, Expansion, ModeTensor,
    QuadratureSpec, SchemeDims, SchemeParams,
};

/// Criteria that cannot pass as literally stated; see the decisions ledger.
const KNOWN_RED: &[&str] = &["4"];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

struct Verdict {
    id: &'static str,
    pass: bool,
    /// Whether the checks outside the documented conflict hold.
    core_pass: bool,
    detail: String,
}

fn verdict(id: &'static str, checks: Vec<(bool, String)>) -> Verdict {
    let pass = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .iter()
        .map(|(_, d)| d.as_str())
        .collect::<Vec<_>>()
        .join("; ");
    Verdict {
        id,
        pass,
        core_pass: pass,
        detail,
    }
}

fn params(r: f64) -> CoherentOpParams<f64> {
    CoherentOpParams::from_real_r(r).unwrap()
}

fn criterion_1() -> Verdict {
    let want = 2.0 / 0.5f64.exp() - 1.0;
    let mut checks = Vec::new();
    for r in [0.3, FRAC_1_SQRT_2, 1.0] {
        let start = Instant::now();
        let rho = InputSpec::Fock(0).output(&params(r), 12).unwrap();
        let rep = measure_negativity(&rho, None).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let err = (rep.volume - want).abs();
        checks.push((
            err <= 5e-4 && secs < 5.0,
            format!("r={r:.4}: V_N={:.6} err={err:.2e} t={secs:.2}s", rep.volume),
        ));
    }
    verdict("1", checks)
}

fn criterion_2() -> Verdict {
    let alpha0 = cr(0.5);
    let mut checks = Vec::new();
    for r in [0.5, FRAC_1_SQRT_2, 1.0] {
        let p = params(r);
        let rho = InputSpec::Coherent(alpha0).output(&p, 24).unwrap();
        let rep = measure_negativity(&rho, None).unwrap();
        let center = circle_center(alpha0, p.t(), p.r()).unwrap();
        let off = (rep.centroid.unwrap() - center).norm();
        let err = (rep.area - PI / 4.0).abs();
        checks.push((
            err <= 2e-3 && off <= DEFAULT_SPACING,
            format!(
                "r={r:.4}: A_N={:.6} err={err:.2e} centre offset={off:.2e}",
                rep.area
            ),
        ));
    }
    verdict("2", checks)
}

fn criterion_3() -> Verdict {
    let rs = [0.5, FRAC_1_SQRT_2, 1.0];
    let mut checks = Vec::new();
    for a0 in [0.1, 0.5, 1.0] {
        for r in rs {
            let p = params(r);
            let rho = InputSpec::Coherent(cr(a0)).output(&p, 40).unwrap();
            let grid = PhaseGrid::default_for(mean_amplitude(&rho)).unwrap();
            let field = wigner(&rho, &grid).unwrap();
            let worst = grid
                .points()
                .iter()
                .zip(&field.values)
                .map(|(z, w)| (w - wigner_coherent_analytic(cr(a0), p.t(), p.r(), *z)).abs())
                .fold(0.0, f64::max);
            checks.push((
                worst <= 1e-7,
                format!("coherent a0={a0} r={r:.4}: max diff {worst:.2e}"),
            ));
        }
    }
    for n in [0.01, 0.1, 0.5] {
        for r in rs {
            let p = params(r);
            let rho = InputSpec::Thermal(n).output(&p, 60).unwrap();
            let grid = PhaseGrid::default_for(mean_amplitude(&rho)).unwrap();
            let field = wigner(&rho, &grid).unwrap();
            let worst = grid
                .points()
                .iter()
                .zip(&field.values)
                .map(|(z, w)| (w - wigner_thermal_analytic(n, p.t(), p.r(), *z)).abs())
                .fold(0.0, f64::max);
            checks.push((
                worst <= 1e-7,
                format!("thermal n={n} r={r:.4}: max diff {worst:.2e}"),
            ));
        }
    }
    verdict("3", checks)
}

fn criterion_4() -> Verdict {
    let mut checks = Vec::new();
    for n in [0.01, 0.1, 0.5] {
        let want = thermal_negativity_threshold(n);
        let grid: Vec<f64> = (1..=80).map(|k| 0.01 * k as f64).collect();
        let scan = threshold_scan(
            ScanKind::WignerNegativity,
            &InputSpec::Thermal(n),
            &grid,
            60,
        )
        .unwrap();
        let got = scan.crossing.unwrap_or(f64::NAN);
        let below = measure_negativity(
            &InputSpec::Thermal(n)
                .output(&params(want - 0.02), 60)
                .unwrap(),
            None,
        )
        .unwrap()
        .area;
        let above = measure_negativity(
            &InputSpec::Thermal(n)
                .output(&params(want + 0.02), 60)
                .unwrap(),
            None,
        )
        .unwrap()
        .area;
        checks.push((
            (got - want).abs() <= 2e-3 && below == 0.0 && above > 0.0,
            format!(
                "n={n}: threshold {got:.5} vs {want:.5}, A_N below/above {below:.1e}/{above:.1e}"
            ),
        ));
    }
    let n = 0.1;
    let mut printed_checks = Vec::new();
    for r in [0.5, FRAC_1_SQRT_2, 1.0] {
        let t = (1.0 - r * r).sqrt();
        let area = measure_negativity(&InputSpec::Thermal(n).output(&params(r), 60).unwrap(), None)
            .unwrap()
            .area;
        let printed = thermal_ellipse_printed(n, t, r).area();
        let derived = thermal_ellipse(n, t, r).area();
        printed_checks.push(checks.len());
        checks.push((
            (area - printed).abs() <= 1e-3,
            format!("n={n} r={r:.4}: A_N={area:.5} vs printed-coefficient area {printed:.5}"),
        ));
        checks.push((
            (area - derived).abs() <= 1e-3,
            format!("n={n} r={r:.4}: A_N={area:.5} vs Wigner-derived ellipse area {derived:.5}"),
        ));
    }
    let core_pass = checks
        .iter()
        .enumerate()
        .all(|(i, (ok, _))| *ok || printed_checks.contains(&i));
    Verdict {
        core_pass,
        ..verdict("4", checks)
    }
}

fn criterion_5() -> Verdict {
    let mut checks = Vec::new();
    let opts = DepthOptions::default();
    for a0 in [0.2, 0.5, 1.0] {
        for r in [0.3, FRAC_1_SQRT_2, 1.0] {
            let p = params(r);
            let rho = InputSpec::Coherent(cr(a0)).output(&p, 40).unwrap();
            let rep = nonclassical_depth(&rho, &opts).unwrap();
            let beta_star = cr(-(p.t().re / r) * a0);
            let off = rep
                .witness_beta
                .map_or(f64::INFINITY, |b| (b - beta_star).norm());
            checks.push((
                rep.tau == 1.0 && rep.method == DepthMethod::AnalyticOrthogonality && off < 1e-3,
                format!(
                    "coherent a0={a0} r={r:.4}: tau={} witness offset {off:.1e}",
                    rep.tau
                ),
            ));
        }
    }
    for n in [0.01, 0.1, 0.5] {
        for r in [0.5, FRAC_1_SQRT_2, 1.0] {
            let rho = InputSpec::Thermal(n).output(&params(r), 60).unwrap();
            let got = nonclassical_depth(&rho, &opts)
                .map(|d| d.tau)
                .unwrap_or(f64::NAN);
            let want = thermal_depth_analytic(n, r).tau;
            checks.push((
                (got - want).abs() <= 5e-3,
                format!("thermal n={n} r={r:.4}: tau={got:.4} vs {want:.4}"),
            ));
        }
    }
    verdict("5", checks)
}

fn numeric_s_opt(a0: f64, r: f64) -> f64 {
    let psi = make_coherent(cr(a0), 40).unwrap();
    let out = conditioned_state(&params(r), &psi).unwrap();
    squeezing_opt(&out).unwrap().s_opt
}

fn criterion_6() -> Verdict {
    let mut checks = Vec::new();
    for a0 in [0.2, 0.5, 1.0] {
        let gap = |r: f64| coherent_m(cr(a0), cr((1.0 - r * r).sqrt()), cr(r)) - 4.0 * r * r;
        let r_star = bisect_root(gap, 1e-6, 1.0, 1e-14).unwrap();
        let at = numeric_s_opt(a0, r_star);
        let grid_min = (1..=100)
            .map(|k| numeric_s_opt(a0, 0.01 * k as f64))
            .fold(f64::INFINITY, f64::min);
        checks.push((
            (at + 0.25).abs() <= 1e-6 && grid_min >= -0.25 - 1e-12,
            format!("a0={a0}: S_opt at M=4r^2 is {at:.9}, grid min {grid_min:.9}"),
        ));
    }
    for a0 in [0.2, 0.5, 1.0, 3f64.sqrt()] {
        let (r_num, _) = golden_section(|r| numeric_s_opt(a0, r), 0.0, 1.0, 1e-10);
        let r_closed = optimal_r_for_squeezing(a0);
        checks.push((
            (r_num - r_closed).abs() <= 1e-6,
            format!("a0={a0:.4}: brute-force r={r_num:.8} vs closed form {r_closed:.8}"),
        ));
    }
    let mut worst = f64::INFINITY;
    for n in [0.01, 0.1, 0.5, 1.0] {
        for k in 0..=20 {
            let rho = InputSpec::Thermal(n)
                .output(&params(0.05 * k as f64), 80)
                .unwrap();
            worst = worst.min(squeezing_opt(&rho).unwrap().s_opt);
        }
    }
    checks.push((worst >= -1e-10, format!("thermal min S_opt {worst:.3e}")));
    verdict("6", checks)
}

fn criterion_7() -> Verdict {
    let mut checks = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=60 {
        for j in 1..=50 {
            let (a0, r) = (0.05 * i as f64, 0.02 * j as f64);
            worst = worst.max(mandel_q_coherent_analytic(
                cr(a0),
                cr((1.0 - r * r).sqrt()),
                cr(r),
            ));
        }
    }
    checks.push((
        worst < 0.0,
        format!("closed-form coherent Q max {worst:.3e}"),
    ));
    for (a0, r) in [(0.1, 0.3), (0.5, 0.7), (1.0, 1.0)] {
        let rho = InputSpec::Coherent(cr(a0)).output(&params(r), 40).unwrap();
        let q = mandel_q(&rho).unwrap().q;
        let closed = mandel_q_coherent_analytic(cr(a0), cr((1.0 - r * r).sqrt()), cr(r));
        checks.push((
            (q - closed).abs() < 1e-10,
            format!("a0={a0} r={r}: Q {q:.6} vs {closed:.6}"),
        ));
    }
    for n in [0.01, 0.1] {
        let want = subpoisson_threshold_r::<f64>(n).unwrap().powi(2);
        let grid: Vec<f64> = (1..=200).map(|k| 0.002 * k as f64).collect();
        let scan = threshold_scan(ScanKind::SubPoisson, &InputSpec::Thermal(n), &grid, 60).unwrap();
        let got = scan.crossing.map_or(f64::NAN, |r| r * r);
        checks.push((
            (got - want).abs() <= 1e-3,
            format!("n={n}: crossing r^2={got:.6} vs {want:.6}"),
        ));
    }
    verdict("7", checks)
}

fn criterion_8() -> Verdict {
    let mut checks = Vec::new();
    let scheme = SchemeParams::from_ratio(0.01, cr(0.01), cr(0.6), c(0.0, 0.8)).unwrap();
    let device = DeviceModel::ideal();
    let inputs = [
        ("|0>", FockVector::vacuum(16)),
        ("coherent 0.5", make_coherent(cr(0.5), 16).unwrap()),
    ];
    for (name, psi) in &inputs {
        for branch in [Branch::Pd1, Branch::Pd2] {
            let out = herald_coherent_op(psi, &scheme, &device, branch).unwrap();
            let want = conditioned_state(&scheme.effective_op(branch), psi).unwrap();
            let f = fidelity(&out.rho_out, &want).unwrap();
            checks.push((f >= 0.999, format!("{name} {branch}: F={f:.6}")));
        }
    }
    verdict("8", checks)
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (s, r1) = (0.01, 0.01);
    let dims = SchemeDims::default();
    let mut checks = Vec::new();
    for k in 0..10 {
        let beta = Complex64::from_polar(rng.gen_range(0.0..0.8), rng.gen_range(0.0..2.0 * PI));
        let mix = rng.gen_range(0.05..PI / 2.0 - 0.05);
        let t2 = Complex64::from_polar(mix.cos(), rng.gen_range(0.0..2.0 * PI));
        let r2 = Complex64::from_polar(mix.sin(), rng.gen_range(0.0..2.0 * PI));
        let device = DeviceModel::new(rng.gen_range(0.1..1.0), rng.gen_range(0.5..1.0)).unwrap();
        let scheme = SchemeParams::from_ratio(s, cr(r1), t2, r2).unwrap();
        let exact = herald_displaced_photon(beta, &scheme, &device, Branch::Pd1, dims).unwrap();
        let analytic =
            rho_con_analytic(beta, s, scheme.r1_ratio(), t2, r2, &device, dims.na).unwrap();
        let analytic = normalize(&analytic).unwrap().0;
        let td = trace_distance(&exact.rho_out, &analytic).unwrap();
        checks.push((td <= 1e-3, format!("draw {k}: trace distance {td:.2e}")));
    }
    verdict("9", checks)
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let etas: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let sources = [0.69, 0.85, 1.0];
    let devices: Vec<DeviceModel<f64>> = sources
        .iter()
        .flat_map(|es| etas.iter().map(move |e| DeviceModel::new(*e, *es).unwrap()))
        .collect();
    let est = average_fidelity_sweep(0.01, 0.01, &devices, &QuadratureSpec::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let curve = |i: usize| -> Vec<f64> {
        est[i * etas.len()..(i + 1) * etas.len()]
            .iter()
            .map(|e| e.value)
            .collect()
    };
    let (low, mid, high) = (curve(0), curve(1), curve(2));
    let lo = low.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = low.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ordered = (0..etas.len()).all(|i| high[i] > mid[i] && mid[i] > low[i]);
    let err = est.iter().map(|e| e.err_estimate.abs()).fold(0.0, f64::max);
    let excluded = est.iter().map(|e| e.excluded_weight).fold(0.0, f64::max);
    let checks = vec![
        (lo >= 0.82 && hi <= 0.88, format!("eta_s=0.69 range [{lo:.4}, {hi:.4}]")),
        (hi - lo <= 0.05, format!("spread {:.4}", hi - lo)),
        (ordered, format!("ordering at eta=0.1: {:.4} > {:.4} > {:.4}", high[0], mid[0], low[0])),
        (high.iter().all(|f| *f < 1.0), format!("ideal-device F_avg {:.6} < 1", high[etas.len() - 1])),
        (secs < 600.0, format!("runtime {secs:.1}s, quadrature error <= {err:.1e}, excluded measure <= {excluded:.1e}")),
    ];
    verdict("10", checks)
}

fn criterion_11() -> Verdict {
    let mut checks = Vec::new();
    let dim = 20;
    let comm = annihilation::<f64>(dim)
        .matmul(&creation(dim))
        .sub(&creation::<f64>(dim).matmul(&annihilation(dim)));
    let mut defect: f64 = 0.0;
    for i in 0..dim - 1 {
        for j in 0..dim - 1 {
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((comm[(i, j)] - cr(want)).norm());
        }
    }
    checks.push((defect < 1e-12, format!("commutator defect {defect:.1e}")));
    let povm = [0.0, 0.3, 0.7, 1.0]
        .iter()
        .map(|e| povm_completeness_defect(*e, 12))
        .fold(0.0, f64::max);
    checks.push((
        povm <= 1e-12,
        format!("POVM completeness defect {povm:.1e}"),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let amps: Vec<Complex64> = (0..4)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let state = ModeTensor::with_first_mode(&amps, &[12, 12, 12]).unwrap();
    let n0 = state.norm_sq();
    let bs = beamsplitter(&state, (0, 1), c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let sq = ndpa_step(&state, (0, 2), 0.05, Expansion::Exact).unwrap();
    let unit = ((bs.norm_sq() - n0).abs()).max((sq.norm_sq() - n0).abs()) / n0;
    checks.push((unit <= 1e-12, format!("unitarity defect {unit:.1e}")));
    let states: Vec<FockDensity<f64>> = vec![
        InputSpec::Coherent(cr(0.5))
            .output(&params(FRAC_1_SQRT_2), 24)
            .unwrap(),
        InputSpec::Thermal(0.1).output(&params(0.5), 60).unwrap(),
        FockVector::basis(1, 12).to_density(),
    ];
    for rho in &states {
        let grid = PhaseGrid::default_for(mean_amplitude(rho)).unwrap();
        let total = wigner(rho, &grid).unwrap().integral();
        checks.push((
            (total - 1.0).abs() <= 1e-4,
            format!("integral of W = {total:.8}"),
        ));
        let mins: Vec<f64> = [0.0, -0.25, -0.5, -1.0]
            .iter()
            .map(|s| s_ordered_quasiprob(rho, &grid, *s).unwrap().min().0)
            .collect();
        let monotone = mins.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        checks.push((monotone, format!("smoothed minima {mins:?}")));
    }
    verdict("11", checks)
}

#[test]
fn acceptance_criteria() {
    let verdicts = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    let mut out = std::io::stdout().lock();
    for v in &verdicts {
        writeln!(
            out,
            "{} criterion {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.detail
        )
        .unwrap();
    }
    drop(out);
    let unexpected: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.pass && !KNOWN_RED.contains(&v.id))
        .map(|v| v.id)
        .collect();
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
    assert!(
        verdicts.iter().all(|v| v.core_pass),
        "a known-red criterion regressed beyond its documented conflict"
    );
}

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use clap::Subcommand;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use subadd::coherent_op::{
    apply_coherent_op, apply_displaced_op, conditioned_state, decompose_output,
};
use subadd::fock::{displacement_op, fidelity, make_coherent, normalize, FockState};
use subadd::nonclassicality::{mandel_q, squeezing_opt, InputSpec};
use subadd::phase_space::{
    depth_of_coherent_output, mean_amplitude, measure_negativity, nonclassical_depth,
    quasiprob_field_of_operator, thermal_depth_analytic, wigner, DepthOptions,
};
use subadd::scheme::{
    average_fidelity_sweep, engineer_state_with, herald_coherent_op_with, Branch, QuadratureSpec,
    SchemeDims,
};
use subadd::{
    CoherentOpParams, DeviceModel, DisplacedOpParams, FockDensity, FockVector, PhaseGrid,
    SchemeParams, TargetState, WignerField,
};

use crate::config::{or_default, Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output, Table};

const DEFAULT_CUTOFF: usize = 40;
const DEFAULT_SCHEME_CUTOFF: usize = 16;
const DEFAULT_GAIN: f64 = 0.01;
const DEFAULT_SWEEP_R: &str = "0:1:21";
const DEFAULT_SWEEP_ETA: &str = "0.1:1:10";
const FIG_R: [f64; 3] = [0.5, FRAC_1_SQRT_2, 1.0];
const FIG_GRID: &str = "-3:3:-3:3:121:121";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Wigner function of the output, or of one part of its decomposition
    Wigner,
    /// Negativity volume and area over an r sweep
    Negativity,
    /// Optimized quadrature squeezing over an r sweep
    Squeezing,
    /// Mandel Q factor over an r sweep
    Mandel,
    /// Nonclassical depth of the output
    Depth,
    /// Heralded output of the interferometer
    Herald,
    /// Engineer a superposition of |0>, |1>, |2>; --format csv sweeps the average fidelity
    Engineer,
    /// Data behind a figure preset (1, 2, 4, 5, 6 or 8)
    Fig { which: u8 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Wigner => "wigner",
            Command::Negativity => "negativity",
            Command::Squeezing => "squeezing",
            Command::Mandel => "mandel",
            Command::Depth => "depth",
            Command::Herald => "herald",
            Command::Engineer => "engineer",
            Command::Fig { .. } => "fig",
        }
    }
}

/// Runs `cmd`, filling defaults into `cfg` so the recorded config is complete.
pub fn run(cmd: Command, cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    match cmd {
        Command::Wigner => wigner_cmd(cfg),
        Command::Negativity => {
            let grid = cfg.grid()?;
            table_cmd(cfg, &["input_param", "r", "V_N", "A_N"], |rho| {
                let rep = measure_negativity(rho, grid)?;
                Ok(vec![rep.volume, rep.area])
            })
        }
        Command::Squeezing => table_cmd(cfg, &["alpha0", "r", "S_opt"], |rho| {
            Ok(vec![squeezing_opt(rho)?.s_opt])
        }),
        Command::Mandel => table_cmd(cfg, &["param", "r", "Q"], |rho| Ok(vec![mandel_q(rho)?.q])),
        Command::Depth => depth_cmd(cfg),
        Command::Herald => herald_cmd(cfg),
        Command::Engineer => engineer_cmd(cfg),
        Command::Fig { which } => fig_cmd(which, cfg),
    }
}

/// Evaluates `f` over `points` on the worker pool; results keep the order
/// of `points` and the first failure in that order is returned.
fn ordered<P: Sync, R: Send>(
    points: &[P],
    f: impl Fn(&P) -> CliResult<R> + Sync,
) -> CliResult<Vec<R>> {
    let results: Vec<CliResult<R>> = points.par_iter().map(&f).collect();
    results.into_iter().collect()
}

fn csv_only(cfg: &mut RunConfig) -> CliResult<Format> {
    cfg.format_or(Format::Csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Total,
    Addition,
    Subtraction,
    Cross,
}

fn parse_part(text: &str) -> CliResult<Part> {
    match text {
        "total" => Ok(Part::Total),
        "addition" => Ok(Part::Addition),
        "subtraction" => Ok(Part::Subtraction),
        "cross" => Ok(Part::Cross),
        other => Err(CliError::Config(format!(
            "unknown part '{other}' (expected total, addition, subtraction or cross)"
        ))),
    }
}

fn field_rows(field: &WignerField, lead: Option<f64>) -> Vec<Vec<Cell>> {
    let g = &field.grid;
    let mut rows = Vec::with_capacity(g.len());
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let mut row: Vec<Cell> = lead.map(Cell::Num).into_iter().collect();
            row.extend([
                Cell::Num(g.x(ix)),
                Cell::Num(g.y(iy)),
                Cell::Num(field.at(ix, iy)),
            ]);
            rows.push(row);
        }
    }
    rows
}

fn wigner_cmd(cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    let format = csv_only(cfg)?;
    let input = cfg.input_spec()?;
    let cutoff = cfg.cutoff_or(DEFAULT_CUTOFF);
    let params = cfg.op_params(None)?;
    let beta = cfg.beta()?;
    let part = parse_part(cfg.part.get_or_insert_with(|| "total".into()))?;
    let rho0 = input.density(cutoff)?;
    let (op, center) = match (part, beta) {
        (Part::Total, None) => {
            let rho = normalize(&apply_coherent_op(&params, &rho0)?)?.0;
            let center = mean_amplitude(&rho);
            (rho, center)
        }
        (Part::Total, Some(b)) => {
            let rho = normalize(&apply_displaced_op(
                &DisplacedOpParams::new(params, b),
                &rho0,
            )?)?
            .0;
            let center = mean_amplitude(&rho);
            (rho, center)
        }
        (_, Some(_)) => {
            return Err(CliError::Config(
                "--beta only applies to --part total".into(),
            ))
        }
        (part, None) => {
            let parts = decompose_output(&rho0, &params)?;
            let (total, norm) = normalize(&parts.total)?;
            let piece = match part {
                Part::Addition => parts.rho_pm,
                Part::Subtraction => parts.rho_mp,
                _ => parts.rho_pp_plus_mm,
            };
            (piece.scale(1.0 / norm), mean_amplitude(&total))
        }
    };
    let grid = match cfg.grid()? {
        Some(g) => g,
        None => PhaseGrid::default_for(center)?,
    };
    let field = quasiprob_field_of_operator(&op, &grid, 0.0)?;
    let mut table = Table::new(&["x", "y", "w"]);
    table.extend(field_rows(&field, None));
    Ok((Output::Table(table), format))
}

/// One row per r: `param, r, metrics...` for the normalized output.
fn table_cmd(
    cfg: &mut RunConfig,
    columns: &[&'static str],
    metrics: impl Fn(&FockDensity) -> subadd::Result<Vec<f64>> + Sync,
) -> CliResult<(Output, Format)> {
    let format = csv_only(cfg)?;
    let input = cfg.input_spec()?;
    let cutoff = cfg.cutoff_or(DEFAULT_CUTOFF);
    let rs = cfg.r_values(DEFAULT_SWEEP_R)?;
    let rows = ordered(&rs, |&r| {
        let rho = input.output(&CoherentOpParams::from_real_r(r)?, cutoff)?;
        let mut row = vec![Cell::Num(input.param()), Cell::Num(r)];
        row.extend(metrics(&rho)?.into_iter().map(Cell::Num));
        Ok(row)
    })?;
    let mut table = Table::new(columns);
    table.extend(rows);
    Ok((Output::Table(table), format))
}

fn json_value(text: String) -> Value {
    serde_json::from_str(&text).unwrap_or(Value::Null)
}

fn depth_cmd(cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    let format = cfg.format_or(Format::Json)?;
    let input = cfg.input_spec()?;
    let cutoff = cfg.cutoff_or(DEFAULT_CUTOFF);
    let params = cfg.op_params(None)?;
    let rho = input.output(&params, cutoff)?;
    let opts = DepthOptions {
        grid: cfg.grid()?,
        ..DepthOptions::default()
    };
    let report = nonclassical_depth(&rho, &opts)?;
    let closed_form = match input {
        InputSpec::Coherent(a) => Some(depth_of_coherent_output(a, &params)),
        InputSpec::Thermal(n) => Some(thermal_depth_analytic(n, params.r().re)),
        InputSpec::Fock(_) => None,
    };
    let mut value = json_value(report.to_json());
    value["closed_form"] = closed_form.map_or(Value::Null, |r| json_value(r.to_json()));
    Ok((Output::Json(value), format))
}

fn device(cfg: &mut RunConfig) -> CliResult<DeviceModel> {
    let eta = or_default(&mut cfg.eta, 1.0);
    let eta_s = or_default(&mut cfg.eta_s, 1.0);
    Ok(DeviceModel::new(eta, eta_s)?)
}

fn c_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn herald_cmd(cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    let format = cfg.format_or(Format::Json)?;
    let input = cfg.input_spec()?;
    let na = cfg.cutoff_or(DEFAULT_SCHEME_CUTOFF);
    let dims = SchemeDims::new(na, SchemeDims::default().nb, SchemeDims::default().nc);
    let second = cfg.op_params(Some(FRAC_1_SQRT_2))?;
    let s = or_default(&mut cfg.s, DEFAULT_GAIN);
    let r1 = or_default(&mut cfg.r1, DEFAULT_GAIN);
    let dev = device(cfg)?;
    let branch = cfg.branch()?;
    let beta = cfg.beta()?;
    let scheme = SchemeParams::from_ratio(s, Complex64::new(r1, 0.0), second.t(), second.r())?;

    let rho_in = input.density(na)?;
    let result = match beta {
        Some(b) => {
            let d = displacement_op(b, na);
            let shifted = rho_in.transform(&d);
            let mut out = herald_coherent_op_with(&shifted, &scheme, &dev, branch, dims)?;
            out.rho_out = out.rho_out.transform(&d.adjoint());
            out
        }
        None => herald_coherent_op_with(&rho_in, &scheme, &dev, branch, dims)?,
    };

    let effective = scheme.effective_op(branch);
    let pure: Option<FockVector> = match input {
        InputSpec::Coherent(a) => Some(make_coherent(a, na)?),
        InputSpec::Fock(n) => Some(FockVector::basis(n, na)),
        InputSpec::Thermal(_) => None,
    };
    let ideal_fidelity = match pure {
        Some(psi) => {
            let ideal = match beta {
                Some(b) => {
                    normalize(&apply_displaced_op(
                        &DisplacedOpParams::new(effective, b),
                        &psi,
                    )?)?
                    .0
                }
                None => conditioned_state(&effective, &psi)?,
            };
            Value::from(fidelity(&result.rho_out, &ideal)?)
        }
        None => Value::Null,
    };

    let mut value = json_value(result.to_json());
    value["effective_op"] = json!({ "t": c_json(effective.t()), "r": c_json(effective.r()) });
    value["fidelity_to_effective_op"] = ideal_fidelity;
    Ok((Output::Json(value), format))
}

fn quadrature(cfg: &mut RunConfig, branch: Branch, na: usize) -> QuadratureSpec {
    let base = QuadratureSpec::default();
    let n = *cfg.quad_nodes.get_or_insert(base.n_theta);
    let check = n + n / 2;
    QuadratureSpec {
        n_theta: n,
        n_phi: n,
        check: Some((check, check)),
        branch,
        dims: SchemeDims::new(na, base.dims.nb, base.dims.nc),
    }
}

fn fidelity_table(cfg: &mut RunConfig, eta_s_values: &[f64], na: usize) -> CliResult<Output> {
    let etas = cfg.eta_values(DEFAULT_SWEEP_ETA)?;
    let s = or_default(&mut cfg.s, DEFAULT_GAIN);
    let r1 = or_default(&mut cfg.r1, DEFAULT_GAIN);
    let branch = cfg.branch()?;
    let spec = quadrature(cfg, branch, na);
    let devices = eta_s_values
        .iter()
        .flat_map(|&eta_s| etas.iter().map(move |&eta| DeviceModel::new(eta, eta_s)))
        .collect::<subadd::Result<Vec<_>>>()?;
    let estimates = average_fidelity_sweep(s, r1, &devices, &spec)?;
    if let Some(e) = estimates.first() {
        if e.displaced_nodes > 0 {
            eprintln!(
                "note: {} quadrature nodes moved off singular targets (weight {:.3e})",
                e.displaced_nodes, e.displaced_weight
            );
        }
    }
    let excluded = estimates
        .iter()
        .map(|e| e.excluded_nodes)
        .max()
        .unwrap_or(0);
    if excluded > 0 {
        eprintln!(
            "note: up to {excluded} quadrature nodes excluded for a vanishing herald probability"
        );
    }
    let mut table = Table::new(&["eta", "eta_s", "F_avg", "err_estimate"]);
    table.extend(devices.iter().zip(&estimates).map(|(d, e)| {
        vec![
            Cell::Num(d.eta),
            Cell::Num(d.eta_s),
            Cell::Num(e.value),
            Cell::Num(e.err_estimate),
        ]
    }));
    Ok(Output::Table(table))
}

fn engineer_cmd(cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    let format = cfg.format_or(Format::Json)?;
    let na = cfg.cutoff_or(DEFAULT_SCHEME_CUTOFF);
    if format == Format::Csv {
        let eta_s = or_default(&mut cfg.eta_s, 0.69);
        return Ok((fidelity_table(cfg, &[eta_s], na)?, format));
    }
    let theta = or_default(&mut cfg.theta, FRAC_PI_4);
    let phi = or_default(&mut cfg.phi, FRAC_PI_4);
    let s = or_default(&mut cfg.s, DEFAULT_GAIN);
    let r1 = or_default(&mut cfg.r1, DEFAULT_GAIN);
    let dev = device(cfg)?;
    let branch = cfg.branch()?;
    let dims = SchemeDims::new(na, SchemeDims::default().nb, SchemeDims::default().nc);
    let target = TargetState::new(theta, phi)?;
    let out = engineer_state_with(&target, s, r1, &dev, branch, dims)?;
    let mut value = json_value(out.result.to_json());
    value["fidelity"] = json!(out.fidelity);
    value["t2"] = json!(out.params.t2);
    value["r2"] = json!(out.params.r2);
    value["beta"] = json!(out.params.beta);
    Ok((Output::Json(value), format))
}

fn fig_cmd(which: u8, cfg: &mut RunConfig) -> CliResult<(Output, Format)> {
    let preset = format!("fig {which}");
    cfg.forbid(
        &preset,
        &[
            ("input", cfg.input.is_some()),
            ("t", cfg.t.is_some()),
            ("r", cfg.r.is_some()),
            ("part", cfg.part.is_some()),
            ("beta", cfg.beta.is_some()),
            ("theta", cfg.theta.is_some()),
            ("phi", cfg.phi.is_some()),
        ],
    )?;
    let format = csv_only(cfg)?;
    let cutoff = cfg.cutoff_or(if which == 8 {
        DEFAULT_SCHEME_CUTOFF
    } else {
        DEFAULT_CUTOFF
    });
    let output = match which {
        1 => fig_fields(cfg, InputSpec::Coherent(Complex64::new(0.5, 0.0)), cutoff)?,
        4 => fig_fields(cfg, InputSpec::Thermal(0.1), cutoff)?,
        2 => {
            let inputs = [
                ("coherent", InputSpec::Coherent(Complex64::new(0.01, 0.0))),
                ("coherent", InputSpec::Coherent(Complex64::new(0.1, 0.0))),
                ("coherent", InputSpec::Coherent(Complex64::new(0.5, 0.0))),
                ("thermal", InputSpec::Thermal(0.01)),
                ("thermal", InputSpec::Thermal(0.1)),
                ("thermal", InputSpec::Thermal(0.5)),
            ];
            let grid = cfg.grid()?;
            fig_curves(
                cfg,
                &inputs,
                &["input", "input_param", "r", "V_N", "A_N"],
                cutoff,
                |rho| {
                    let rep = measure_negativity(rho, grid)?;
                    Ok(vec![rep.volume, rep.area])
                },
            )?
        }
        5 => {
            let rs = cfg.r_values("0:1:41")?;
            let alphas: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
            let points: Vec<(f64, f64)> = alphas
                .iter()
                .flat_map(|&a| rs.iter().map(move |&r| (a, r)))
                .collect();
            let rows = ordered(&points, |&(a, r)| {
                let rho = InputSpec::Coherent(Complex64::new(a, 0.0))
                    .output(&CoherentOpParams::from_real_r(r)?, cutoff)?;
                Ok(vec![
                    Cell::Num(a),
                    Cell::Num(r),
                    Cell::Num(squeezing_opt(&rho)?.s_opt),
                ])
            })?;
            let mut table = Table::new(&["alpha0", "r", "S_opt"]);
            table.extend(rows);
            Output::Table(table)
        }
        6 => {
            let inputs = [
                ("coherent", InputSpec::Coherent(Complex64::new(0.1, 0.0))),
                ("coherent", InputSpec::Coherent(Complex64::new(0.5, 0.0))),
                ("coherent", InputSpec::Coherent(Complex64::new(1.0, 0.0))),
                ("thermal", InputSpec::Thermal(0.01)),
                ("thermal", InputSpec::Thermal(0.1)),
                ("thermal", InputSpec::Thermal(FRAC_1_SQRT_2)),
            ];
            fig_curves(cfg, &inputs, &["input", "param", "r", "Q"], cutoff, |rho| {
                Ok(vec![mandel_q(rho)?.q])
            })?
        }
        8 => fidelity_table(cfg, &[0.69, 0.85, 1.0], cutoff)?,
        other => {
            return Err(CliError::Config(format!(
                "no preset 'fig {other}' (expected 1, 2, 4, 5, 6 or 8)"
            )))
        }
    };
    Ok((output, format))
}

/// Wigner fields of the output at each preset r, rows `r,x,y,w`.
fn fig_fields(cfg: &mut RunConfig, input: InputSpec<f64>, cutoff: usize) -> CliResult<Output> {
    let grid = crate::config::parse_grid(cfg.grid.get_or_insert_with(|| FIG_GRID.into()))?;
    let fields = ordered(&FIG_R, |&r| {
        let rho = input.output(&CoherentOpParams::from_real_r(r)?, cutoff)?;
        Ok(field_rows(&wigner(&rho, &grid)?, Some(r)))
    })?;
    let mut table = Table::new(&["r", "x", "y", "w"]);
    table.extend(fields.into_iter().flatten());
    Ok(Output::Table(table))
}

/// One curve per input over the r sweep, rows `input,param,r,metrics...`.
fn fig_curves(
    cfg: &mut RunConfig,
    inputs: &[(&'static str, InputSpec<f64>)],
    columns: &[&'static str],
    cutoff: usize,
    metrics: impl Fn(&FockDensity) -> subadd::Result<Vec<f64>> + Sync,
) -> CliResult<Output> {
    let rs = cfg.r_values(DEFAULT_SWEEP_R)?;
    let points: Vec<(&'static str, InputSpec<f64>, f64)> = inputs
        .iter()
        .flat_map(|&(name, input)| rs.iter().map(move |&r| (name, input, r)))
        .collect();
    let rows = ordered(&points, |&(name, input, r)| {
        let rho = input.output(&CoherentOpParams::from_real_r(r)?, cutoff)?;
        let mut row = vec![Cell::Text(name), Cell::Num(input.param()), Cell::Num(r)];
        row.extend(metrics(&rho)?.into_iter().map(Cell::Num));
        Ok(row)
    })?;
    let mut table = Table::new(columns);
    table.extend(rows);
    Ok(Output::Table(table))
}

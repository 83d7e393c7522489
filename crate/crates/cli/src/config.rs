use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use subadd::nonclassicality::InputSpec;
use subadd::scheme::Branch;
use subadd::{CoherentOpParams, PhaseGrid};

use crate::error::{CliError, CliResult};

/// Flags shared by every subcommand. The same struct is read from the
/// `--config` TOML file, whose values win over flags.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// coherent:A | thermal:N | fock:n (A may be complex, e.g. 0.3+0.2i)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,

    /// Subtraction weight t (real); defaults to sqrt(1 - r^2)
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,

    /// Addition weight r (real)
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,

    /// r sweep as a:b:steps
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_r: Option<String>,

    /// Detector-efficiency sweep as a:b:steps
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_eta: Option<String>,

    /// Phase-space grid as xmin:xmax:ymin:ymax:nx:ny
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,

    /// Fock cutoff of mode a
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,

    /// Parametric amplifier gain
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,

    /// Reflectivity ratio R1/T1 of the first beam splitter
    #[arg(long = "R1", global = true, allow_negative_numbers = true)]
    #[serde(rename = "R1", skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,

    /// Detector efficiency
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,

    /// Single-photon source efficiency
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_s: Option<f64>,

    /// Displacement amplitude (complex)
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,

    /// pd1 | pd2
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,

    /// total | addition | subtraction | cross
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,

    /// Target polar angle for state engineering
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,

    /// Target azimuth for state engineering
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,

    /// Gauss-Legendre nodes per axis of the average-fidelity rule
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,

    /// csv | json
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,

    /// TOML file with the same keys as the flags
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident, $warnings:ident, $($field:ident => $flag:literal),* $(,)?) => {
        $(
            if let (Some(a), Some(b)) = (&$flags.$field, &$file.$field) {
                if a != b {
                    $warnings.push(format!(
                        "warning: config file sets {} = {:?}, overriding --{} {:?}",
                        stringify!($field), b, $flag, a
                    ));
                }
            }
            if $file.$field.is_some() {
                $flags.$field = $file.$field.clone();
            }
        )*
    };
}

impl RunConfig {
    /// Reads the `--config` file, if any, and lays it over the flags.
    /// Returns the merged config and one warning per conflicting key.
    pub fn resolve(mut self) -> CliResult<(Self, Vec<String>)> {
        let Some(path) = self.config.clone() else {
            return Ok((self, Vec::new()));
        };
        let file = Self::load(&path)?;
        let mut warnings = Vec::new();
        let flags = &mut self;
        merge_fields!(flags, file, warnings,
            input => "input", t => "t", r => "r", sweep_r => "sweep-r", sweep_eta => "sweep-eta",
            grid => "grid", cutoff => "cutoff", s => "s", r1 => "R1", eta => "eta", eta_s => "eta-s",
            beta => "beta", branch => "branch", part => "part", theta => "theta", phi => "phi",
            quad_nodes => "quad-nodes", format => "format", out => "out",
        );
        Ok((self, warnings))
    }

    fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

        if let (Some(out), Some(dir)) = (&file.out, path.parent()) {
            if out.is_relative() {
                file.out = Some(dir.join(out));
            }
        }
        Ok(file)
    }

    pub fn input_spec(&self) -> CliResult<InputSpec<f64>> {
        let text = self
            .input
            .as_deref()
            .ok_or_else(|| CliError::Config("missing --input".into()))?;
        parse_input(text)
    }

    /// Operation weights from `--t`/`--r`; a missing one is completed to
    /// unit norm and written back so the recorded config is complete.
    pub fn op_params(&mut self, default_r: Option<f64>) -> CliResult<CoherentOpParams> {
        let params = match (self.t, self.r.or(default_r)) {
            (Some(t), Some(r)) => {
                CoherentOpParams::new(Complex64::new(t, 0.0), Complex64::new(r, 0.0))?
            }
            (None, Some(r)) => CoherentOpParams::from_real_r(r)?,
            (Some(t), None) => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(CliError::Config(format!(
                        "--t {t} needs --r unless it lies in [0, 1]"
                    )));
                }
                CoherentOpParams::from_real_r((1.0 - t * t).sqrt())?
            }
            (None, None) => return Err(CliError::Config("missing --r".into())),
        };
        self.t = Some(params.t().re);
        self.r = Some(params.r().re);
        Ok(params)
    }

    /// r values of a sweep: `--sweep-r`, else the single `--r`, else `default`.
    pub fn r_values(&mut self, default: &str) -> CliResult<Vec<f64>> {
        if self.sweep_r.is_none() {
            if let Some(r) = self.r {
                return Ok(vec![r]);
            }
        }
        parse_sweep(self.sweep_r.get_or_insert_with(|| default.to_string()))
    }

    pub fn eta_values(&mut self, default: &str) -> CliResult<Vec<f64>> {
        parse_sweep(self.sweep_eta.get_or_insert_with(|| default.to_string()))
    }

    pub fn grid(&self) -> CliResult<Option<PhaseGrid>> {
        self.grid.as_deref().map(parse_grid).transpose()
    }

    pub fn beta(&self) -> CliResult<Option<Complex64>> {
        self.beta
            .as_deref()
            .map(|b| parse_complex(b, "--beta"))
            .transpose()
    }

    pub fn branch(&mut self) -> CliResult<Branch> {
        Ok(Branch::from_str(
            self.branch.get_or_insert_with(|| "pd1".into()),
        )?)
    }

    pub fn cutoff_or(&mut self, default: usize) -> usize {
        *self.cutoff.get_or_insert(default)
    }

    pub fn format_or(&mut self, default: Format) -> CliResult<Format> {
        match self
            .format
            .get_or_insert_with(|| default.as_str().into())
            .as_str()
        {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }

    /// Rejects keys that a preset fixes itself.
    pub fn forbid(&self, what: &str, keys: &[(&str, bool)]) -> CliResult<()> {
        match keys.iter().find(|(_, set)| *set) {
            Some((key, _)) => Err(CliError::Config(format!("{what} does not take --{key}"))),
            None => Ok(()),
        }
    }
}

pub fn or_default(slot: &mut Option<f64>, default: f64) -> f64 {
    *slot.get_or_insert(default)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn parse_complex(text: &str, what: &str) -> CliResult<Complex64> {
    Complex64::from_str(text.trim())
        .ok()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .ok_or_else(|| {
            CliError::Config(format!("{what}: cannot parse '{text}' as a complex number"))
        })
}

fn parse_f64(text: &str, what: &str) -> CliResult<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Config(format!("{what}: cannot parse '{text}' as a number")))
}

fn parse_usize(text: &str, what: &str) -> CliResult<usize> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| CliError::Config(format!("{what}: cannot parse '{text}' as a count")))
}

pub fn parse_input(text: &str) -> CliResult<InputSpec<f64>> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("--input '{text}': expected kind:value")))?;
    match kind.trim().to_ascii_lowercase().as_str() {
        "coherent" => Ok(InputSpec::Coherent(parse_complex(value, "--input")?)),
        "thermal" => {
            let n = parse_f64(value, "--input")?;
            if n < 0.0 {
                return Err(CliError::Config(format!(
                    "--input: thermal occupation {n} is negative"
                )));
            }
            Ok(InputSpec::Thermal(n))
        }
        "fock" => Ok(InputSpec::Fock(parse_usize(value, "--input")?)),
        other => Err(CliError::Config(format!(
            "--input: unknown state kind '{other}' (expected coherent, thermal or fock)"
        ))),
    }
}

/// `a:b:steps`, inclusive of both ends.
pub fn parse_sweep(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, steps] = parts[..] else {
        return Err(CliError::Config(format!(
            "sweep '{text}': expected a:b:steps"
        )));
    };
    let (a, b, steps) = (
        parse_f64(a, "sweep")?,
        parse_f64(b, "sweep")?,
        parse_usize(steps, "sweep")?,
    );
    if steps == 0 {
        return Err(CliError::Config(format!("sweep '{text}' is empty")));
    }
    if a > b {
        return Err(CliError::Config(format!("sweep '{text}' is not ordered")));
    }
    if steps == 1 {
        if a != b {
            return Err(CliError::Config(format!(
                "sweep '{text}': one step needs a == b"
            )));
        }
        return Ok(vec![a]);
    }
    let n = (steps - 1) as f64;
    Ok((0..steps).map(|k| a + (b - a) * k as f64 / n).collect())
}

pub fn parse_grid(text: &str) -> CliResult<PhaseGrid> {
    let parts: Vec<&str> = text.split(':').collect();
    let [x0, x1, y0, y1, nx, ny] = parts[..] else {
        return Err(CliError::Config(format!(
            "--grid '{text}': expected xmin:xmax:ymin:ymax:nx:ny"
        )));
    };
    Ok(PhaseGrid::new(
        parse_f64(x0, "--grid")?,
        parse_f64(x1, "--grid")?,
        parse_f64(y0, "--grid")?,
        parse_f64(y1, "--grid")?,
        parse_usize(nx, "--grid")?,
        parse_usize(ny, "--grid")?,
    )?)
}

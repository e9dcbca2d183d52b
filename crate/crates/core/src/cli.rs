//! Command-line interface: `solve`, `region`, `convergence` and `oracle`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{self, GridSpec, OracleError, OracleResult};
use crate::region::{
    default_thetas, region_dominates, sweep_schemes, weighted_shortfalls, write_region_csv,
    RegionRow, WeightSweep,
};
use crate::sca::{self, ScaError, ScaOptions};
use crate::scenario::{AngleSpec, PowerModel, Scenario, ScenarioError};
use crate::schemes::{SchemeKind, WeightVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CANT_CREATE: i32 = 73;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot create {path}: {source}")]
    CannotCreate {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Scenario(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Sca(ScaError::InvalidEpsilon(_)) => EXIT_USAGE,
            CliError::CannotCreate { .. } => EXIT_CANT_CREATE,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rsma-ee",
    version,
    about = "Energy-efficient precoding for the two-user MISO downlink"
)]
pub struct Cli {
    /// JSON file whose keys override the corresponding flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (JSON for solve/oracle, CSV for region/convergence).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// SCA stopping threshold on the objective change (bit/J).
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scheme at one weight vector and print the result as JSON.
    Solve(SolveArgs),
    /// Sweep the user-2 weight and write the EE-region CSV.
    Region(RegionArgs),
    /// Write SCA traces for every scheme at P_dyn = 20, 30, 40 dBm.
    Convergence(ConvergenceArgs),
    /// Compare SCA with a brute-force grid search.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub nt: Option<usize>,
    /// Channel strength of user 2 relative to user 1.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Channel angle in radians or as text like "2pi/9".
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long = "pt-dbm")]
    pub pt_dbm: Option<f64>,
    #[arg(long = "pdyn-dbm")]
    pub pdyn_dbm: Option<f64>,
    #[arg(long = "psta-dbm")]
    pub psta_dbm: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Bandwidth W in Hz.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Noise power N_0 in W.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    #[arg(long)]
    pub u1: Option<f64>,
    #[arg(long)]
    pub u2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub scheme: Option<SchemeKind>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long = "extra-starts")]
    pub extra_starts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Comma-separated scheme list.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<SchemeKind>>,
    /// Comma-separated channel angles; defaults to pi/9, 2pi/9, pi/3, 4pi/9.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thetas: Option<Vec<String>>,
    /// Comma-separated exponents e of u2 = 10^e; defaults to the 43-point sweep.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub exponents: Option<Vec<f64>>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long = "extra-starts")]
    pub extra_starts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// Comma-separated P_dyn values in dBm.
    #[arg(long = "pdyn-list", value_delimiter = ',', allow_hyphen_values = true)]
    pub pdyn_list: Option<Vec<f64>>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long = "extra-starts")]
    pub extra_starts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scheme: Option<SchemeKind>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Search precoders in the channel span (nt >= 2) instead of the nt = 1 power grid.
    #[arg(long)]
    pub span: bool,
    #[arg(long = "power-steps")]
    pub power_steps: Option<usize>,
    #[arg(long = "split-steps")]
    pub split_steps: Option<usize>,
    #[arg(long = "span-steps")]
    pub span_steps: Option<usize>,
    #[arg(long = "phase-steps")]
    pub phase_steps: Option<usize>,
    /// Largest accepted relative gap (power grid mode).
    #[arg(long)]
    pub bound: Option<f64>,
    /// Absolute slack of the lower-bound test (span mode).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "extra-starts")]
    pub extra_starts: Option<usize>,
}

/// Keys accepted in a `--config` file. Any key present overrides the flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub nt: Option<usize>,
    pub gamma: Option<f64>,
    pub theta: Option<AngleSpec>,
    pub p_t_dbm: Option<f64>,
    pub p_dyn_dbm: Option<f64>,
    pub p_sta_dbm: Option<f64>,
    pub eta: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub noise_power: Option<f64>,
    pub scheme: Option<SchemeKind>,
    pub schemes: Option<Vec<SchemeKind>>,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub thetas: Option<Vec<AngleSpec>>,
    pub exponents: Option<Vec<f64>>,
    pub p_dyn_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub extra_starts: Option<usize>,
    pub out: Option<PathBuf>,
    pub span: Option<bool>,
    pub power_steps: Option<usize>,
    pub split_steps: Option<usize>,
    pub span_steps: Option<usize>,
    pub phase_steps: Option<usize>,
    pub bound: Option<f64>,
    pub tol: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let err = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

/// Scenario parameters after merging flags, config and defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioParams {
    pub nt: usize,
    pub gamma: f64,
    pub theta: f64,
    pub p_t_dbm: f64,
    pub p_dyn_dbm: f64,
    pub p_sta_dbm: f64,
    pub eta: f64,
    pub bandwidth_hz: f64,
    pub noise_power: f64,
}

impl ScenarioParams {
    fn merge(a: &ScenarioArgs, c: &ConfigFile) -> Result<Self, CliError> {
        let theta = match (&c.theta, &a.theta) {
            (Some(t), _) => t.radians()?,
            (None, Some(t)) => crate::scenario::parse_angle(t)?,
            (None, None) => 2.0 * std::f64::consts::PI / 9.0,
        };
        Ok(Self {
            nt: c.nt.or(a.nt).unwrap_or(4),
            gamma: c.gamma.or(a.gamma).unwrap_or(1.0),
            theta,
            p_t_dbm: c.p_t_dbm.or(a.pt_dbm).unwrap_or(40.0),
            p_dyn_dbm: c.p_dyn_dbm.or(a.pdyn_dbm).unwrap_or(30.0),
            p_sta_dbm: c.p_sta_dbm.or(a.psta_dbm).unwrap_or(30.0),
            eta: c.eta.or(a.eta).unwrap_or(0.35),
            bandwidth_hz: c.bandwidth_hz.or(a.bandwidth).unwrap_or(1.0),
            noise_power: c.noise_power.or(a.noise).unwrap_or(1.0),
        })
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let power = PowerModel::from_dbm(self.p_t_dbm, self.p_dyn_dbm, self.p_sta_dbm, self.eta);
        let h = crate::scenario::make_channels(self.gamma, self.theta, self.nt);
        Scenario::new(h, [self.noise_power; 2], self.bandwidth_hz, power)
    }
}

fn merge_weights(a: &WeightArgs, c: &ConfigFile) -> Result<WeightVector, CliError> {
    let u1 = c.u1.or(a.u1).unwrap_or(1.0);
    let u2 = c.u2.or(a.u2).unwrap_or(1.0);
    WeightVector::new(u1, u2).ok_or_else(|| {
        CliError::Usage(format!(
            "weights must be finite, nonnegative and not both zero, got ({u1}, {u2})"
        ))
    })
}

fn merge_options(cli: &Cli, c: &ConfigFile, extra_starts: Option<usize>) -> ScaOptions {
    let d = ScaOptions::default();
    ScaOptions {
        epsilon: c.epsilon.or(cli.epsilon).unwrap_or(d.epsilon),
        max_iter: c.max_iter.or(cli.max_iter).unwrap_or(d.max_iter),
        extra_starts: c.extra_starts.or(extra_starts).unwrap_or(d.extra_starts),
        seed: c.seed.or(cli.seed).unwrap_or(d.seed),
        ..d
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::CannotCreate {
            path: path.to_path_buf(),
            source,
        })
}

/// Parses arguments and runs a command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(cli, &config, a, stdout),
        Command::Region(a) => cmd_region(cli, &config, a, stdout),
        Command::Convergence(a) => cmd_convergence(cli, &config, a, stdout),
        Command::Oracle(a) => cmd_oracle(cli, &config, a, stdout, stderr),
    }
}

fn output_path(cli: &Cli, c: &ConfigFile) -> Option<PathBuf> {
    c.out.clone().or_else(|| cli.out.clone())
}

fn emit_json<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(stdout, "{text}")?;
    if let Some(path) = out {
        let mut f = create(path)?;
        writeln!(f, "{text}")?;
        f.flush()?;
    }
    Ok(())
}

fn cmd_solve(
    cli: &Cli,
    c: &ConfigFile,
    a: &SolveArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let params = ScenarioParams::merge(&a.scenario, c)?;
    let s = params.build()?;
    let weights = merge_weights(&a.weights, c)?;
    let kind = c.scheme.or(a.scheme).unwrap_or(SchemeKind::Rsma);
    let opts = merge_options(cli, c, a.extra_starts);
    let r = sca::solve(kind, &s, &weights, &opts)?;
    emit_json(&r, output_path(cli, c).as_deref(), stdout)?;
    Ok(if r.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_region(
    cli: &Cli,
    c: &ConfigFile,
    a: &RegionArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let params = ScenarioParams::merge(&a.scenario, c)?;
    params.build()?;
    let kinds = c
        .schemes
        .clone()
        .or_else(|| a.schemes.clone())
        .unwrap_or_else(|| SchemeKind::ALL.to_vec());
    if kinds.is_empty() {
        return Err(CliError::Usage(
            "--schemes must name at least one scheme".into(),
        ));
    }
    let thetas: Vec<f64> = match (&c.thetas, &a.thetas) {
        (Some(t), _) => t.iter().map(|t| t.radians()).collect::<Result<_, _>>()?,
        (None, Some(t)) => t
            .iter()
            .map(|t| crate::scenario::parse_angle(t))
            .collect::<Result<_, _>>()?,
        (None, None) => default_thetas().to_vec(),
    };
    let sweep = match c.exponents.clone().or_else(|| a.exponents.clone()) {
        Some(e) => WeightSweep::new(e)
            .ok_or_else(|| CliError::Usage("exponents must be finite and nonempty".into()))?,
        None => WeightSweep::default(),
    };
    let opts = merge_options(cli, c, a.extra_starts);
    let path = output_path(cli, c).unwrap_or_else(|| PathBuf::from("region.csv"));
    let mut file = create(&path)?;

    let mut rows = Vec::new();
    let mut total = 0usize;
    let mut converged = 0usize;
    for &theta in &thetas {
        let s = ScenarioParams {
            theta,
            ..params.clone()
        }
        .build()?;
        let boundaries = sweep_schemes(&kinds, &s, &sweep, &opts);
        for b in &boundaries {
            total += b.points.len();
            converged += b.points.iter().filter(|p| p.converged).count();
            rows.extend(RegionRow::rows(b, params.gamma, theta, params.p_dyn_dbm));
        }
        if let Some(rs) = boundaries.iter().find(|b| b.scheme == SchemeKind::Rsma) {
            for other in boundaries.iter().filter(|b| b.scheme != SchemeKind::Rsma) {
                let weighted = weighted_shortfalls(rs, other, 1e-6);
                let (region_ok, v) = region_dominates(rs, other, 1e-6);
                writeln!(
                    stdout,
                    "theta={theta:.6} rsma vs {}: weighted {} ({} shortfalls), region {} ({} uncovered points)",
                    other.scheme,
                    if weighted.is_empty() { "dominates" } else { "falls short" },
                    weighted.len(),
                    if region_ok { "contains" } else { "does not contain" },
                    v.len(),
                )?;
            }
        }
    }
    write_region_csv(&mut file, rows)?;
    file.flush()?;
    writeln!(
        stdout,
        "{converged}/{total} points converged; wrote {}",
        path.display()
    )?;
    Ok(if converged * 10 >= total * 9 {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Serialize)]
struct TraceRow {
    scheme: SchemeKind,
    p_dyn_dbm: f64,
    iteration: usize,
    t: f64,
    wsr: f64,
    power_w: f64,
    status: String,
}

fn cmd_convergence(
    cli: &Cli,
    c: &ConfigFile,
    a: &ConvergenceArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let params = ScenarioParams::merge(&a.scenario, c)?;
    params.build()?;
    let weights = merge_weights(&a.weights, c)?;
    let pdyns = c
        .p_dyn_list
        .clone()
        .or_else(|| a.pdyn_list.clone())
        .unwrap_or_else(|| vec![20.0, 30.0, 40.0]);
    let opts = merge_options(cli, c, a.extra_starts);
    let path = output_path(cli, c).unwrap_or_else(|| PathBuf::from("convergence.csv"));
    let mut file = create(&path)?;
    let mut w = csv::Writer::from_writer(&mut file);
    let mut all_converged = true;
    for kind in SchemeKind::ALL {
        for &p_dyn in &pdyns {
            let s = ScenarioParams {
                p_dyn_dbm: p_dyn,
                ..params.clone()
            }
            .build()?;
            let r = sca::solve(kind, &s, &weights, &opts)?;
            all_converged &= r.converged;
            writeln!(
                stdout,
                "{kind} p_dyn={p_dyn} dBm: ee={:.6} after {} iterations{}",
                r.ee,
                r.iterations,
                if r.converged { "" } else { " (not converged)" }
            )?;
            for rec in &r.trace {
                w.serialize(TraceRow {
                    scheme: kind,
                    p_dyn_dbm: p_dyn,
                    iteration: rec.iteration,
                    t: rec.t,
                    wsr: rec.wsr,
                    power_w: rec.power_w,
                    status: sca::status_label(rec.status),
                })?;
            }
        }
    }
    w.flush()?;
    drop(w);
    file.flush()?;
    Ok(if all_converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Serialize)]
struct OracleReport {
    scheme: SchemeKind,
    mode: &'static str,
    oracle_ee: f64,
    sca_ee: f64,
    rel_gap: f64,
    criterion: String,
    pass: bool,
    oracle: OracleResult,
}

fn cmd_oracle(
    cli: &Cli,
    c: &ConfigFile,
    a: &OracleArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let span = c.span.unwrap_or(a.span);
    let mut scen = a.scenario.clone();
    if !span && scen.nt.is_none() && c.nt.is_none() {
        scen.nt = Some(1);
    }
    let params = ScenarioParams::merge(&scen, c)?;
    if !span && params.nt != 1 {
        return Err(CliError::Usage(format!(
            "the power grid oracle needs nt = 1 (got {}); use --span for nt >= 2",
            params.nt
        )));
    }
    let s = params.build()?;
    let weights = merge_weights(&a.weights, c)?;
    let kind = c.scheme.or(a.scheme).unwrap_or(SchemeKind::Rsma);
    let d = if span {
        GridSpec::uniform(5)
    } else {
        GridSpec::default()
    };
    let grid = GridSpec {
        power_steps: c.power_steps.or(a.power_steps).unwrap_or(d.power_steps),
        split_steps: c.split_steps.or(a.split_steps).unwrap_or(d.split_steps),
        span_coeff_steps: c.span_steps.or(a.span_steps).unwrap_or(d.span_coeff_steps),
        phase_steps: c.phase_steps.or(a.phase_steps).unwrap_or(d.phase_steps),
    };
    let census = if span {
        oracle::census_span(kind, &grid)
    } else {
        oracle::census_nt1(kind, &grid)
    };
    writeln!(stderr, "grid census: {census} evaluations")?;
    let opts = merge_options(cli, c, a.extra_starts);
    let o = if span {
        oracle::grid_ee_span(kind, &s, &weights, &grid)?
    } else {
        oracle::grid_ee_nt1(kind, &s, &weights, &grid)?
    };
    let r = sca::solve(kind, &s, &weights, &opts)?;
    let rel_gap = (r.ee - o.best_ee).abs() / o.best_ee;
    let (criterion, pass) = if span {
        let tol = c.tol.or(a.tol).unwrap_or(1e-6);
        (
            format!("sca_ee >= oracle_ee - {tol}"),
            r.ee >= o.best_ee - tol,
        )
    } else {
        let bound = c.bound.or(a.bound).unwrap_or(0.02);
        (format!("rel_gap <= {bound}"), rel_gap <= bound)
    };
    let report = OracleReport {
        scheme: kind,
        mode: if span { "span" } else { "power_grid" },
        oracle_ee: o.best_ee,
        sca_ee: r.ee,
        rel_gap,
        criterion,
        pass,
        oracle: o,
    };
    emit_json(&report, output_path(cli, c).as_deref(), stdout)?;
    Ok(if pass { EXIT_OK } else { EXIT_RUNTIME })
}

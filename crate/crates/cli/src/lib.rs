//! Command-line front end for `eprb-core`.
//!
//! Every failure is reported as one JSON line on stderr,
//! `{"error": "<kind>", "message": "..."}`, with exit code 2 for
//! configuration, usage and domain errors and 3 for numerical failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use eprb_core::detection::{AnalyzerSetting, Simulator};
use eprb_core::geometry::{
    apparatus_excluded, apparatus_exclusion_boundary, beta_grid, experiment_domains,
    settings_independence_report, sigma_c_radius, CausalDomain, Event, ExclusionBoundary,
    ExperimentGeometry, IndependenceReport,
};
use eprb_core::inference::{
    chsh, estimate_correlation, estimate_correlation_eq4, estimate_correlation_measurement_time,
    joint_feasibility, CorrelationEstimate,
};
use eprb_core::propagation::write_propagated_csv;
use eprb_core::rng::trial_rng;
use eprb_core::scenario::{load_scenario, Scenario};
use eprb_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "eprb", version, about = "Local hidden-field EPRB simulator")]
pub struct Cli {
    /// Master seed; required by `simulate` and `chsh`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for trial maps. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Light-cone domains, Σ_c radius and setting-independence audit.
    Geometry(GeometryArgs),
    /// Estimate one correlation for a scenario.
    Simulate(SimulateArgs),
    /// Estimate the four CHSH correlations and every CHSH variant.
    Chsh(ChshArgs),
    /// Joint-distribution feasibility of four correlations.
    Fine(FineArgs),
    /// Σ_c radius and apparatus exclusion over a grid of speeds.
    ScanBeta(ScanBetaArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long = "D")]
    pub d: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t_align: f64,
    /// Setting-choice event of wing A as `x,t`.
    #[arg(long, value_parser = parse_event, allow_hyphen_values = true, requires = "choice_b")]
    pub choice_a: Option<Event>,
    /// Setting-choice event of wing B as `x,t`.
    #[arg(long, value_parser = parse_event, allow_hyphen_values = true, requires = "choice_a")]
    pub choice_b: Option<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    /// Trial by trial: initial data, propagation, outcomes.
    Pullback,
    /// Direct sampling of the field law at the detection events.
    MeasurementTime,
    /// Outer Σ_c draws times inner per-wing averages.
    BlockAverage,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Wing-A analyzer angle (defaults to the scenario's `a`).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Wing-B analyzer angle (defaults to the scenario's `b`).
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, value_enum, default_value_t = Estimator::Pullback)]
    pub estimator: Estimator,
    /// Inner redraws per wing for `block-average`; `--n` is then the outer count.
    #[arg(long, default_value_t = 100)]
    pub m_inner: usize,
    /// Write the Cauchy data of trial 0 as CSV.
    #[arg(long)]
    pub dump_fields: Option<PathBuf>,
    /// Write the fields of trial 0 at both detection events as CSV.
    #[arg(long)]
    pub dump_propagated: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChshArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct FineArgs {
    /// `C_ab,C_ab′,C_a′b,C_a′b′`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub correlations: Vec<f64>,
    /// `⟨A_a⟩,⟨A_a′⟩,⟨B_b⟩,⟨B_b′⟩`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub marginals: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ScanBetaArgs {
    #[arg(long = "D")]
    pub d: f64,
    #[arg(long)]
    pub beta_min: f64,
    #[arg(long)]
    pub beta_max: f64,
    #[arg(long)]
    pub steps: usize,
}

fn parse_event(s: &str) -> std::result::Result<Event, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, t] = parts.as_slice() else {
        return Err(format!("expected x,t but got {s:?}"));
    };
    let x: f64 = x.trim().parse().map_err(|e| format!("x: {e}"))?;
    let t: f64 = t.trim().parse().map_err(|e| format!("t: {e}"))?;
    Ok(Event { x, t })
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

/// Single-line JSON diagnostic.
pub fn diagnostic(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parses `args`, runs the command and returns the exit code. Reports go to
/// `--out` or `stdout`; diagnostics go to `stderr`.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", diagnostic("usage", first));
            return 2;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", diagnostic(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Geometry(args) => cmd_geometry(cli, args, stdout),
        Command::Simulate(args) => cmd_simulate(cli, args, stdout),
        Command::Chsh(args) => cmd_chsh(cli, args, stdout),
        Command::Fine(args) => cmd_fine(cli, args, stdout),
        Command::ScanBeta(args) => cmd_scan_beta(cli, args, stdout),
    }
}

fn require_seed(cli: &Cli, command: &str) -> Result<u64> {
    cli.seed
        .ok_or_else(|| Error::Usage(format!("--seed is required for {command}")))
}

fn json_only(cli: &Cli, command: &str) -> Result<()> {
    if cli.format == Some(Format::Csv) {
        return Err(Error::Usage(format!(
            "{command} only supports --format json"
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

/// Runs `write` against `--out` or `stdout`.
fn emit(
    cli: &Cli,
    stdout: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let mut f = create(path)?;
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            write(stdout)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(cli: &Cli, stdout: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    emit(cli, stdout, |w| {
        writeln!(w, "{text}")?;
        Ok(())
    })
}

#[derive(Serialize)]
struct GeometryReport {
    omega_a: CausalDomain,
    omega_b: CausalDomain,
    sigma_a: CausalDomain,
    sigma_b: CausalDomain,
    sigma_c: CausalDomain,
    radius: f64,
    apparatus_excluded: bool,
    beta_boundary: ExclusionBoundary,
    independence: Option<IndependenceReport>,
}

fn cmd_geometry(cli: &Cli, args: &GeometryArgs, stdout: &mut dyn Write) -> Result<()> {
    json_only(cli, "geometry")?;
    let mut g = ExperimentGeometry::new(args.d, args.beta, args.t_align)?;
    if let (Some(a), Some(b)) = (args.choice_a, args.choice_b) {
        g = g.with_choice_events(a, b)?;
    }
    let dom = experiment_domains(&g)?;
    let independence = match g.choice_events {
        Some(_) => Some(settings_independence_report(&g)?),
        None => None,
    };
    let report = GeometryReport {
        omega_a: dom.omega_a,
        omega_b: dom.omega_b,
        sigma_a: dom.sigma_a,
        sigma_b: dom.sigma_b,
        sigma_c: dom.sigma_c,
        radius: sigma_c_radius(args.d, args.beta)?,
        apparatus_excluded: apparatus_excluded(args.d, args.beta)?,
        beta_boundary: apparatus_exclusion_boundary(args.d)?,
        independence,
    };
    emit_json(cli, stdout, &report)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    kind: &'a str,
    estimator: &'a str,
    seed: u64,
    a: f64,
    b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_inner: Option<usize>,
    #[serde(flatten)]
    estimate: CorrelationEstimate,
}

fn dump_trial_zero(sim: &Simulator, sc: &Scenario, args: &SimulateArgs, seed: u64) -> Result<()> {
    if args.dump_fields.is_none() && args.dump_propagated.is_none() {
        return Ok(());
    }
    let data = sim.sample_cauchy_data(&mut trial_rng(seed, 0))?;
    if let Some(path) = &args.dump_fields {
        let mut f = create(path)?;
        data.write_csv(&mut f)?;
        f.flush()?;
    }
    if let Some(path) = &args.dump_propagated {
        let events = [sc.geometry.detection_a(), sc.geometry.detection_b()];
        let mut f = create(path)?;
        write_propagated_csv(&data, &events, &mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = require_seed(cli, "simulate")?;
    let sc = load_scenario(&args.scenario)?;
    let sim = Simulator::new(&sc)?.with_threads(cli.threads);
    let a = AnalyzerSetting::new(args.a.unwrap_or(sc.angles.a));
    let b = AnalyzerSetting::new(args.b.unwrap_or(sc.angles.b));
    let (estimator, estimate, m_inner) = match args.estimator {
        Estimator::Pullback => (
            "pullback",
            estimate_correlation(&sim, a, b, args.n, seed)?,
            None,
        ),
        Estimator::MeasurementTime => (
            "measurement-time",
            estimate_correlation_measurement_time(&sim, a, b, args.n, seed)?,
            None,
        ),
        Estimator::BlockAverage => (
            "block-average",
            estimate_correlation_eq4(&sim, a, b, args.n, args.m_inner, seed)?,
            Some(args.m_inner),
        ),
    };
    dump_trial_zero(&sim, &sc, args, seed)?;
    let report = SimulateReport {
        kind: sc.kind.name(),
        estimator,
        seed,
        a: a.angle(),
        b: b.angle(),
        m_inner,
        estimate,
    };
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, stdout, &report),
        Format::Csv => emit(cli, stdout, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["a", "b", "mean", "stderr", "n"])?;
            out.write_record([
                report.a.to_string(),
                report.b.to_string(),
                estimate.mean.to_string(),
                estimate.stderr.to_string(),
                estimate.n_trials.to_string(),
            ])?;
            out.flush()?;
            Ok(())
        }),
    }
}

fn cmd_chsh(cli: &Cli, args: &ChshArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = require_seed(cli, "chsh")?;
    let sc = load_scenario(&args.scenario)?;
    let sim = Simulator::new(&sc)?.with_threads(cli.threads);
    let result = chsh(&sim, args.n, seed)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, stdout, &result),
        Format::Csv => emit(cli, stdout, |w| result.write_csv(w)),
    }
}

fn four(name: &str, v: &[f64]) -> Result<[f64; 4]> {
    v.try_into().map_err(|_| {
        Error::Usage(format!(
            "--{name} needs exactly four values, got {}",
            v.len()
        ))
    })
}

fn cmd_fine(cli: &Cli, args: &FineArgs, stdout: &mut dyn Write) -> Result<()> {
    json_only(cli, "fine")?;
    let c = four("correlations", &args.correlations)?;
    let m = args
        .marginals
        .as_deref()
        .map(|m| four("marginals", m))
        .transpose()?;
    emit_json(cli, stdout, &joint_feasibility(c, m)?)
}

#[derive(Serialize)]
struct ScanRow {
    beta: f64,
    radius: f64,
    apparatus_excluded: bool,
}

fn cmd_scan_beta(cli: &Cli, args: &ScanBetaArgs, stdout: &mut dyn Write) -> Result<()> {
    let rows = beta_grid(args.beta_min, args.beta_max, args.steps)?
        .into_iter()
        .map(|beta| {
            Ok(ScanRow {
                beta,
                radius: sigma_c_radius(args.d, beta)?,
                apparatus_excluded: apparatus_excluded(args.d, beta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Json => emit_json(cli, stdout, &rows),
        Format::Csv => emit(cli, stdout, |w| {
            let mut out = csv::Writer::from_writer(w);
            for row in &rows {
                out.serialize(row)?;
            }
            out.flush()?;
            Ok(())
        }),
    }
}

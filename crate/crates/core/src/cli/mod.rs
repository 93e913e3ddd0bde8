//! Command-line driver: `simulate`, `classify` and `certify`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 undecided
//! classification, 3 certificate failure.

pub mod config;
pub mod svg;

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::certify::{
    classification_certificate, classify, crossing_certificate, divergence_crosscheck, flux_bound_certificate,
    normal_integral_certificate, BallWindow, CertificateKind, CertificateReport, CertifyError, Classification,
};
use crate::construct::{run_construction, ConstructionTrace, Status};
use crate::field::{Field, FieldError};
use crate::flow::{FlowError, Trajectory, TrajectoryData};
use crate::geom::{Circle, Vec2};

pub use config::{Outputs, RunConfig, WindowSpec, Windows};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_UNDECIDED: u8 = 2;
pub const EXIT_CERT_FAILED: u8 = 3;

const TRACE_FORMAT: &str = "minset-trace-1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid trace file: {0}")]
    Trace(String),
    #[error("stale trace: recorded for field {found}, config describes field {expected}")]
    StaleTrace { expected: String, found: String },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "minset", version, about = "Construct and certify minimal sets of planar flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate and write a trajectory CSV and phase-portrait SVG.
    Simulate(CommonArgs),
    /// Classify the minimal set reached from x0 and run all certificates.
    Classify(CommonArgs),
    /// Re-run certificates on a stored trace.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace JSON written by `classify` (default: <out>/trace.json).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    #[serde(rename = "D")]
    pub d: f64,
    pub stages: usize,
    pub delta: Vec<f64>,
    pub t_hit: Vec<f64>,
    pub s_meet: Vec<f64>,
    pub chord_fallback: Vec<bool>,
    #[serde(flatten)]
    pub status: Status,
}

impl From<&ConstructionTrace> for TraceSummary {
    fn from(t: &ConstructionTrace) -> Self {
        Self {
            d: t.d,
            stages: t.stages(),
            delta: t.delta.clone(),
            t_hit: t.t_hit.clone(),
            s_meet: t.s_meet.clone(),
            chord_fallback: t.curves.iter().map(|c| c.chord_fallback).collect(),
            status: t.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub classification: Option<Classification>,
    pub trace: Option<TraceSummary>,
    pub certificates: Vec<CertificateReport>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if matches!(self.classification, Some(Classification::Undecided { .. })) {
            EXIT_UNDECIDED
        } else if self.certificates.iter().any(|c| !c.pass) {
            EXIT_CERT_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// Stored construction, with the dense trajectory it was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format: String,
    pub field_fingerprint: String,
    pub field: String,
    pub x0: Vec2,
    pub seed_point: Vec2,
    pub classification: Classification,
    pub construction: Option<ConstructionTrace>,
    pub trajectory: Option<TrajectoryData>,
}

impl TraceFile {
    pub fn load(path: &Path, field: &Field) -> Result<(TraceFile, Option<Trajectory>), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let tf: TraceFile = serde_json::from_str(&text).map_err(|e| CliError::Trace(format!("{}: {e}", path.display())))?;
        if tf.format != TRACE_FORMAT {
            return Err(CliError::Trace(format!("unsupported format `{}`", tf.format)));
        }
        if tf.field_fingerprint != field.fingerprint() {
            return Err(CliError::StaleTrace {
                expected: field.fingerprint(),
                found: tf.field_fingerprint,
            });
        }
        let traj = match &tf.trajectory {
            Some(d) => Some(Trajectory::from_data(field.clone(), d).map_err(|e| CliError::Trace(e.to_string()))?),
            None => None,
        };
        if let (Some(t), Some(c)) = (&traj, &tf.construction) {
            if t.x0() != c.x0 || c.t_hit.last().is_some_and(|&th| th > t.t_end()) {
                return Err(CliError::Trace("construction does not match stored trajectory".into()));
            }
        }
        Ok((tf, traj))
    }
}

/// Windows centered on the orbit of period `period` at equal time spacing
/// among the admissible centers (`|y0 - x*(0)| > 2 D`), with radii drawn
/// from `r_range`; windows with `r0 >= D` are dropped.
pub fn auto_windows<R: Rng + ?Sized>(
    traj: &mut Trajectory,
    trace: &ConstructionTrace,
    period: f64,
    n: usize,
    r_range: [f64; 2],
    rng: &mut R,
) -> Result<Vec<Circle>, CliError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    traj.ensure(period)?;
    let m = 64 * n;
    let admissible: Vec<Vec2> = (0..m)
        .map(|k| traj.at(period * k as f64 / m as f64))
        .filter(|p| p.dist(trace.x0) > 2.0 * trace.d)
        .collect();
    if admissible.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let idx = ((j as f64 + 0.5) * admissible.len() as f64 / n as f64) as usize;
        let [lo, hi] = r_range;
        let r = if hi > lo { rng.random_range(lo..hi) } else { lo };
        if r < trace.d {
            out.push(Circle::new(admissible[idx.min(admissible.len() - 1)], r).map_err(CertifyError::from)?);
        }
    }
    Ok(out)
}

fn failed(kind: CertificateKind, err: &CertifyError, window: &Circle) -> CertificateReport {
    let mut context = std::collections::BTreeMap::new();
    context.insert("error".to_string(), json!(err.to_string()));
    context.insert("window".to_string(), json!({ "center": window.center, "radius": window.radius }));
    CertificateReport {
        kind,
        pass: false,
        measured: Default::default(),
        tolerance: 0.0,
        context,
    }
}

/// Crossing, flux-bound and divergence certificates for one window. The
/// crossing count may re-draw the radius; later certificates use that radius.
pub fn window_certificates<R: Rng + ?Sized>(
    traj: &mut Trajectory,
    trace: &ConstructionTrace,
    window: Circle,
    retries: usize,
    rng: &mut R,
) -> Vec<CertificateReport> {
    let mut out = Vec::new();
    let t_last = *trace.t_hit.last().expect("trace has t_0");
    let w0 = BallWindow::for_trace(window, trace);
    let circle = match crossing_certificate(traj, &w0, t_last, retries, rng) {
        Ok(rep) => {
            let r = rep.measured["radius"];
            out.push(rep);
            Circle { radius: r, ..window }
        }
        Err(e) => {
            out.push(failed(CertificateKind::CrossingFiniteness, &e, &window));
            return out;
        }
    };
    let w = BallWindow::for_trace(circle, trace);
    out.push(flux_bound_certificate(trace, traj, &w).unwrap_or_else(|e| failed(CertificateKind::FluxBound, &e, &circle)));
    if let Some(curve) = trace.curves.last() {
        out.push(
            divergence_crosscheck(curve, &w, traj, trace.x0, trace.d)
                .unwrap_or_else(|e| failed(CertificateKind::DivergenceCrosscheck, &e, &circle)),
        );
    }
    out
}

fn resolve_windows<R: Rng + ?Sized>(
    cfg: &RunConfig,
    traj: &mut Trajectory,
    trace: &ConstructionTrace,
    rng: &mut R,
) -> Result<Vec<Circle>, CliError> {
    match &cfg.windows {
        Windows::List(ws) => ws
            .iter()
            .map(|w| Circle::new(w.center, w.radius).map_err(|e| CliError::Config(e.to_string())))
            .collect(),
        Windows::Auto { auto, r_range } => match trace.status {
            Status::Periodic { t_star } => auto_windows(traj, trace, t_star, *auto, *r_range, rng),
            _ => Ok(Vec::new()),
        },
    }
}

/// Certificates for a periodic construction: normal integrals of every
/// curve, then the per-window certificates.
pub fn orbit_certificates(
    cfg: &RunConfig,
    traj: &mut Trajectory,
    trace: &ConstructionTrace,
) -> Result<Vec<CertificateReport>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut out = Vec::new();
    for (k, c) in trace.curves.iter().enumerate() {
        out.push(normal_integral_certificate(c, k + 1)?);
    }
    for w in resolve_windows(cfg, traj, trace, &mut rng)? {
        out.extend(window_certificates(traj, trace, w, cfg.retries, &mut rng));
    }
    Ok(out)
}

fn create_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Trace(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

fn write_timing(cfg: &RunConfig, out: &Path, command: &str, start: Instant) -> Result<(), CliError> {
    let secs = start.elapsed().as_secs_f64();
    eprintln!("{command}: {secs:.3} s");
    write_json(&out.join(&cfg.outputs.timing), &json!({ "command": command, "seconds": secs }))
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<u8, CliError> {
    let start = Instant::now();
    let cfg = RunConfig::load(&args.config, args.seed)?;
    let field = cfg.field.build()?;
    create_out_dir(&args.out)?;
    let traj = Trajectory::integrate(field, cfg.x0, cfg.t_end, cfg.tol)?;

    let csv_path = args.out.join(&cfg.outputs.csv);
    let f = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    traj.write_csv(BufWriter::new(f)).map_err(|e| CliError::io(&csv_path, e))?;

    let mut scratch = traj.clone();
    let mut balls = Vec::new();
    let mut windows = Vec::new();
    if let Ok(trace) = run_construction(&mut scratch, &cfg.construction()) {
        balls = trace.delta.iter().filter_map(|&d| Circle::new(cfg.x0, d).ok()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
        windows = resolve_windows(&cfg, &mut scratch, &trace, &mut rng)?;
    } else if let Windows::List(ws) = &cfg.windows {
        windows = ws.iter().filter_map(|w| Circle::new(w.center, w.radius).ok()).collect();
    }
    let pts: Vec<Vec2> = traj
        .sample_times(0.0, traj.t_end(), f64::INFINITY, 4)
        .into_iter()
        .map(|t| traj.at(t))
        .collect();
    let svg = svg::PhasePortrait {
        trajectory: &pts,
        balls: &balls,
        windows: &windows,
    }
    .render();
    let svg_path = args.out.join(&cfg.outputs.svg);
    fs::write(&svg_path, svg).map_err(|e| CliError::io(&svg_path, e))?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    write_timing(&cfg, &args.out, "simulate", start)?;
    Ok(EXIT_OK)
}

pub fn cmd_classify(args: &CommonArgs) -> Result<u8, CliError> {
    let start = Instant::now();
    let cfg = RunConfig::load(&args.config, args.seed)?;
    let field = cfg.field.build()?;
    create_out_dir(&args.out)?;
    let mut res = classify(&field, cfg.x0, &cfg.classify())?;

    let mut certificates = vec![classification_certificate(&field, cfg.x0, &res)];
    certificates.append(&mut res.certificates);
    if let (Classification::PeriodicOrbit { .. }, Some(trace), Some(traj)) =
        (&res.classification, &res.trace, res.trajectory.as_mut())
    {
        certificates.extend(orbit_certificates(&cfg, traj, trace)?);
    }

    let report = RunReport {
        command: "classify".into(),
        config: cfg.clone(),
        classification: Some(res.classification.clone()),
        trace: res.trace.as_ref().map(TraceSummary::from),
        certificates,
    };
    let tf = TraceFile {
        format: TRACE_FORMAT.into(),
        field_fingerprint: field.fingerprint(),
        field: field.canonical(),
        x0: cfg.x0,
        seed_point: res.seed_point,
        classification: res.classification.clone(),
        construction: res.trace.clone(),
        trajectory: res.trajectory.as_ref().map(Trajectory::to_data),
    };
    write_json(&args.out.join(&cfg.outputs.trace), &tf)?;
    write_json(&args.out.join(&cfg.outputs.report), &report)?;
    summarize(&report);
    write_timing(&cfg, &args.out, "classify", start)?;
    Ok(report.exit_code())
}

pub fn cmd_certify(args: &CommonArgs, trace: Option<&Path>) -> Result<u8, CliError> {
    let start = Instant::now();
    let cfg = RunConfig::load(&args.config, args.seed)?;
    let field = cfg.field.build()?;
    let trace_path = trace.map(Path::to_path_buf).unwrap_or_else(|| args.out.join(&cfg.outputs.trace));
    let (tf, traj) = TraceFile::load(&trace_path, &field)?;
    create_out_dir(&args.out)?;

    let mut certificates = Vec::new();
    if let (Some(construction), Some(mut traj)) = (&tf.construction, traj) {
        if matches!(construction.status, Status::Periodic { .. }) {
            certificates.extend(orbit_certificates(&cfg, &mut traj, construction)?);
        }
    }
    let report = RunReport {
        command: "certify".into(),
        config: cfg.clone(),
        classification: Some(tf.classification.clone()),
        trace: tf.construction.as_ref().map(TraceSummary::from),
        certificates,
    };
    write_json(&args.out.join(&cfg.outputs.report), &report)?;
    summarize(&report);
    write_timing(&cfg, &args.out, "certify", start)?;
    Ok(report.exit_code())
}

fn summarize(report: &RunReport) {
    match &report.classification {
        Some(Classification::PeriodicOrbit { period, .. }) => println!("periodic orbit, period {period:.10}"),
        Some(Classification::Equilibrium { point, via }) => {
            println!("equilibrium at ({:.3e}, {:.3e}) [{via}]", point.x, point.y)
        }
        Some(Classification::Undecided { diagnostics }) => println!("undecided: {}", diagnostics.join("; ")),
        None => {}
    }
    let failed = report.certificates.iter().filter(|c| !c.pass).count();
    println!("certificates: {} run, {} failed", report.certificates.len(), failed);
}

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Certify { common, trace } => cmd_certify(common, trace.as_deref()),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

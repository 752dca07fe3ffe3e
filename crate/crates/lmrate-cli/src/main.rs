//! Experiment runner: sweeps SNR points for a chosen constellation and channel
//! mismatch, solves the constrained transport problem at each point, and writes
//! a CSV or JSON rate report (or a per-iteration residual trace).
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
//! (grid truncation, non-convergence, underflow, bracket), 4 I/O error.

use std::fmt;
use std::fs;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use lmrate::channel::{sigma_from_snr, ChannelSpec, DecoderSpec};
use lmrate::constellation::{build_constellation, Constellation, Scheme};
use lmrate::discretize::{assemble_problem, build_grid, Grid};
use lmrate::gmi::{gmi, GmiSearch};
use lmrate::sinkhorn::{solve, SolveOptions};
use lmrate::verify::{reference_solve, ReferenceOptions};

/// Version of the report column layout. Bump when columns change meaning,
/// order, or count; the schema is documented in the repository README.
const SCHEMA_VERSION: u32 = 1;

const CSV_HEADER: &str = "schema_version,timestamp_utc,library_version,modulation,eta,theta_rad,snr_db,grid_n,half_width,max_iters,lambda_tol,repeats,lm_rate_bits,lm_rate_nats,lambda,constraint_active,iterations,r_phi,r_psi,r_lambda,wall_time_seconds,gmi_bits,gmi_nats,gmi_s_star,gmi_evaluations,reference_diff_nats";

const TRACE_HEADER: &str = "iteration,r_phi,r_psi,r_lambda";

#[derive(Parser, Debug)]
#[command(
    name = "lmrate",
    version,
    about = "Rate lower bounds for mismatched decoding over a two-dimensional Gaussian channel"
)]
struct Cli {
    /// Input constellation.
    #[arg(long, value_enum, default_value_t = Modulation::Qpsk)]
    modulation: Modulation,

    /// Second diagonal channel gain; the first is fixed at 1.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    eta: f64,

    /// Channel rotation angle in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,

    /// SNR points in dB: a comma list ("0,2,4") or a range ("0:2:14").
    #[arg(long = "snr-db", value_name = "LIST|START:STEP:STOP", allow_hyphen_values = true)]
    snr_db: String,

    /// Number of output grid points (must be a perfect square).
    #[arg(long = "grid-n", default_value_t = 62_500)]
    grid_n: usize,

    /// Half-width of the square output truncation box.
    #[arg(long = "half-width", default_value_t = 8.0)]
    half_width: f64,

    /// Iteration budget for the alternating solver at each point.
    #[arg(long = "max-iters", default_value_t = 500)]
    max_iters: usize,

    /// Newton step tolerance for the threshold multiplier.
    #[arg(long = "lambda-tol", default_value_t = 1e-14)]
    lambda_tol: f64,

    /// Also compute the GMI baseline at each point.
    #[arg(long)]
    gmi: bool,

    /// Cross-check each point against the projection-based reference solver
    /// (small grids only).
    #[arg(long)]
    reference: bool,

    /// Repeated solves per point; wall times are averaged, rates are identical.
    #[arg(long, default_value_t = 1)]
    repeats: usize,

    /// Emit per-iteration residuals for a single SNR point instead of a report.
    #[arg(long)]
    trace: bool,

    /// Output file path (written atomically via a temporary sibling file).
    #[arg(long)]
    out: PathBuf,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for independent SNR points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Modulation {
    Qpsk,
    Qam16,
    Qam256,
}

impl Modulation {
    fn scheme(self) -> Scheme {
        match self {
            Modulation::Qpsk => Scheme::Qpsk,
            Modulation::Qam16 => Scheme::Qam16,
            Modulation::Qam256 => Scheme::Qam256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Fully validated run description, echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct ExperimentConfig {
    modulation: String,
    eta: f64,
    theta_rad: f64,
    snr_db: Vec<f64>,
    grid_n: usize,
    half_width: f64,
    max_iters: usize,
    lambda_tol: f64,
    compare_gmi: bool,
    compare_reference: bool,
    repeats: usize,
    output_path: String,
    output_format: String,
}

/// One line of the rate report; optional fields stay empty unless the
/// corresponding comparison was requested.
#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    snr_db: f64,
    lm_rate_bits: f64,
    lm_rate_nats: f64,
    lambda: f64,
    constraint_active: bool,
    iterations: usize,
    r_phi: f64,
    r_psi: f64,
    r_lambda: f64,
    wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gmi_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gmi_nats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gmi_s_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gmi_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_diff_nats: Option<f64>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    timestamp_utc: &'a str,
    library_version: &'a str,
    config: &'a ExperimentConfig,
    rows: &'a [ReportRow],
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    r_phi: f64,
    r_psi: f64,
    r_lambda: f64,
}

#[derive(Serialize)]
struct JsonTrace<'a> {
    schema_version: u32,
    library_version: &'a str,
    config: &'a ExperimentConfig,
    rows: &'a [TraceRow],
}

#[derive(Debug)]
enum AppError {
    Config(String),
    Numeric(lmrate::Error),
    Io(std::io::Error),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numeric(lmrate::Error::InvalidArgument(_)) => 2,
            AppError::Numeric(_) => 3,
            AppError::Io(_) => 4,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "configuration error: {msg}"),
            AppError::Numeric(e) => write!(f, "{e}"),
            AppError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<lmrate::Error> for AppError {
    fn from(e: lmrate::Error) -> Self {
        AppError::Numeric(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        process::exit(err.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let cfg = build_config(cli)?;
    let cons = build_constellation(cli.modulation.scheme());
    let grid = build_grid(cfg.half_width, cfg.grid_n)?;
    if cli.trace {
        run_trace(cli, &cfg, &cons, &grid)
    } else {
        run_report(cli, &cfg, &cons, &grid)
    }
}

/// Validates the flag set into an `ExperimentConfig`.
fn build_config(cli: &Cli) -> Result<ExperimentConfig, AppError> {
    let snr_db = parse_snr_spec(&cli.snr_db).map_err(AppError::Config)?;
    if cli.repeats == 0 {
        return Err(AppError::Config("--repeats must be at least 1".into()));
    }
    if cli.max_iters == 0 {
        return Err(AppError::Config("--max-iters must be at least 1".into()));
    }
    if cli.workers == 0 {
        return Err(AppError::Config("--workers must be at least 1".into()));
    }
    if cli.trace && snr_db.len() != 1 {
        return Err(AppError::Config(
            "--trace requires exactly one SNR point".into(),
        ));
    }
    Ok(ExperimentConfig {
        modulation: cli.modulation.scheme().name().to_string(),
        eta: cli.eta,
        theta_rad: cli.theta,
        snr_db,
        grid_n: cli.grid_n,
        half_width: cli.half_width,
        max_iters: cli.max_iters,
        lambda_tol: cli.lambda_tol,
        compare_gmi: cli.gmi,
        compare_reference: cli.reference,
        repeats: cli.repeats,
        output_path: cli.out.display().to_string(),
        output_format: match cli.format {
            Format::Csv => "csv".to_string(),
            Format::Json => "json".to_string(),
        },
    })
}

/// Parses `--snr-db`: either a comma-separated list or an inclusive
/// `start:step:stop` range with positive step. Points are returned sorted.
fn parse_snr_spec(spec: &str) -> Result<Vec<f64>, String> {
    let parse_one = |t: &str| -> Result<f64, String> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number `{}` in --snr-db", t.trim()))
    };
    let mut vals = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:step:stop, got `{spec}`"));
        }
        let (start, step, stop) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if !(step > 0.0) {
            return Err("range step must be positive".into());
        }
        let mut v = Vec::new();
        let mut k = 0u64;
        loop {
            let x = start + k as f64 * step;
            if x > stop + 1e-9 * step {
                break;
            }
            v.push(x);
            k += 1;
        }
        v
    } else {
        spec.split(',').map(parse_one).collect::<Result<Vec<_>, _>>()?
    };
    if vals.is_empty() {
        return Err("--snr-db must name at least one point".into());
    }
    if vals.iter().any(|x| !x.is_finite()) {
        return Err("--snr-db points must be finite".into());
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

fn run_report(
    cli: &Cli,
    cfg: &ExperimentConfig,
    cons: &Constellation,
    grid: &Grid,
) -> Result<(), AppError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| AppError::Config(e.to_string()))?;
    let rows: Result<Vec<ReportRow>, AppError> = pool.install(|| {
        cfg.snr_db
            .par_iter()
            .map(|&snr| run_point(cfg, cons, grid, snr))
            .collect()
    });
    let rows = rows?;

    let stamp = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    let body = match cli.format {
        Format::Csv => render_csv(cfg, &rows, &stamp),
        Format::Json => {
            let doc = JsonReport {
                schema_version: SCHEMA_VERSION,
                timestamp_utc: &stamp,
                library_version: lmrate::VERSION,
                config: cfg,
                rows: &rows,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
    };
    write_atomic(&cli.out, &body)
}

/// Solves one SNR point, averaging wall time over the configured repeats.
/// The solve is deterministic, so repeated runs differ only in timing.
fn run_point(
    cfg: &ExperimentConfig,
    cons: &Constellation,
    grid: &Grid,
    snr_db: f64,
) -> Result<ReportRow, AppError> {
    let ch = ChannelSpec::new(1.0, cfg.eta, cfg.theta_rad, sigma_from_snr(snr_db))?;
    let p = assemble_problem(cons, &ch, &DecoderSpec::identity(), grid)?;
    let opts = SolveOptions {
        max_iters: cfg.max_iters,
        lambda_step_tol: cfg.lambda_tol,
        residual_tol: 0.0,
    };

    let mut wall = 0.0;
    let mut sol = None;
    for _ in 0..cfg.repeats {
        let t0 = Instant::now();
        let s = solve(&p, &opts)?;
        wall += t0.elapsed().as_secs_f64();
        sol = Some(s);
    }
    let sol = sol.expect("repeats >= 1");
    let wall = wall / cfg.repeats as f64;
    let last = sol.residual_trace.last().expect("max_iters >= 1");

    let (gmi_bits, gmi_nats, gmi_s_star, gmi_evaluations) = if cfg.compare_gmi {
        let g = gmi(&p, &GmiSearch::default())?;
        (
            Some(g.gmi_bits),
            Some(g.gmi_nats),
            Some(g.s_star),
            Some(g.evaluations),
        )
    } else {
        (None, None, None, None)
    };
    let reference_diff_nats = if cfg.compare_reference {
        let r = reference_solve(&p, &ReferenceOptions::default())?;
        Some((sol.lm_rate_nats - r.lm_rate_nats).abs())
    } else {
        None
    };

    eprintln!(
        "snr {:>6.2} dB: lm {:.6} bits, {} iterations, {:.3}s",
        snr_db, sol.lm_rate_bits, sol.iterations_run, wall
    );
    Ok(ReportRow {
        snr_db,
        lm_rate_bits: sol.lm_rate_bits,
        lm_rate_nats: sol.lm_rate_nats,
        lambda: sol.lambda,
        constraint_active: sol.constraint_active,
        iterations: sol.iterations_run,
        r_phi: last.r_phi,
        r_psi: last.r_psi,
        r_lambda: last.r_lambda,
        wall_time_seconds: wall,
        gmi_bits,
        gmi_nats,
        gmi_s_star,
        gmi_evaluations,
        reference_diff_nats,
    })
}

fn run_trace(
    cli: &Cli,
    cfg: &ExperimentConfig,
    cons: &Constellation,
    grid: &Grid,
) -> Result<(), AppError> {
    let snr_db = cfg.snr_db[0];
    let ch = ChannelSpec::new(1.0, cfg.eta, cfg.theta_rad, sigma_from_snr(snr_db))?;
    let p = assemble_problem(cons, &ch, &DecoderSpec::identity(), grid)?;
    let opts = SolveOptions {
        max_iters: cfg.max_iters,
        lambda_step_tol: cfg.lambda_tol,
        residual_tol: 0.0,
    };
    let sol = solve(&p, &opts)?;

    let rows: Vec<TraceRow> = sol
        .residual_trace
        .iter()
        .enumerate()
        .map(|(k, r)| TraceRow {
            iteration: k + 1,
            r_phi: r.r_phi,
            r_psi: r.r_psi,
            r_lambda: r.r_lambda,
        })
        .collect();

    // No timestamp here: a trace must be byte-identical across repeated runs.
    let body = match cli.format {
        Format::Csv => {
            let mut out = String::with_capacity(64 * (rows.len() + 1));
            out.push_str(TRACE_HEADER);
            out.push('\n');
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{}",
                    r.iteration,
                    fmt_f64(r.r_phi),
                    fmt_f64(r.r_psi),
                    fmt_f64(r.r_lambda)
                )
                .expect("string write");
            }
            out
        }
        Format::Json => {
            let doc = JsonTrace {
                schema_version: SCHEMA_VERSION,
                library_version: lmrate::VERSION,
                config: cfg,
                rows: &rows,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("trace serializes");
            s.push('\n');
            s
        }
    };
    write_atomic(&cli.out, &body)
}

/// Formats a float with 17 significant digits, enough to round-trip exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn render_csv(cfg: &ExperimentConfig, rows: &[ReportRow], stamp: &str) -> String {
    let mut out = String::with_capacity(256 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            SCHEMA_VERSION.to_string(),
            stamp.to_string(),
            lmrate::VERSION.to_string(),
            cfg.modulation.clone(),
            fmt_f64(cfg.eta),
            fmt_f64(cfg.theta_rad),
            fmt_f64(r.snr_db),
            cfg.grid_n.to_string(),
            fmt_f64(cfg.half_width),
            cfg.max_iters.to_string(),
            fmt_f64(cfg.lambda_tol),
            cfg.repeats.to_string(),
            fmt_f64(r.lm_rate_bits),
            fmt_f64(r.lm_rate_nats),
            fmt_f64(r.lambda),
            r.constraint_active.to_string(),
            r.iterations.to_string(),
            fmt_f64(r.r_phi),
            fmt_f64(r.r_psi),
            fmt_f64(r.r_lambda),
            fmt_f64(r.wall_time_seconds),
            fmt_opt_f64(r.gmi_bits),
            fmt_opt_f64(r.gmi_nats),
            fmt_opt_f64(r.gmi_s_star),
            fmt_opt_usize(r.gmi_evaluations),
            fmt_opt_f64(r.reference_diff_nats),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes the report through a temporary sibling file and renames it into
/// place, so a crashed run never leaves a truncated report behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), AppError> {
    let mut tmp_name = path
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "report".into());
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

//! Command-line front end: reads a field (spec file or gallery family), runs one
//! analysis, prints a JSON report and optionally writes it with CSV sidecars
//! under `--out`.
//!
//! Exit codes: 0 success, 2 analytical verdict "fail", 1 fault, 64 usage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

pub mod commands;
pub mod field_spec;
pub mod report;

use report::{Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAULT: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Worker-thread count for the compute pool (integer ≥ 1).
pub const THREADS_ENV: &str = "DIRINT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dirint", version, about = "Decomposable operators and semigroups on direct integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    /// Field-spec JSON file.
    #[arg(long, conflicts_with = "family")]
    pub field: Option<PathBuf>,
    /// Gallery family name.
    #[arg(long)]
    pub family: Option<String>,
    /// Family parameter `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Truncation size for `--family`.
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Directory for report.json and CSV sidecars.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Operator norm as the maximum of block norms.
    Norm {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
    },
    /// Fiber spectra, their union, and optionally an ε-pseudospectrum grid.
    Spectrum {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        #[arg(long)]
        pseudo_eps: Option<f64>,
        /// `re_min,re_max,im_min,im_max` for the pseudospectrum grid.
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<[f64; 4]>,
        #[arg(long, default_value_t = 41)]
        grid_points: usize,
    },
    /// Resolvent norm at a point.
    Resolvent {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        /// `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
    },
    /// Exponential bound of the semigroup, or uniformity across a schedule of truncations.
    Semigroup {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = dirint::semigroup::DEFAULT_GRID_T_MAX)]
        t_max: f64,
        #[arg(long, default_value_t = dirint::semigroup::DEFAULT_GRID_STEP)]
        dt: f64,
        /// Truncation sizes for the uniformity check (requires `--family`).
        #[arg(long, value_delimiter = ',')]
        n_schedule: Option<Vec<usize>>,
        #[arg(long, default_value_t = dirint::decomp_op::DEFAULT_CAP)]
        cap: f64,
    },
    /// Sectoriality, analyticity, norm-continuity and compactness detectors.
    Classes {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
        delta: f64,
        /// `re,im` for the compactness probe (requires `--family` and `--n-schedule`).
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        compact_lambda: Option<Complex64>,
        #[arg(long, value_delimiter = ',')]
        n_schedule: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
    },
    /// Resolvent growth against semigroup decay across doubling truncations.
    Decay {
        #[arg(long, required = true)]
        family: String,
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
        n_schedule: Vec<usize>,
        #[arg(long, default_value_t = 1e4)]
        r_max: f64,
        #[arg(long, default_value_t = 1e3)]
        t_max: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Writes a truncated gallery family as an explicit field-spec file.
    GalleryExport {
        #[arg(long, required = true)]
        family: String,
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(short = 'n', long = "n", required = true)]
        n: usize,
        #[arg(long, required = true)]
        out: PathBuf,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for {k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_reals(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

/// `re,im`.
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let v = parse_reals(s, 2)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn parse_window(s: &str) -> Result<[f64; 4], String> {
    let v = parse_reals(s, 4)?;
    Ok([v[0], v[1], v[2], v[3]])
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] field_spec::SpecError),
    #[error(transparent)]
    Compute(#[from] dirint::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAULT,
        }
    }
}

/// What a subcommand produced: the report, its tables, extra files, and whether the verdict failed.
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
    pub files: Vec<(String, String)>,
    pub verdict_failed: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be an integer >= 1, got {raw:?}")))?;
    // A second call in the same process keeps the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit(outcome: &Outcome, out_dir: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let json = report::to_json_string(&outcome.report);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), &json)?;
        for t in &outcome.tables {
            t.write(dir)?;
        }
        for (name, text) in &outcome.files {
            std::fs::write(dir.join(name), text)?;
        }
    }
    stdout.write_all(json.as_bytes())?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = configure_threads().and_then(|_| {
        let out_dir = commands::out_dir(&cli.command).map(Path::to_path_buf);
        let outcome = commands::dispatch(cli.command)?;
        emit(&outcome, out_dir.as_deref(), stdout)?;
        Ok(outcome.verdict_failed)
    });
    match result {
        Ok(false) => EXIT_OK,
        Ok(true) => EXIT_VERDICT,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

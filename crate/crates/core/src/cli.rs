//! Command-line front end. Arguments are turned into a [`RunConfig`], which
//! alone determines the output; [`execute`] runs it.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    generic_lower, generic_upper, moment_bounds, pz_bound, pz_lower_exponential,
    s_inequality_upper, BoundKind, BoundValue, MomentMode, EXP_KURTOSIS,
};
use crate::error::{invalid, Error, Result};
use crate::harness::{
    fmt17, property_suite, sandwich_bounds, sandwich_report, threshold_unit, write_rows_csv,
    SandwichConfig, SandwichRow, SuiteReport,
};
use crate::montecarlo::{is_tail, mc_tail, MCEstimate, Method};
use crate::oracle::{exact_tail, laplace_abs_moment, p_ge_mean, ExactSource};
use crate::weights::{Distribution, WeightVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_T_GRID: [f64; 6] = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0];
const DEFAULT_P: [f64; 5] = [2.0, 3.0, 4.0, 6.0, 8.0];

#[derive(Debug, Parser)]
#[command(
    name = "tailsand",
    version,
    about = "Tail bounds, exact tails and simulations for weighted sums"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArg {
    /// Every applicable bound over the threshold grid.
    Bounds,
    /// Exact tail probabilities from the oracles.
    Exact,
    /// Monte Carlo or importance-sampling estimates.
    Simulate,
    /// Moment bounds next to the exact moments (Laplace sums).
    Moments {
        /// Moment orders, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_P.to_vec())]
        p: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::ProofDerived)]
        mode: ModeArg,
    },
    /// Sandwich campaign on random instances plus the property suite.
    Verify {
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long, value_enum, global = true)]
    dist: Option<DistArg>,
    /// Gamma shape parameter.
    #[arg(long, global = true)]
    shape: Option<f64>,
    /// Weights, comma separated.
    #[arg(long, global = true)]
    weights: Option<WeightVector>,
    /// Thresholds as multiples of sigma (Laplace) or of E S (nonnegative laws).
    #[arg(
        long = "t",
        value_delimiter = ',',
        global = true,
        conflicts_with = "threshold"
    )]
    t: Option<Vec<f64>>,
    /// Thresholds in absolute units.
    #[arg(long, value_delimiter = ',', global = true)]
    threshold: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, global = true, default_value_t = MethodArg::Plain)]
    method: MethodArg,
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Exponential,
    Gamma,
    Laplace,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Plain,
    Tilted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    #[value(name = "proof_derived", alias = "proof-derived")]
    ProofDerived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bounds,
    Exact,
    Simulate,
    Moments,
    Verify,
}

/// Thresholds either as multiples of the natural scale or in absolute units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Multiples(Vec<f64>),
    Absolute(Vec<f64>),
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub dist: Distribution,
    pub weights: Option<WeightVector>,
    pub grid: Grid,
    pub samples: usize,
    pub seed: u64,
    pub method: Method,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub p: Vec<f64>,
    pub mode: MomentMode,
    pub instances: usize,
}

impl RunConfig {
    fn weights(&self) -> Result<&WeightVector> {
        self.weights
            .as_ref()
            .ok_or_else(|| invalid("--weights is required for this command"))
    }

    /// `(t, threshold)` pairs for weights `w`.
    fn points(&self, w: &WeightVector) -> Vec<(f64, f64)> {
        let unit = threshold_unit(self.dist, w);
        match &self.grid {
            Grid::Multiples(ts) => ts.iter().map(|&t| (t, t * unit)).collect(),
            Grid::Absolute(xs) => xs.iter().map(|&x| (x / unit, x)).collect(),
        }
    }
}

fn to_config(cli: Cli) -> Result<RunConfig> {
    let c = cli.common;
    let dist = match c.dist.ok_or_else(|| invalid("--dist is required"))? {
        DistArg::Exponential => Distribution::Exponential,
        DistArg::Laplace => Distribution::Laplace,
        DistArg::Gamma => Distribution::gamma(
            c.shape
                .ok_or_else(|| invalid("--dist gamma needs --shape"))?,
        )?,
    };
    if c.shape.is_some() && !matches!(dist, Distribution::Gamma { .. }) {
        return Err(invalid("--shape only applies to --dist gamma"));
    }
    let (command, p, mode, instances) = match cli.command {
        CommandArg::Bounds => (
            Command::Bounds,
            DEFAULT_P.to_vec(),
            MomentMode::default(),
            0,
        ),
        CommandArg::Exact => (Command::Exact, DEFAULT_P.to_vec(), MomentMode::default(), 0),
        CommandArg::Simulate => (
            Command::Simulate,
            DEFAULT_P.to_vec(),
            MomentMode::default(),
            0,
        ),
        CommandArg::Moments { p, mode } => {
            let mode = match mode {
                ModeArg::Paper => MomentMode::Paper,
                ModeArg::ProofDerived => MomentMode::ProofDerived,
            };
            (Command::Moments, p, mode, 0)
        }
        CommandArg::Verify { instances } => (
            Command::Verify,
            DEFAULT_P.to_vec(),
            MomentMode::default(),
            instances,
        ),
    };
    let grid = match (c.t, c.threshold) {
        (Some(t), _) => Grid::Multiples(t),
        (None, Some(x)) => Grid::Absolute(x),
        (None, None) if matches!(command, Command::Verify | Command::Moments) => {
            Grid::Multiples(DEFAULT_T_GRID.to_vec())
        }
        (None, None) => return Err(invalid("one of --t or --threshold is required")),
    };
    if command == Command::Verify && matches!(grid, Grid::Absolute(_)) {
        return Err(invalid(
            "verify takes --t multiples, not absolute thresholds",
        ));
    }
    Ok(RunConfig {
        command,
        dist,
        weights: c.weights,
        grid,
        samples: c.samples,
        seed: c.seed,
        method: match c.method {
            MethodArg::Plain => Method::Plain,
            MethodArg::Tilted => Method::Tilted,
        },
        format: c.format,
        out: c.out,
        p,
        mode,
        instances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: f64,
    pub threshold: f64,
    pub kind: BoundKind,
    pub value: f64,
    pub log_value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub t: f64,
    pub threshold: f64,
    pub exact: f64,
    pub source: ExactSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub t: f64,
    pub threshold: f64,
    #[serde(flatten)]
    pub estimate: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: f64,
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
    pub mode: MomentMode,
    pub bracketed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
// untagged: most specific row shape first so parsing picks the right one
pub enum Rows {
    Sandwich(Vec<SandwichRow>),
    Simulate(Vec<SimRow>),
    Bounds(Vec<BoundRow>),
    Moments(Vec<MomentRow>),
    Exact(Vec<ExactRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub rows: Rows,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub suite: Option<SuiteReport>,
}

impl RunReport {
    /// True unless a verification row or property failed.
    pub fn passed(&self) -> bool {
        let rows_ok = match &self.rows {
            Rows::Sandwich(rows) => rows.iter().all(|r| r.pass),
            _ => true,
        };
        rows_ok && self.suite.as_ref().is_none_or(|s| s.pass)
    }
}

fn bounds_rows(cfg: &RunConfig) -> Result<Vec<BoundRow>> {
    let w = cfg.weights()?;
    let d = cfg.dist;
    // P(S >= ES) from the oracle, or the fourth-moment bound when unavailable
    let p_ge = match d {
        Distribution::Laplace => None,
        Distribution::Exponential => Some(p_ge_mean(d, w).or_else(|_| pz_bound(EXP_KURTOSIS))?),
        Distribution::Gamma { shape } => {
            Some(p_ge_mean(d, w).or_else(|_| pz_bound(crate::bounds::gamma_kurtosis(shape)))?)
        }
    };
    let mut rows = Vec::new();
    for (t, threshold) in cfg.points(w) {
        let mut push = |b: BoundValue| {
            rows.push(BoundRow {
                t,
                threshold,
                kind: b.kind,
                value: b.value,
                log_value: b.log_value,
                valid: b.valid,
            })
        };
        let (lo, hi) = sandwich_bounds(d, w, t)?;
        push(lo);
        push(hi);
        if let Some(p) = p_ge {
            push(generic_lower(d, w, t, p)?);
            push(generic_upper(d, w, t)?);
        }
        if d == Distribution::Exponential {
            push(pz_lower_exponential());
            if let Some(p) = p_ge.filter(|&p| p < 1.0) {
                push(s_inequality_upper(t, p)?);
            }
        }
    }
    Ok(rows)
}

fn exact_rows(cfg: &RunConfig) -> Result<Vec<ExactRow>> {
    let w = cfg.weights()?;
    cfg.points(w)
        .into_iter()
        .map(|(t, threshold)| {
            let e = exact_tail(cfg.dist, w, threshold)?;
            Ok(ExactRow {
                t,
                threshold,
                exact: e.value,
                source: e.source,
            })
        })
        .collect()
}

fn simulate_rows(cfg: &RunConfig) -> Result<Vec<SimRow>> {
    let w = cfg.weights()?;
    cfg.points(w)
        .into_iter()
        .enumerate()
        .map(|(i, (t, threshold))| {
            // one seed per grid point keeps the estimates independent
            let seed = cfg.seed.wrapping_add(i as u64);
            let estimate = match cfg.method {
                Method::Plain => mc_tail(cfg.dist, w, threshold, cfg.samples, seed)?,
                Method::Tilted => is_tail(cfg.dist, w, threshold, cfg.samples, seed)?,
            };
            Ok(SimRow {
                t,
                threshold,
                estimate,
            })
        })
        .collect()
}

fn moment_rows(cfg: &RunConfig) -> Result<Vec<MomentRow>> {
    if cfg.dist != Distribution::Laplace {
        return Err(Error::UnsupportedLaw {
            operation: "moments",
            law: cfg.dist.name(),
        });
    }
    let w = cfg.weights()?;
    cfg.p
        .iter()
        .map(|&p| {
            let b = moment_bounds(p, w, cfg.mode)?;
            let exact = laplace_abs_moment(w, p)?.powf(1.0 / p);
            Ok(MomentRow {
                p,
                lower: b.lower,
                exact,
                upper: b.upper,
                mode: cfg.mode,
                bracketed: b.lower <= exact && exact <= b.upper,
            })
        })
        .collect()
}

/// Runs a configuration. Pure given `cfg`.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    let (rows, suite) = match cfg.command {
        Command::Bounds => (Rows::Bounds(bounds_rows(cfg)?), None),
        Command::Exact => (Rows::Exact(exact_rows(cfg)?), None),
        Command::Simulate => (Rows::Simulate(simulate_rows(cfg)?), None),
        Command::Moments => (Rows::Moments(moment_rows(cfg)?), None),
        Command::Verify => {
            let Grid::Multiples(ts) = &cfg.grid else {
                return Err(invalid("verify takes --t multiples"));
            };
            let sc = SandwichConfig::new(cfg.dist, cfg.instances, ts.clone(), cfg.seed);
            (
                Rows::Sandwich(sandwich_report(&sc)?),
                Some(property_suite(cfg.seed)),
            )
        }
    };
    Ok(RunReport {
        config: cfg.clone(),
        rows,
        suite,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv output: {e}"))
}

fn write_csv<const N: usize>(
    out: impl Write,
    header: [&str; N],
    records: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(header).map_err(csv_err)?;
    for r in records {
        wr.write_record(r).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Serialises a report. CSV carries the rows only; JSON also carries the
/// config and, for `verify`, the property suite.
pub fn write_report(report: &RunReport, format: Format, mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("output: {e}"));
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            writeln!(out).map_err(io)
        }
        Format::Csv => match &report.rows {
            Rows::Bounds(rows) => write_csv(
                out,
                ["t", "threshold", "kind", "value", "log_value", "valid"],
                rows.iter().map(|r| {
                    [
                        fmt17(r.t),
                        fmt17(r.threshold),
                        r.kind.as_str().to_string(),
                        fmt17(r.value),
                        fmt17(r.log_value),
                        r.valid.to_string(),
                    ]
                }),
            ),
            Rows::Exact(rows) => write_csv(
                out,
                ["t", "threshold", "exact", "source"],
                rows.iter().map(|r| {
                    [
                        fmt17(r.t),
                        fmt17(r.threshold),
                        fmt17(r.exact),
                        r.source.as_str().to_string(),
                    ]
                }),
            ),
            Rows::Simulate(rows) => write_csv(
                out,
                [
                    "t",
                    "threshold",
                    "p_hat",
                    "stderr",
                    "ci_low",
                    "ci_high",
                    "n",
                    "hits",
                    "method",
                    "seed",
                    "tilt_theta",
                ],
                rows.iter().map(|r| {
                    let e = &r.estimate;
                    [
                        fmt17(r.t),
                        fmt17(r.threshold),
                        fmt17(e.p_hat),
                        fmt17(e.stderr),
                        fmt17(e.ci_low),
                        fmt17(e.ci_high),
                        e.n.to_string(),
                        e.hits.to_string(),
                        e.method.as_str().to_string(),
                        e.seed.to_string(),
                        fmt17(e.tilt_theta),
                    ]
                }),
            ),
            Rows::Moments(rows) => write_csv(
                out,
                ["p", "lower", "exact", "upper", "mode", "bracketed"],
                rows.iter().map(|r| {
                    let mode = match r.mode {
                        MomentMode::Paper => "paper",
                        MomentMode::ProofDerived => "proof_derived",
                    };
                    [
                        fmt17(r.p),
                        fmt17(r.lower),
                        fmt17(r.exact),
                        fmt17(r.upper),
                        mode.to_string(),
                        r.bracketed.to_string(),
                    ]
                }),
            ),
            Rows::Sandwich(rows) => write_rows_csv(rows, out),
        },
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericFailure { .. } | Error::IllConditioned { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv`, runs the command and writes the output. Returns the exit
/// status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = to_config(cli).and_then(|cfg| {
        let report = execute(&cfg)?;
        match &cfg.out {
            Some(path) => {
                let file = File::create(path)
                    .map_err(|e| invalid(format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                write_report(&report, cfg.format, &mut w)?;
                w.flush()
                    .map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
            }
            None => write_report(&report, cfg.format, &mut *stdout)?,
        }
        Ok(report)
    });
    match result {
        Ok(report) if report.passed() => EXIT_OK,
        Ok(report) => {
            let failing = match &report.rows {
                Rows::Sandwich(rows) => rows.iter().filter(|r| !r.pass).count(),
                _ => 0,
            };
            let _ = writeln!(stderr, "verification failed: {failing} failing rows");
            if let Some(s) = &report.suite {
                for p in s.properties.iter().filter(|p| !p.pass()) {
                    let _ = writeln!(
                        stderr,
                        "property {} failed {} of {} checks; witness: {}",
                        p.name,
                        p.failures,
                        p.checks,
                        p.witness.as_deref().unwrap_or("-")
                    );
                }
            }
            EXIT_VERIFY_FAILED
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("tailsand").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(
            run_capture(&["bounds", "--dist", "cauchy", "--weights", "1", "--t", "2"]).0,
            1
        );
        assert_eq!(
            run_capture(&[
                "bounds",
                "--dist",
                "laplace",
                "--weights",
                "1",
                "--t",
                "2",
                "--threshold",
                "3"
            ])
            .0,
            1
        );
        assert_eq!(
            run_capture(&["bounds", "--dist", "gamma", "--weights", "1", "--t", "2"]).0,
            1
        );
        assert_eq!(
            run_capture(&[
                "bounds",
                "--dist",
                "laplace",
                "--weights",
                "1,-2",
                "--t",
                "2"
            ])
            .0,
            1
        );
        assert_eq!(
            run_capture(&["exact", "--dist", "laplace", "--weights", "1"]).0,
            1
        );
        assert_eq!(run_capture(&["frobnicate"]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn moments_reject_nonsymmetric_law() {
        let (code, _, err) = run_capture(&["moments", "--dist", "exponential", "--weights", "1"]);
        assert_eq!(code, 1);
        assert!(err.contains("moments"));
    }

    #[test]
    fn absolute_and_multiple_grids_agree() {
        let (_, a, _) = run_capture(&[
            "exact",
            "--dist",
            "exponential",
            "--weights",
            "2,1",
            "--t",
            "2",
        ]);
        let (_, b, _) = run_capture(&[
            "exact",
            "--dist",
            "exponential",
            "--weights",
            "2,1",
            "--threshold",
            "6",
        ]);
        let ra: RunReport = serde_json::from_str(&a).unwrap();
        let rb: RunReport = serde_json::from_str(&b).unwrap();
        let (Rows::Exact(x), Rows::Exact(y)) = (ra.rows, rb.rows) else {
            panic!("row kind")
        };
        assert_eq!(x[0].exact, y[0].exact);
        assert!((x[0].exact - 0.097_095_384_559_061_53).abs() < 1e-12);
    }
}

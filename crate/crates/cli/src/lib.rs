//! Batch front end for sharp Markov-type constants.
//!
//! Exit codes: 0 success, 1 a verification or self-test failed, 2 invalid
//! input or violated hypothesis, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use markovsharp_core::bounds::{
    default_case, fitted_envelope, predicted_exponent, verify_theorem_with_slack, CaseId, FIT_SLACK,
};
use markovsharp_core::format::fmt_f64;
use markovsharp_core::markov::{extremal_polynomial, ExtremalPolynomial, RESIDUAL_TOLERANCE};
use markovsharp_core::selftest::{run_selftest, SelftestOptions};
use markovsharp_core::{Error, MarkovProblem, SharpResult, SobolevSpec, WeightSpec};
use serde_json::{json, Value};
use thiserror::Error as ThisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INVALID,
            CliError::Core(e) if e.is_input_error() => EXIT_INVALID,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Output { .. } => EXIT_NUMERICAL,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "markovsharp",
    version,
    about = "Sharp Markov-type constants for weighted L2 and Sobolev norms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp constant and extremal coefficients at one degree.
    Sharp(CommonArgs),
    /// Table of sharp constants, Mirsky bounds and envelopes over a degree range.
    Sweep(CommonArgs),
    /// Mirsky upper bound next to the sharp constant.
    Mirsky(CommonArgs),
    /// Extremal polynomial report and samples.
    Extremal(ExtremalArgs),
    /// Growth-exponent check of one theorem case.
    Verify(CommonArgs),
    /// Kernel self-tests.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Weight: JSON file, inline JSON, or preset (legendre, chebyshev1, laguerre0, hermite).
    #[arg(long)]
    pub weight: Option<String>,
    /// Sobolev weights lambda_1,...,lambda_k.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub n_step: Option<usize>,
    /// Theorem case: 1, 2, 3, 4, 5.1, 5.2, 6, mirsky, schmidt or the snake_case name.
    #[arg(long = "case")]
    pub case_id: Option<String>,
    /// Residual tolerance for sharp/mirsky/sweep, fit slack for verify.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExtremalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of sample points of the polynomial and its derivative.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Perturb the orthonormality rules (negative control).
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Result of a command: the rendered output and the exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: EXIT_OK,
        }
    }
}

/// Parses `args` (program name first) and runs the command. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((outcome, out)) => match emit(&outcome.text, out, stdout) {
            Ok(()) => outcome.code,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Output {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn execute(command: &Command) -> CliResult<(Outcome, Option<&Path>)> {
    let (outcome, output) = match command {
        Command::Sharp(a) => (cmd_sharp(a)?, &a.output),
        Command::Sweep(a) => (cmd_sweep(a)?, &a.output),
        Command::Mirsky(a) => (cmd_mirsky(a)?, &a.output),
        Command::Extremal(a) => (cmd_extremal(a)?, &a.common.output),
        Command::Verify(a) => (cmd_verify(a)?, &a.output),
        Command::Selftest(a) => (cmd_selftest(a), &a.output),
    };
    Ok((outcome, output.out.as_deref()))
}

/// Resolves `--weight`: preset name, inline JSON object, or JSON file.
pub fn parse_weight(arg: &str) -> CliResult<WeightSpec> {
    let trimmed = arg.trim();
    if let Some(spec) = WeightSpec::preset(trimmed) {
        return Ok(spec);
    }
    if trimmed.starts_with('{') {
        return Ok(WeightSpec::from_json(trimmed)?);
    }
    let path = Path::new(trimmed);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Input(format!("cannot read weight file {}: {e}", path.display()))
        })?;
        return Ok(WeightSpec::from_json(&text)?);
    }
    Err(CliError::Input(format!(
        "unknown weight '{trimmed}': expected a preset (legendre, chebyshev1, laguerre0, hermite), inline JSON or a file"
    )))
}

fn weight(args: &CommonArgs) -> CliResult<WeightSpec> {
    let arg = args
        .weight
        .as_deref()
        .ok_or_else(|| CliError::Input("--weight is required".into()))?;
    parse_weight(arg)
}

fn sobolev(args: &CommonArgs) -> CliResult<Option<SobolevSpec>> {
    match &args.lambdas {
        None => Ok(None),
        Some(l) => Ok(Some(SobolevSpec::new(l.clone())?)),
    }
}

fn single_n(args: &CommonArgs) -> CliResult<usize> {
    let n = args
        .n
        .ok_or_else(|| CliError::Input("--n is required".into()))?;
    if n == 0 {
        return Err(CliError::Input("n must be ≥ 1".into()));
    }
    Ok(n)
}

/// `--n` alone gives `1..=n`; otherwise `--n-min` (default `default_min`)
/// to `--n-max` by `--n-step`.
fn n_range(args: &CommonArgs, default_min: usize) -> CliResult<Vec<usize>> {
    let step = args.n_step.unwrap_or(1);
    if step == 0 {
        return Err(CliError::Input("--n-step must be >= 1".into()));
    }
    let (lo, hi) = match (args.n, args.n_min, args.n_max) {
        (Some(n), None, None) => (default_min.min(n), n),
        (_, lo, Some(hi)) => (lo.unwrap_or(default_min), hi),
        (None, _, None) => return Err(CliError::Input("--n or --n-max is required".into())),
        (Some(_), Some(_), None) => return Err(CliError::Input("--n-min needs --n-max".into())),
    };
    if lo == 0 {
        return Err(CliError::Input("n must be ≥ 1".into()));
    }
    if lo > hi {
        return Err(CliError::Input(format!("empty degree range {lo}..{hi}")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn residual_tolerance(args: &CommonArgs) -> CliResult<f64> {
    match args.tol {
        None => Ok(RESIDUAL_TOLERANCE),
        Some(t) if t > 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(CliError::Input(format!("--tol {t} must be positive"))),
    }
}

fn check_residual(res: &SharpResult, tol: f64) -> CliResult<()> {
    if res.residual > tol {
        return Err(CliError::Core(Error::NoConvergence(format!(
            "residual {} at n = {} exceeds tolerance {}",
            fmt_f64(res.residual),
            res.n,
            fmt_f64(tol)
        ))));
    }
    Ok(())
}

fn compute(problem: &MarkovProblem, sob: Option<&SobolevSpec>, n: usize) -> CliResult<SharpResult> {
    Ok(match sob {
        Some(s) => problem.sharp_sobolev(s, n)?,
        None => problem.sharp_l2(n)?,
    })
}

fn csv_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(";")
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn cmd_sharp(args: &CommonArgs) -> CliResult<Outcome> {
    let spec = weight(args)?;
    let sob = sobolev(args)?;
    let n = single_n(args)?;
    let tol = residual_tolerance(args)?;
    let problem = MarkovProblem::new(&spec, n)?;
    let res = compute(&problem, sob.as_ref(), n)?;
    check_residual(&res, tol)?;
    let text = match args.output.format {
        OutputFormat::Json => to_json(&serde_json::to_value(&res).expect("serializable")),
        OutputFormat::Csv => format!(
            "n,value,residual,coeffs\n{},{},{},{}\n",
            res.n,
            fmt_f64(res.value),
            fmt_f64(res.residual),
            csv_list(&res.coeffs)
        ),
    };
    Ok(Outcome::ok(text))
}

pub fn cmd_sweep(args: &CommonArgs) -> CliResult<Outcome> {
    let spec = weight(args)?;
    let sob = sobolev(args)?;
    let ns = n_range(args, 1)?;
    let tol = residual_tolerance(args)?;
    let problem = MarkovProblem::new(&spec, *ns.last().expect("nonempty range"))?;

    let mut l2 = Vec::with_capacity(ns.len());
    let mut sobolev_values = Vec::with_capacity(ns.len());
    let mut mirsky = Vec::with_capacity(ns.len());
    for &n in &ns {
        let r = problem.sharp_l2(n)?;
        check_residual(&r, tol)?;
        l2.push(r.value);
        if let Some(s) = &sob {
            let r = problem.sharp_sobolev(s, n)?;
            check_residual(&r, tol)?;
            sobolev_values.push(r.value);
        }
        mirsky.push(problem.mirsky_bound(n)?);
    }

    // envelope of the first theorem case whose hypotheses hold
    let sob_or_zero = sob
        .clone()
        .unwrap_or_else(|| SobolevSpec::new(vec![0.0]).expect("valid"));
    let tracked = if sob.is_some() { &sobolev_values } else { &l2 };
    let case = match &args.case_id {
        Some(c) => Some(c.parse::<CaseId>()?),
        None => default_case(&spec, &sob_or_zero),
    };
    let envelope = match case {
        Some(c) => {
            let e = predicted_exponent(c, &spec, &sob_or_zero)?;
            let series = if c == CaseId::Mirsky {
                &mirsky
            } else {
                tracked
            };
            Some(fitted_envelope(c, &ns, series, e))
        }
        None => None,
    };
    let env_at = |i: usize| envelope.as_ref().map(|e| e[i]);

    let text = match args.output.format {
        OutputFormat::Csv => {
            let mut out = String::from(if sob.is_some() {
                "n,sharp,sobolev,mirsky,envelope\n"
            } else {
                "n,sharp,mirsky,envelope\n"
            });
            for (i, n) in ns.iter().enumerate() {
                let env = env_at(i).map(fmt_f64).unwrap_or_default();
                if sob.is_some() {
                    out.push_str(&format!(
                        "{n},{},{},{},{env}\n",
                        fmt_f64(l2[i]),
                        fmt_f64(sobolev_values[i]),
                        fmt_f64(mirsky[i])
                    ));
                } else {
                    out.push_str(&format!(
                        "{n},{},{},{env}\n",
                        fmt_f64(l2[i]),
                        fmt_f64(mirsky[i])
                    ));
                }
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = ns
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let mut row =
                        json!({"n": n, "sharp": l2[i], "mirsky": mirsky[i], "envelope": env_at(i)});
                    if sob.is_some() {
                        row["sobolev"] = json!(sobolev_values[i]);
                    }
                    row
                })
                .collect();
            to_json(&json!({
                "weight": spec,
                "lambdas": sob.as_ref().map(|s| s.lambdas().to_vec()).unwrap_or_default(),
                "case_id": case,
                "rows": rows,
            }))
        }
    };
    Ok(Outcome::ok(text))
}

pub fn cmd_mirsky(args: &CommonArgs) -> CliResult<Outcome> {
    let spec = weight(args)?;
    let ns = match (args.n, args.n_max) {
        (Some(n), None) if args.n_min.is_none() => {
            if n == 0 {
                return Err(CliError::Input("n must be ≥ 1".into()));
            }
            vec![n]
        }
        _ => n_range(args, 1)?,
    };
    let tol = residual_tolerance(args)?;
    let problem = MarkovProblem::new(&spec, *ns.last().expect("nonempty range"))?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let sharp = problem.sharp_l2(n)?;
        check_residual(&sharp, tol)?;
        let bound = problem.mirsky_bound(n)?;
        rows.push((n, bound, sharp.value));
    }
    let text = match args.output.format {
        OutputFormat::Csv => {
            let mut out = String::from("n,mirsky,sharp,ratio\n");
            for (n, m, s) in &rows {
                out.push_str(&format!(
                    "{n},{},{},{}\n",
                    fmt_f64(*m),
                    fmt_f64(*s),
                    fmt_f64(m / s)
                ));
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(n, m, s)| json!({"n": n, "mirsky": m, "sharp": s, "ratio": m / s}))
                .collect();
            to_json(&json!({"weight": spec, "rows": rows}))
        }
    };
    Ok(Outcome::ok(text))
}

fn sample_window(problem: &MarkovProblem) -> (f64, f64) {
    let (a, b) = problem.spec().interval();
    let nodes = problem.rule().nodes();
    let lo = if a.is_finite() { a } else { nodes[0] };
    let hi = if b.is_finite() {
        b
    } else {
        nodes[nodes.len() - 1]
    };
    (lo, hi)
}

pub fn cmd_extremal(args: &ExtremalArgs) -> CliResult<Outcome> {
    let common = &args.common;
    let spec = weight(common)?;
    let sob = sobolev(common)?;
    let n = single_n(common)?;
    let tol = residual_tolerance(common)?;
    if args.samples < 2 {
        return Err(CliError::Input("--samples must be >= 2".into()));
    }
    let problem = MarkovProblem::new(&spec, n)?;
    let res = compute(&problem, sob.as_ref(), n)?;
    let poly: ExtremalPolynomial = extremal_polynomial(&res, problem.recurrence())?;
    let report = poly.report();
    if report.residual > tol {
        return Err(CliError::Core(Error::NoConvergence(format!(
            "extremal residual {} exceeds tolerance {}",
            fmt_f64(report.residual),
            fmt_f64(tol)
        ))));
    }
    let (lo, hi) = sample_window(&problem);
    let xs: Vec<f64> = (0..args.samples)
        .map(|i| lo + (hi - lo) * i as f64 / (args.samples - 1) as f64)
        .collect();
    let text = match common.output.format {
        OutputFormat::Csv => {
            let mut out = String::from("x,p,dp\n");
            for &x in &xs {
                out.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(x),
                    fmt_f64(poly.eval(x)),
                    fmt_f64(poly.derivative(x))
                ));
            }
            out
        }
        OutputFormat::Json => {
            let samples: Vec<Value> = xs
                .iter()
                .map(|&x| json!({"x": x, "p": poly.eval(x), "dp": poly.derivative(x)}))
                .collect();
            to_json(&json!({"weight": spec, "report": report, "samples": samples}))
        }
    };
    Ok(Outcome::ok(text))
}

pub fn cmd_verify(args: &CommonArgs) -> CliResult<Outcome> {
    let case: CaseId = args
        .case_id
        .as_deref()
        .ok_or_else(|| CliError::Input("--case is required".into()))?
        .parse()?;
    let spec = weight(args)?;
    let sob = sobolev(args)?.unwrap_or_else(|| SobolevSpec::new(vec![0.0]).expect("valid"));
    let ns = if args.n.is_none() && args.n_max.is_none() {
        (4..=40).collect()
    } else {
        n_range(args, 4)?
    };
    let slack = match args.tol {
        None => FIT_SLACK,
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return Err(CliError::Input(format!("--tol {t} must be >= 0"))),
    };
    let check = verify_theorem_with_slack(case, &spec, &sob, &ns, slack)?;
    let text = match args.output.format {
        OutputFormat::Json => to_json(&serde_json::to_value(&check).expect("serializable")),
        OutputFormat::Csv => check.to_csv(),
    };
    Ok(Outcome {
        text,
        code: if check.all_ok() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        },
    })
}

pub fn cmd_selftest(args: &SelftestArgs) -> Outcome {
    let results = run_selftest(SelftestOptions {
        inject_fault: args.inject_fault,
    });
    let all = results.iter().all(|r| r.passed);
    let text = match args.output.format {
        OutputFormat::Json => to_json(&json!({"passed": all, "suites": results})),
        OutputFormat::Csv => {
            let mut out = String::from("suite,passed,worst,tolerance,detail\n");
            for r in &results {
                out.push_str(&format!(
                    "{},{},{},{},\"{}\"\n",
                    r.name,
                    r.passed,
                    fmt_f64(r.worst),
                    fmt_f64(r.tolerance),
                    r.detail.replace('"', "'")
                ));
            }
            out
        }
    };
    Outcome {
        text,
        code: if all { EXIT_OK } else { EXIT_CHECK_FAILED },
    }
}

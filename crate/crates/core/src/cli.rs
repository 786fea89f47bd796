//! `ellipmoment (constants|moment|verify|sample) [--family F] [--dims A..B]
//! [--spec file.json] [--seed S] [--samples N] [--out path]`
//!
//! Exit codes: 0 success, 1 failed verification or a numerical error, 2 bad
//! arguments or input files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::elliptical::EllipticalDistribution;
use crate::error::Error;
use crate::generator_families::{normalizing_constants, GeneratorFamily};
use crate::linalg::SymMatrix;
use crate::moments::{
    normal_power_moment, normal_product_moment, product_moment, stein_first_moment, x1sq_moment_thm1,
    x1sq_moment_thm2, xk_sq_moment_thm1, Budget, MomentEstimate, MonomialExponents, SmoothFunction,
};
use crate::verify::{real, run_all, VerifyConfig, DEFAULT_SAMPLES, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "ellipmoment", version, about = "Joint moments of elliptical distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalizing constants of a family across dimensions.
    Constants(Opts),
    /// Evaluate one identity from a JSON spec.
    Moment(Opts),
    /// Run the verification suite and write a JSON report.
    Verify(Opts),
    /// Write draws as CSV.
    Sample(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// normal | t(p=<real>) | logistic | laplace
    #[arg(long)]
    family: Option<String>,
    /// Inclusive dimension range `A..B`, or a single dimension.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs one invocation; `argv[0]` is the program name.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Constants(o) => constants(&o, stdout),
        Command::Moment(o) => moment(&o, stdout),
        Command::Verify(o) => verify(&o, stdout, stderr),
        Command::Sample(o) => sample(&o, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Verification) => 1,
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn parse_family(s: Option<&str>) -> CliResult<GeneratorFamily> {
    let s = s.ok_or_else(|| Failure::Usage("--family is required".into()))?;
    Ok(s.parse::<GeneratorFamily>()?)
}

/// `A..B` (inclusive) or `A`.
fn parse_dims(s: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Usage(format!("bad --dims '{s}', expected A..B or A"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let a = s.trim().parse().map_err(|_| bad())?;
            (a, a)
        }
    };
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn constants(o: &Opts, stdout: &mut dyn Write) -> CliResult<()> {
    let family = parse_family(o.family.as_deref())?;
    let (a, b) = parse_dims(o.dims.as_deref().unwrap_or("1..5"))?;
    let cell = |v: crate::error::Result<f64>| v.map(fmt_real).unwrap_or_else(|_| "NA".into());
    let mut text = format!("# family {family}\n");
    text.push_str("n\tc_n\tc_n_star\tc_n_dstar\tb_star\tb_dstar\tquadrature_discrepancy\n");
    for n in a..=b {
        let c = normalizing_constants(&family, n)?;
        text.push_str(&format!(
            "{n}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            fmt_real(c.c_n()),
            cell(c.c_n_star()),
            cell(c.c_n_dstar()),
            cell(c.b_star()),
            cell(c.b_dstar()),
            fmt_real(c.quadrature_discrepancy())
        ));
    }
    emit(&o.out, &text, stdout)
}

/// `{"family": "t(p=6)", "mu": [..], "sigma": [[..]]}`
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub family: String,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl DistributionSpec {
    pub fn build(&self) -> crate::error::Result<EllipticalDistribution> {
        let family: GeneratorFamily = self.family.parse()?;
        EllipticalDistribution::new(self.mu.clone(), SymMatrix::from_rows(&self.sigma)?, family)
    }
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Monomial {
        exponents: Vec<u32>,
        #[serde(default = "one")]
        coeff: f64,
    },
    /// `exp(−‖x‖²/scale)`
    GaussianBump {
        #[serde(default = "four")]
        scale: f64,
    },
    /// `sin(Σ x_i)` over `indices` (default: the first two coordinates).
    SinSum {
        #[serde(default)]
        indices: Option<Vec<usize>>,
    },
    Constant {
        value: f64,
    },
    Linear {
        coeffs: Vec<f64>,
    },
}

impl FunctionSpec {
    pub fn build(&self, n: usize) -> crate::error::Result<SmoothFunction> {
        let check_len = |len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: n, got: len })
            }
        };
        Ok(match self {
            FunctionSpec::Monomial { exponents, coeff } => {
                check_len(exponents.len())?;
                SmoothFunction::monomial(&MonomialExponents::new(exponents.clone()), *coeff)
            }
            FunctionSpec::GaussianBump { scale } => {
                if !(*scale > 0.0) {
                    return Err(Error::InvalidArgument("gaussian_bump scale must be positive".into()));
                }
                SmoothFunction::gaussian_bump(*scale)
            }
            FunctionSpec::SinSum { indices } => {
                let idx = indices.clone().unwrap_or_else(|| (0..n.min(2)).collect());
                if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                    return Err(Error::InvalidArgument(format!("sin_sum index {bad} out of range")));
                }
                SmoothFunction::sin_sum(idx)
            }
            FunctionSpec::Constant { value } => SmoothFunction::constant(*value),
            FunctionSpec::Linear { coeffs } => {
                check_len(coeffs.len())?;
                SmoothFunction::linear(coeffs.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum BudgetSpec {
    Mc { samples: usize, seed: u64 },
    Quadrature { nodes_per_dim: usize },
}

impl From<BudgetSpec> for Budget {
    fn from(b: BudgetSpec) -> Self {
        match b {
            BudgetSpec::Mc { samples, seed } => Budget::MonteCarlo { samples, seed },
            BudgetSpec::Quadrature { nodes_per_dim } => Budget::Quadrature { nodes_per_dim },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Stein,
    X1sqThm1,
    X1sqThm2,
    XkSqThm1,
    ProductMoment,
    NormalProductMoment,
    NormalPowerMoment,
}

/// Input of `ellipmoment moment --spec`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub operation: Operation,
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub exponents: Option<Vec<u32>>,
    #[serde(default)]
    pub p1: Option<u32>,
    /// Zero-based coordinate for `xk_sq_thm1`.
    #[serde(default)]
    pub coordinate: Option<usize>,
    #[serde(default)]
    pub budget: Option<BudgetSpec>,
}

#[derive(Serialize)]
struct Term {
    term: String,
    #[serde(serialize_with = "real")]
    value: f64,
}

#[derive(Serialize)]
struct MomentOutput {
    operation: Operation,
    method: String,
    #[serde(serialize_with = "real")]
    value: f64,
    #[serde(serialize_with = "real")]
    stderr: f64,
    breakdown: Vec<Term>,
}

/// Evaluates a parsed spec. `default_budget` applies when the spec has none.
pub fn evaluate_spec(spec: &MomentSpec, default_budget: Budget) -> crate::error::Result<MomentEstimate> {
    let d = spec.distribution.build()?;
    let budget = spec.budget.map(Budget::from).unwrap_or(default_budget);
    let function = || -> crate::error::Result<SmoothFunction> {
        spec.function
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("this operation needs a \"function\"".into()))?
            .build(d.n())
    };
    let exponents = || -> crate::error::Result<MonomialExponents> {
        spec.exponents
            .clone()
            .map(MonomialExponents::new)
            .ok_or_else(|| Error::InvalidArgument("this operation needs \"exponents\"".into()))
    };
    match spec.operation {
        Operation::Stein => stein_first_moment(&d, &function()?, budget),
        Operation::X1sqThm1 => x1sq_moment_thm1(&d, &function()?, budget),
        Operation::X1sqThm2 => x1sq_moment_thm2(&d, &function()?, budget),
        Operation::XkSqThm1 => {
            let k = spec.coordinate.ok_or_else(|| Error::InvalidArgument("xk_sq_thm1 needs \"coordinate\"".into()))?;
            xk_sq_moment_thm1(&d, k, &function()?, budget)
        }
        Operation::ProductMoment => product_moment(&d, &exponents()?, budget),
        Operation::NormalProductMoment => {
            let v = normal_product_moment(d.mu(), d.sigma(), &exponents()?)?;
            Ok(MomentEstimate { value: v, stderr: 0.0, method: crate::moments::Method::Recursion, breakdown: Vec::new() })
        }
        Operation::NormalPowerMoment => {
            let p1 = spec.p1.ok_or_else(|| Error::InvalidArgument("normal_power_moment needs \"p1\"".into()))?;
            normal_power_moment(&d, p1, &function()?, budget)
        }
    }
}

fn moment(o: &Opts, stdout: &mut dyn Write) -> CliResult<()> {
    let path = o.spec.as_ref().ok_or_else(|| Failure::Usage("moment needs --spec file.json".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let spec: MomentSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad spec {}: {e}", path.display())))?;
    let default_budget = Budget::MonteCarlo {
        samples: o.samples.unwrap_or(DEFAULT_SAMPLES),
        seed: o.seed.unwrap_or(DEFAULT_SEED),
    };
    let est = evaluate_spec(&spec, default_budget)?;
    let out = MomentOutput {
        operation: spec.operation,
        method: est.method.to_string(),
        value: est.value,
        stderr: est.stderr,
        breakdown: est.breakdown.into_iter().map(|(term, value)| Term { term, value }).collect(),
    };
    let mut json = serde_json::to_string_pretty(&out).map_err(|e| Failure::Runtime(e.to_string()))?;
    json.push('\n');
    emit(&o.out, &json, stdout)
}

fn verify(o: &Opts, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = VerifyConfig { seed: o.seed.unwrap_or(DEFAULT_SEED), samples: o.samples.unwrap_or(DEFAULT_SAMPLES) };
    if cfg.samples < 100 {
        return Err(Failure::Usage("verify needs --samples of at least 100".into()));
    }
    let start = Instant::now();
    let report = run_all(cfg)?;
    emit(&o.out, &report.to_json(), stdout)?;
    let passed = report.runs.iter().filter(|r| r.pass).count();
    let _ = writeln!(
        stderr,
        "verify: {passed}/{} checks passed in {:.1} s",
        report.runs.len(),
        start.elapsed().as_secs_f64()
    );
    for r in report.runs.iter().filter(|r| !r.pass) {
        let _ = writeln!(stderr, "FAIL [{}] {} ({}, n={}): got {:e}, expected {:e} ± {:e}", r.criterion, r.check, r.family, r.n, r.got, r.expected, r.tolerance);
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn sample(o: &Opts, stdout: &mut dyn Write) -> CliResult<()> {
    let d = match (&o.spec, &o.family) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give either --spec or --family, not both".into())),
        (Some(path), None) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let spec: DistributionSpec =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad spec {}: {e}", path.display())))?;
            spec.build()?
        }
        (None, _) => {
            let family = parse_family(o.family.as_deref())?;
            let (a, b) = parse_dims(o.dims.as_deref().unwrap_or("2"))?;
            if a != b {
                return Err(Failure::Usage("sample takes a single dimension".into()));
            }
            EllipticalDistribution::standard(a, family)?
        }
    };
    let draws = d.sample(o.seed.unwrap_or(DEFAULT_SEED), o.samples.unwrap_or(1000))?;
    let mut text = (1..=d.n()).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for x in draws {
        text.push_str(&x.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(","));
        text.push('\n');
    }
    emit(&o.out, &text, stdout)
}

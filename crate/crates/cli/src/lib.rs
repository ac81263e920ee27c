//! Instance files, run reports, and the `truncvol` command dispatch.

mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use truncvol::arith::Rational;
use truncvol::model::{Instance, ModelError, SeparableConstraint, UnivariateFn};
use truncvol::volume::{estimate, Mode, VolumeError, VolumeEstimate, VolumeOptions};

pub use selftest::{run_selftest, SelftestSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("field {field}: {msg}")]
    Field { field: String, msg: String },
    #[error("validation error: {0}")]
    Validation(#[from] ModelError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_FAILURE,
            CliError::Volume(e) if e.is_budget() => EXIT_BUDGET,
            CliError::Volume(VolumeError::Threads(_)) => EXIT_FAILURE,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    constraints: Vec<ConstraintFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    b: String,
    linear: Option<Vec<String>>,
    fns: Option<Vec<FnFile>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FnFile {
    #[serde(default)]
    poly: Vec<(String, u32)>,
    pwl: Option<Vec<(String, String)>>,
}

fn rational(field: impl Fn() -> String, s: &str) -> Result<Rational, CliError> {
    Rational::from_str(s).map_err(|e| CliError::Field { field: field(), msg: format!("{s:?}: {e}") })
}

/// Parses and validates an instance document.
pub fn parse_instance_str(text: &str) -> Result<Instance, CliError> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| CliError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for (i, c) in file.constraints.iter().enumerate() {
        let bound = rational(|| format!("constraints[{i}].b"), &c.b)?;
        let fns = match (&c.linear, &c.fns) {
            (Some(lin), None) => lin
                .iter()
                .enumerate()
                .map(|(j, a)| rational(|| format!("constraints[{i}].linear[{j}]"), a).map(UnivariateFn::linear))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(fs)) => fs
                .iter()
                .enumerate()
                .map(|(j, f)| parse_fn(i, j, f))
                .collect::<Result<Vec<_>, _>>()?,
            _ => {
                return Err(CliError::Field {
                    field: format!("constraints[{i}]"),
                    msg: "exactly one of \"linear\" and \"fns\" is required".into(),
                })
            }
        };
        constraints.push(SeparableConstraint::new(fns, bound));
    }
    Ok(Instance::new(file.n, constraints)?.validate()?)
}

fn parse_fn(i: usize, j: usize, f: &FnFile) -> Result<UnivariateFn, CliError> {
    let terms = f
        .poly
        .iter()
        .enumerate()
        .map(|(t, (c, e))| Ok((rational(|| format!("constraints[{i}].fns[{j}].poly[{t}]"), c)?, *e)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let pwl = match &f.pwl {
        None => None,
        Some(pts) => Some(
            pts.iter()
                .enumerate()
                .map(|(t, (x, y))| {
                    let field = || format!("constraints[{i}].fns[{j}].pwl[{t}]");
                    Ok((rational(field, x)?, rational(field, y)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        ),
    };
    Ok(UnivariateFn { terms, pwl })
}

pub fn parse_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_instance_str(&text)
}

/// One estimator run; rationals are `p/q` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub estimate: String,
    pub epsilon: String,
    pub mode: String,
    pub u: String,
    pub delta: String,
    pub eta: String,
    pub intercept: Option<String>,
    pub widths: Vec<usize>,
    pub source_widths: Vec<usize>,
    pub elapsed_ms: u64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn from_estimate(e: &VolumeEstimate) -> Self {
        RunReport {
            estimate: e.estimate.to_string(),
            epsilon: e.epsilon.to_string(),
            mode: e.mode.to_string(),
            u: e.u.to_string(),
            delta: e.stats.delta.to_string(),
            eta: e.stats.eta.to_string(),
            intercept: e.stats.intercept.as_ref().map(|r| r.to_string()),
            widths: e.stats.widths.clone(),
            source_widths: e.stats.source_widths.clone(),
            elapsed_ms: e.stats.wall_time.as_millis() as u64,
            warnings: e.stats.flags.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// The estimate as an exact rational.
    pub fn estimate_value(&self) -> Rational {
        Rational::from_str(&self.estimate).expect("estimate is p/q")
    }
}

/// A plain integer or integer scientific notation such as `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let (m, e) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<u32>().map_err(|_| format!("bad exponent in {s:?}"))?),
        None => (s, 0),
    };
    let m: u64 = m.parse().map_err(|_| format!("bad count {s:?}"))?;
    10u64.checked_pow(e).and_then(|p| m.checked_mul(p)).ok_or_else(|| format!("{s:?} overflows"))
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    Rational::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Auto,
    Halfspace,
    Convex,
    MultiHalfspace,
    MultiConvex,
}

impl ModeArg {
    fn mode(self) -> Option<Mode> {
        match self {
            ModeArg::Auto => None,
            ModeArg::Halfspace => Some(Mode::Halfspace),
            ModeArg::Convex => Some(Mode::Convex),
            ModeArg::MultiHalfspace => Some(Mode::MultiHalfspace),
            ModeArg::MultiConvex => Some(Mode::MultiConvex),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "truncvol", version, about = "Deterministic volume estimates for truncated unit cubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the volume of one instance file
    Estimate(EstimateArgs),
    /// Run the built-in corpus against exact and bracketing oracles
    Selftest {
        /// Largest grid enumerated by an oracle
        #[arg(long, default_value = "1e6", value_parser = parse_count)]
        budget: u64,
    },
}

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    #[arg(long, value_name = "PATH")]
    pub instance: PathBuf,
    /// Relative error, as p/q
    #[arg(long, value_parser = parse_rational)]
    pub epsilon: Rational,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 128)]
    pub max_intercept_bits: u32,
    /// Write a dump of the rounded program(s) here
    #[arg(long, value_name = "PATH")]
    pub emit_debug_robp: Option<PathBuf>,
    /// Abort when a layer needs more vertices than this
    #[arg(long)]
    pub max_width: Option<usize>,
    /// Largest lattice scale tabulated
    #[arg(long, default_value_t = truncvol::volume::DEFAULT_MAX_LABELS)]
    pub max_labels: u64,
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run_estimate(args: &EstimateArgs) -> Result<RunReport, CliError> {
    let inst = parse_instance(&args.instance)?;
    let opts = VolumeOptions {
        max_intercept_bits: args.max_intercept_bits,
        threads: args.threads,
        max_width: args.max_width,
        max_labels: args.max_labels,
        retain_debug: args.emit_debug_robp.is_some(),
        ..Default::default()
    };
    let est = estimate(&inst, args.mode.mode(), &args.epsilon, &opts)?;
    if let Some(path) = &args.emit_debug_robp {
        let text = est.debug.clone().unwrap_or_default();
        std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(RunReport::from_estimate(&est))
}

/// Runs one command, writing the JSON report to `out` and diagnostics to `err`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match &cli.command {
        Command::Estimate(args) => match run_estimate(args) {
            Ok(report) => {
                let _ = writeln!(out, "{}", report.to_json());
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                e.exit_code()
            }
        },
        Command::Selftest { budget } => {
            let summary = run_selftest(*budget);
            let _ = writeln!(out, "{}", serde_json::to_string(&summary).expect("summary serializes"));
            for f in &summary.failures {
                let _ = writeln!(err, "FAIL {f}");
            }
            if summary.failures.is_empty() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use truncvol::arith::q;
    use truncvol::model::Kind;

    #[test]
    fn smallest_linear_file() {
        let inst = parse_instance_str(r#"{"n":2,"constraints":[{"b":"1","linear":["1","1"]}]}"#).unwrap();
        assert_eq!(inst.kind(), Kind::Linear);
        assert_eq!(inst.n(), 2);
    }

    #[test]
    fn convex_file() {
        let text = r#"{"n":1,"constraints":[{"b":"1/4","fns":[{"poly":[["1",2]]}]}]}"#;
        let inst = parse_instance_str(text).unwrap();
        assert_eq!(inst.kind(), Kind::Convex);
        assert_eq!(inst.constraints()[0].fns[0], UnivariateFn::monomial(q("1"), 2));
        let text = r#"{"n":1,"constraints":[{"b":"1","fns":[{"pwl":[["0","0"],["1/2","0"],["1","2"]]}]}]}"#;
        assert!(parse_instance_str(text).unwrap().constraints()[0].fns[0].pwl.is_some());
    }

    #[test]
    fn rejections() {
        let text = r#"{"n":1,"constraints":[{"b":"1","fns":[{"poly":[["-1",2]]}]}]}"#;
        assert!(matches!(parse_instance_str(text), Err(CliError::Validation(_))));
        let text = r#"{"n":2,"constraints":[{"b":"1","linear":["1","-1"]},{"b":"1","linear":["1","1"]}]}"#;
        assert!(matches!(
            parse_instance_str(text),
            Err(CliError::Validation(ModelError::NegativeCoefficient { .. }))
        ));
        let text = r#"{"n":1,"constraints":[{"b":"1/0","linear":["1"]}]}"#;
        match parse_instance_str(text) {
            Err(CliError::Field { field, .. }) => assert_eq!(field, "constraints[0].b"),
            other => panic!("{other:?}"),
        }
        let text = "{\"n\":1,\n\"constraints\":[{\"b\":1}]}";
        match parse_instance_str(text) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = r#"{"n":1,"constraints":[{"b":"1"}]}"#;
        assert!(matches!(parse_instance_str(text), Err(CliError::Field { .. })));
    }

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250000"), Ok(250_000));
        assert!(parse_count("1e30").is_err());
        assert!(parse_count("x").is_err());
    }
}

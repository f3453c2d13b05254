//! Command-line surface of the crate.
//!
//! One thin binary with five subcommands: `sample`, `exact`, `solve`,
//! `test` and `power`. Every run is fully determined by its configuration
//! (including the seed), so re-running a command reproduces its output byte
//! for byte. Flags override an optional TOML config file (`--config`),
//! whose sections are named after the subcommands and use the long flag
//! names with `_` instead of `-`. The `THINFORMS_SEED` environment variable
//! overrides the default seed (0) when neither flag nor file provides one.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 solver finished
//! but flagged a non-distributional series, 4 capacity exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_joint_t1, exact_joint_t2, JointMeta, JointPmf};
use crate::forms::{sample_t1_forms, sample_t2_forms, Theorem, ThinningParams};
use crate::gof::{gof_test, GofOptions, PoolingRule, TestMethod};
use crate::pmf::Pmf;
use crate::rng::RngStream;
use crate::series::{t1_normalize, t1_solve, t2_normalize, t2_solve, RecursionReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NON_PGF: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

/// Environment override for the default seed.
pub const SEED_ENV: &str = "THINFORMS_SEED";

#[derive(Parser)]
#[command(
    name = "thinforms",
    version,
    about = "Thinned linear forms: samplers, exact joint laws, coefficient \
             recursions and independence-based goodness-of-fit tests"
)]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw form samples as CSV rows (l1,l2,x,y)
    Sample(SampleArgs),
    /// Exact joint law of a form pair plus an independence summary
    Exact(ExactArgs),
    /// Run a coefficient recursion from (c0, c1); optionally solve c1 by normalization
    Solve(SolveArgs),
    /// Goodness-of-fit test on a file of newline-separated integers
    Test(TestArgs),
    /// Monte Carlo size/power study emitted as a CSV power curve
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Chi2,
    Permutation,
}

impl From<MethodArg> for TestMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Chi2 => TestMethod::Chi2,
            MethodArg::Permutation => TestMethod::Permutation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SampleArgs {
    /// 1 = geometric-characterizing forms (L1,L2), 2 = Poisson forms (K1,K2)
    #[arg(long)]
    theorem: Option<u8>,
    /// Base law as family:param (geometric:2, poisson:1.5, uniform:4)
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Second thinning parameter (theorem 2); defaults to p
    #[arg(long)]
    q: Option<f64>,
    /// Number of samples [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Truncation order of the base law [default: 60]
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    /// RNG seed [default: 0 or THINFORMS_SEED]
    #[arg(long)]
    seed: Option<u64>,
    /// RNG stream id [default: 0]
    #[arg(long)]
    stream: Option<u64>,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExactArgs {
    #[arg(long)]
    theorem: Option<u8>,
    /// Base law as family:param
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Truncation order of the base law [default: 40]
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    /// Output format [default: json]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveArgs {
    #[arg(long)]
    theorem: Option<u8>,
    /// Value of the candidate generating function at zero
    #[arg(long)]
    c0: Option<f64>,
    /// First coefficient; required unless --normalize is given
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Recursion order [default: 30]
    #[arg(long = "K")]
    k: Option<usize>,
    /// Solve c1 from the normalization constraint instead of taking it
    #[arg(long)]
    #[serde(default)]
    normalize: bool,
    /// Normalization tolerance [default: 1e-9]
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TestArgs {
    #[arg(long)]
    theorem: Option<u8>,
    /// Input file of newline-separated non-negative integers
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Independence test backend [default: chi2]
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Permutation rounds [default: 999]
    #[arg(long)]
    rounds: Option<usize>,
    /// Thinning replicates averaged into the statistic [default: 1]
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PowerArgs {
    #[arg(long)]
    theorem: Option<u8>,
    /// Null law as family:param
    #[arg(long)]
    null: Option<String>,
    /// Alternative law as family:param
    #[arg(long)]
    alt: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated sample sizes [default: 1000]
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Monte Carlo trials per law and sample size [default: 500]
    #[arg(long)]
    trials: Option<usize>,
    /// Test level [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Truncation order for sampling the laws [default: 60]
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    sample: SampleArgs,
    exact: ExactArgs,
    solve: SolveArgs,
    test: TestArgs,
    power: PowerArgs,
}

macro_rules! merge_options {
    ($flags:expr, $file:expr, { $($field:ident),* $(,)? }) => {
        $( $flags.$field = $flags.$field.take().or($file.$field); )*
    };
}

/// Entry point used by the binary.
pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}

/// Parses `args`, executes the selected subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Capacity { .. } => EXIT_CAPACITY,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let file = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Sample(mut args) => {
            merge_options!(args, file.sample, { theorem, dist, p, q, n, n_max, seed, stream, out });
            cmd_sample(args)
        }
        Command::Exact(mut args) => {
            merge_options!(args, file.exact, { theorem, dist, p, q, n_max, format, out });
            cmd_exact(args)
        }
        Command::Solve(mut args) => {
            merge_options!(args, file.solve, { theorem, c0, c1, p, q, k, tol, out });
            args.normalize = args.normalize || file.solve.normalize;
            cmd_solve(args)
        }
        Command::Test(mut args) => {
            merge_options!(args, file.test, {
                theorem, input, p, q, method, rounds, replicates, seed, stream, out
            });
            cmd_test(args)
        }
        Command::Power(mut args) => {
            merge_options!(args, file.power, {
                theorem, null, alt, p, q, n, trials, alpha, method, rounds, n_max, seed, stream, out
            });
            cmd_power(args)
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required parameter `{name}`")))
}

fn parse_theorem(value: u8) -> Result<Theorem> {
    match value {
        1 => Ok(Theorem::T1),
        2 => Ok(Theorem::T2),
        other => Err(Error::Config(format!(
            "theorem must be 1 or 2, got {other}"
        ))),
    }
}

fn parse_dist(spec: &str, n_max: usize) -> Result<Pmf> {
    let (family, param) = spec.split_once(':').ok_or_else(|| {
        Error::Config(format!(
            "distribution `{spec}` must be family:param (geometric:2, poisson:1.5, uniform:4)"
        ))
    })?;
    fn bad_param<E>(spec: &str) -> impl Fn(E) -> Error + '_ {
        move |_| Error::Config(format!("invalid parameter in distribution `{spec}`"))
    }
    match family {
        "geometric" => Pmf::geometric(param.parse().map_err(bad_param(spec))?, n_max),
        "poisson" => Pmf::poisson(param.parse().map_err(bad_param(spec))?, n_max),
        "uniform" => Ok(Pmf::uniform(param.parse().map_err(bad_param(spec))?)),
        other => Err(Error::Config(format!(
            "unknown distribution family `{other}` (expected geometric, poisson or uniform)"
        ))),
    }
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{raw}`"))
        }),
        Err(_) => Ok(0),
    }
}

fn thinning_params(p: Option<f64>, q: Option<f64>) -> Result<ThinningParams> {
    let p = required(p, "p")?;
    ThinningParams::new(p, q.unwrap_or(p))
}

/// Floats in CSV output carry 17 significant digits.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => std::io::stdout().lock().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<i32> {
    let theorem = parse_theorem(required(args.theorem, "theorem")?)?;
    let params = thinning_params(args.p, args.q)?;
    let pmf = parse_dist(&required(args.dist, "dist")?, args.n_max.unwrap_or(60))?;
    let n = args.n.unwrap_or(1000);
    let mut rng = RngStream::new(resolve_seed(args.seed)?, args.stream.unwrap_or(0));

    let mut out = String::with_capacity(12 * n + 16);
    out.push_str("l1,l2,x,y\n");
    for _ in 0..n {
        let s = match theorem {
            Theorem::T1 => sample_t1_forms(&pmf, &params, &mut rng)?,
            Theorem::T2 => sample_t2_forms(&pmf, &params, &mut rng)?,
        };
        out.push_str(&format!("{},{},{},{}\n", s.l1, s.l2, s.x, s.y));
    }
    write_output(args.out.as_ref(), &out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExactSummary {
    tv_independence_gap: f64,
    marginal_mean_1: f64,
    marginal_mean_2: f64,
    deficit: f64,
}

#[derive(Serialize)]
struct ExactDocument<'a> {
    meta: &'a JointMeta,
    summary: &'a ExactSummary,
    probs: &'a [Vec<f64>],
}

fn cmd_exact(args: ExactArgs) -> Result<i32> {
    let theorem = parse_theorem(required(args.theorem, "theorem")?)?;
    let params = thinning_params(args.p, args.q)?;
    let pmf = parse_dist(&required(args.dist, "dist")?, args.n_max.unwrap_or(40))?;
    let joint: JointPmf = match theorem {
        Theorem::T1 => exact_joint_t1(&pmf, &params)?,
        Theorem::T2 => exact_joint_t2(&pmf, &params)?,
    };
    let (m1, m2) = joint.marginals();
    let summary = ExactSummary {
        tv_independence_gap: joint.tv_independence_gap(),
        marginal_mean_1: m1.mean(),
        marginal_mean_2: m2.mean(),
        deficit: joint.deficit(),
    };
    eprintln!(
        "tv_independence_gap={} marginal_mean_1={} marginal_mean_2={} deficit={}",
        summary.tv_independence_gap, summary.marginal_mean_1, summary.marginal_mean_2,
        summary.deficit
    );
    let content = match args.format.unwrap_or(FormatArg::Json) {
        FormatArg::Json => {
            let doc = ExactDocument {
                meta: joint.meta(),
                summary: &summary,
                probs: joint.probs(),
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
            text.push('\n');
            text
        }
        FormatArg::Csv => {
            let mut text = String::from("i,j,prob\n");
            for (i, row) in joint.probs().iter().enumerate() {
                for (j, &cell) in row.iter().enumerate() {
                    text.push_str(&format!("{i},{j},{}\n", fmt_float(cell)));
                }
            }
            text
        }
    };
    write_output(args.out.as_ref(), &content)?;
    Ok(EXIT_OK)
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let theorem = parse_theorem(required(args.theorem, "theorem")?)?;
    let c0 = required(args.c0, "c0")?;
    let p = required(args.p, "p")?;
    let order = args.k.unwrap_or(30);
    let tol = args.tol.unwrap_or(1e-9);

    let report: RecursionReport = match theorem {
        Theorem::T1 => {
            let c1 = if args.normalize {
                t1_normalize(c0, p, order, tol)?
            } else {
                required(args.c1, "c1")?
            };
            t1_solve(c0, c1, p, order)?
        }
        Theorem::T2 => {
            let q = required(args.q, "q")?;
            let c1 = if args.normalize {
                t2_normalize(c0, p, q, order, tol)?
            } else {
                required(args.c1, "c1")?
            };
            t2_solve(c0, c1, p, q, order)?
        }
    };
    let mut text = serde_json::to_string_pretty(&report).expect("serializable report");
    text.push('\n');
    write_output(args.out.as_ref(), &text)?;
    Ok(if report.is_pgf { EXIT_OK } else { EXIT_NON_PGF })
}

fn read_integer_file(path: &PathBuf) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: u64 = trimmed.parse().map_err(|_| Error::MalformedInput {
            line: idx + 1,
            reason: format!("`{trimmed}` is not a non-negative integer"),
        })?;
        values.push(value);
    }
    Ok(values)
}

fn gof_options(
    method: Option<MethodArg>,
    rounds: Option<usize>,
    replicates: Option<usize>,
) -> GofOptions {
    GofOptions {
        method: method.map_or(TestMethod::Chi2, TestMethod::from),
        permutation_rounds: rounds.unwrap_or(999),
        replicates: replicates.unwrap_or(1),
        pooling: PoolingRule::default(),
    }
}

fn cmd_test(args: TestArgs) -> Result<i32> {
    let theorem = parse_theorem(required(args.theorem, "theorem")?)?;
    let params = thinning_params(args.p, args.q)?;
    let xs = read_integer_file(&required(args.input, "input")?)?;
    let opts = gof_options(args.method, args.rounds, args.replicates);
    let mut rng = RngStream::new(resolve_seed(args.seed)?, args.stream.unwrap_or(0));
    // accept/reject is data, not exit status
    let report = gof_test(theorem, &xs, &params, &mut rng, &opts)?;
    let mut text = serde_json::to_string_pretty(&report).expect("serializable report");
    text.push('\n');
    write_output(args.out.as_ref(), &text)?;
    Ok(EXIT_OK)
}

fn cmd_power(args: PowerArgs) -> Result<i32> {
    let theorem = parse_theorem(required(args.theorem, "theorem")?)?;
    let params = thinning_params(args.p, args.q)?;
    let n_max = args.n_max.unwrap_or(60);
    let null_law = parse_dist(&required(args.null, "null")?, n_max)?;
    let alt_law = parse_dist(&required(args.alt, "alt")?, n_max)?;
    let ns = args.n.unwrap_or_else(|| vec![1000]);
    let trials = args.trials.unwrap_or(500);
    let alpha = args.alpha.unwrap_or(0.05);
    let opts = gof_options(args.method, args.rounds, None);
    let master = RngStream::new(resolve_seed(args.seed)?, args.stream.unwrap_or(0));

    let mut text = String::from("n,alpha,size,power,se\n");
    for &n in &ns {
        let point = crate::gof::power_study(
            &null_law, &alt_law, n, trials, alpha, theorem, &params, &opts, &master,
        )?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            n,
            fmt_float(alpha),
            fmt_float(point.size),
            fmt_float(point.power),
            fmt_float(point.se_power),
        ));
    }
    write_output(args.out.as_ref(), &text)?;
    Ok(EXIT_OK)
}

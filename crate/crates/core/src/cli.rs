//! Command-line front end used by the `nysmmd` binary.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 when `test`
//! rejects the null hypothesis.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{load_csv, sample_correlated_gaussians, sample_mixture, write_csv, SyntheticSpec};
use crate::error::{file_error, Error, Result};
use crate::harness::{
    estimate_rate, write_results, ExperimentSpec, FeatureCount, FeatureRule,
    RateEstimate, Regime, Scenario,
};
use crate::kernel::DEFAULT_MEDIAN_SUBSET;
use crate::perm_test::{
    run_test, Bandwidth, LandmarkMode, MapSpec, Method, RunOptions, TestConfig, TestOutcome,
};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "NYSMMD_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "nysmmd", version, about = "Nyström MMD permutation two-sample tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether two CSV samples share a distribution; prints JSON.
    Test(TestArgs),
    /// Type-I error study (both samples from the null distribution).
    Level(StudyArgs),
    /// Power study over the scenario's parameter grid.
    Power(StudyArgs),
    /// Power study reported with per-method wall-clock summaries.
    Bench(StudyArgs),
    /// Write synthetic samples as CSV.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Input files start with a header row.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 199)]
    permutations: usize,
    #[arg(long, default_value = "nystrom-uniform")]
    method: String,
    /// Number of landmarks or random features (default ⌈√n⌉ of the larger sample).
    #[arg(long)]
    landmarks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed bandwidth instead of the median heuristic.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MEDIAN_SUBSET)]
    median_subset: usize,
    /// Leverage-score regularization.
    #[arg(long)]
    lambda: Option<f64>,
    /// Compute leverage scores and draw landmarks per sample (voids exact level).
    #[arg(long)]
    split: bool,
    /// Include all permuted statistics in the output.
    #[arg(long)]
    keep_statistics: bool,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// JSON experiment spec; the flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Feature counts; a number or `sqrt`.
    #[arg(long = "landmarks")]
    landmarks: Vec<String>,
    /// Per-sample sizes.
    #[arg(long = "n")]
    sample_sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    rho_x: f64,
    #[arg(long = "rho-y")]
    rho_y: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 199)]
    permutations: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV path (standard output when absent).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Correlated Gaussian sample.
    Gaussian {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Background/signal mixture drawn from two CSV pools.
    Mixture {
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        alpha_mix: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Serialize)]
struct TestReport {
    method: Method,
    n_x: usize,
    n_y: usize,
    ell: Option<usize>,
    #[serde(flatten)]
    outcome: TestOutcome,
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Ok(t) = std::env::var(THREADS_ENV) {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                // fails harmlessly if a pool already exists (e.g. repeated calls in tests)
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got '{t}'");
                return EXIT_USAGE;
            }
        }
    }
    let result = match cli.command {
        Command::Test(a) => run_test_command(a),
        Command::Level(a) => run_study(a, Regime::Null, false),
        Command::Power(a) => run_study(a, Regime::Alternative, false),
        Command::Bench(a) => run_study(a, Regime::Alternative, true),
        Command::Gen(g) => run_gen(g).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn run_test_command(a: TestArgs) -> std::result::Result<i32, Failure> {
    let method: Method = a.method.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let x = load_csv(&a.x, a.header)?;
    let y = load_csv(&a.y, a.header)?;
    let ell = a
        .landmarks
        .unwrap_or_else(|| FeatureCount::Rule(FeatureRule::Sqrt).resolve(x.n().max(y.n()), method));
    let spec = match method.spec(ell) {
        MapSpec::Nystrom { sampler, ell, .. } => MapSpec::Nystrom {
            sampler,
            ell,
            lambda: a.lambda,
            mode: if a.split {
                LandmarkMode::Split
            } else {
                LandmarkMode::Pooled
            },
        },
        other => other,
    };
    let cfg = TestConfig {
        alpha: a.alpha,
        permutations: a.permutations,
        seed: a.seed,
    };
    let opts = RunOptions {
        bandwidth: match a.bandwidth {
            Some(h) => Bandwidth::Fixed(h),
            None => Bandwidth::Median {
                subset_size: a.median_subset,
            },
        },
        keep_statistics: a.keep_statistics,
        ..RunOptions::default()
    };
    let outcome = run_test(&x, &y, &cfg, &spec, &opts).map_err(|e| match e {
        Error::InvalidParameter(m) => Failure::Usage(m),
        other => Failure::Runtime(other),
    })?;
    let reject = outcome.reject;
    let report = TestReport {
        method,
        n_x: x.n(),
        n_y: y.n(),
        ell: method.uses_features().then_some(ell),
        outcome,
    };
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report).map_err(Error::from)?;
    writeln!(out).map_err(Error::from)?;
    Ok(if reject { EXIT_REJECT } else { EXIT_OK })
}

fn spec_from_flags(a: &StudyArgs, regime: Regime) -> std::result::Result<ExperimentSpec, Failure> {
    let usage = |m: String| Failure::Usage(m);
    let methods = if a.methods.is_empty() {
        vec![Method::NystromUniform, Method::NystromAkrls, Method::Rff]
    } else {
        a.methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| usage(e.to_string()))?
    };
    let landmarks = if a.landmarks.is_empty() {
        vec![FeatureCount::Rule(FeatureRule::Sqrt)]
    } else {
        a.landmarks
            .iter()
            .map(|s| match s.as_str() {
                "sqrt" => Ok(FeatureCount::Rule(FeatureRule::Sqrt)),
                other => other
                    .parse()
                    .map(FeatureCount::Fixed)
                    .map_err(|_| usage(format!("invalid --landmarks value '{other}'"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    let rho_y = if a.rho_y.is_empty() {
        match regime {
            Regime::Null => vec![a.rho_x],
            Regime::Alternative => return Err(usage("power studies need at least one --rho-y".into())),
        }
    } else {
        a.rho_y.clone()
    };
    Ok(ExperimentSpec {
        scenario: Scenario::CorrelatedGaussian {
            d: a.d,
            rho_x: a.rho_x,
            rho_y,
        },
        methods,
        landmarks,
        sample_sizes: if a.sample_sizes.is_empty() {
            vec![1000]
        } else {
            a.sample_sizes.clone()
        },
        alpha: a.alpha,
        permutations: a.permutations,
        repetitions: a.reps,
        seed: a.seed,
        output: a.output.clone(),
        paired: false,
        bandwidth: None,
        median_subset: DEFAULT_MEDIAN_SUBSET,
        landmark_mode: LandmarkMode::Pooled,
        akrls: None,
        confidence: 0.95,
    })
}

fn run_study(a: StudyArgs, regime: Regime, bench: bool) -> std::result::Result<i32, Failure> {
    let spec = match &a.spec {
        Some(path) => ExperimentSpec::load(path).map_err(|e| match e {
            Error::Json(_) | Error::InvalidParameter(_) => {
                Failure::Usage(format!("{}: {e}", path.display()))
            }
            other => Failure::Runtime(other),
        })?,
        None => {
            let s = spec_from_flags(&a, regime)?;
            s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            s
        }
    };
    let cells = estimate_rate(&spec, regime)?;
    let mut estimates: Vec<RateEstimate> = Vec::new();
    let mut failed = 0usize;
    for cell in cells {
        match cell {
            Ok(e) => estimates.push(e),
            Err(e) => {
                failed += 1;
                eprintln!(
                    "cell failed: method={} ell={} n={} param={}: {}",
                    e.method, e.ell, e.n, e.param, e.message
                );
            }
        }
    }
    match &spec.output {
        Some(path) => write_results(std::fs::File::create(path).map_err(file_error(path))?, &estimates)?,
        None => write_results(std::io::stdout().lock(), &estimates)?,
    }
    if bench {
        eprintln!("{:<16} {:>6} {:>7} {:>8} {:>7} {:>12}", "method", "ell", "n", "param", "rate", "runtime_s");
        for e in &estimates {
            eprintln!(
                "{:<16} {:>6} {:>7} {:>8.3} {:>7.3} {:>12.5}",
                e.method.name(),
                e.ell,
                e.n_x,
                e.param,
                e.rate,
                e.mean_runtime
            );
        }
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

fn run_gen(g: GenCommand) -> std::result::Result<(), Failure> {
    match g {
        GenCommand::Gaussian { n, d, rho, seed, out } => {
            let data = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(d, rho, n, seed))
                .map_err(|e| match e {
                    Error::InvalidParameter(m) => Failure::Usage(m),
                    other => Failure::Runtime(other),
                })?;
            write_csv(out, &data, None)?;
        }
        GenCommand::Mixture {
            background,
            signal,
            alpha_mix,
            n,
            seed,
            header,
            out,
        } => {
            let bg = load_csv(background, header)?;
            let sig = load_csv(signal, header)?;
            write_csv(out, &sample_mixture(&bg, &sig, alpha_mix, n, seed)?, None)?;
        }
    }
    Ok(())
}

//! `rmsprop-lab` command line.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime abort or bound
//! violation, 3 probe failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ExperimentFile;
use crate::error::{Error, Result};
use crate::harness::t_sweep;
use crate::report::{self, SlopeSummary};
use crate::verify::{run_suite, Suite, SuiteReport, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PROBE: i32 = 3;

type Sink = dyn Write + Send;

#[derive(Debug, Parser)]
#[command(name = "rmsprop-lab", version, about = "RMSProp runs, bound evaluation and inequality checks")]
pub struct Cli {
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sweeps and Monte-Carlo probes.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and write CSV, summary JSON and plot data.
    Run { config: PathBuf },
    /// Print the bound constants as JSON without running anything.
    Bound { config: PathBuf },
    /// Run a probe suite and print a pass/fail table.
    Verify {
        suite: SuiteArg,
        /// Random sequences for lemma1.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Momentum values for equivalence; repeat or comma-separate.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        /// Steps per equivalence trajectory.
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
    },
    /// Seed-averaged runs over a horizon grid against the bound.
    Sweep { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Lemma1,
    Lemma2,
    Lemma6,
    Equivalence,
    Assumptions,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Lemma1 => vec![Suite::Lemma1],
            SuiteArg::Lemma2 => vec![Suite::Lemma2],
            SuiteArg::Lemma6 => vec![Suite::Lemma6],
            SuiteArg::Equivalence => vec![Suite::Equivalence],
            SuiteArg::Assumptions => vec![Suite::Assumptions],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

/// Parse `std::env::args`, run, and return the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    execute(&cli, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn execute(cli: &Cli, out: &mut Sink, err: &mut Sink) -> i32 {
    let jobs = match &cli.command {
        Command::Verify { .. } => cli.jobs,
        Command::Run { config } | Command::Bound { config } | Command::Sweep { config } => {
            match load(cli, config) {
                Ok(f) => cli.jobs.or(f.jobs),
                Err(e) => return fail(err, EXIT_CONFIG, &e),
            }
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return fail(err, EXIT_CONFIG, &Error::Config(e.to_string())),
    };
    pool.install(|| dispatch(cli, out, err))
}

fn dispatch(cli: &Cli, out: &mut Sink, err: &mut Sink) -> i32 {
    match &cli.command {
        Command::Run { config } => cmd_run(cli, config, out, err),
        Command::Bound { config } => cmd_bound(cli, config, out, err),
        Command::Verify { suite, n, theta, steps } => {
            let mut opts = VerifyOptions {
                n: *n,
                steps: *steps,
                seed: cli.seed.unwrap_or(0),
                ..VerifyOptions::default()
            };
            if !theta.is_empty() {
                opts.thetas = theta.clone();
            }
            cmd_verify(&suite.suites(), &opts, out, err)
        }
        Command::Sweep { config } => cmd_sweep(cli, config, out, err),
    }
}

fn fail(err: &mut Sink, code: i32, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    code
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentFile> {
    let mut f = ExperimentFile::load(path)?;
    if let Some(seed) = cli.seed {
        f.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        f.out_dir = dir.clone();
    }
    Ok(f)
}

pub fn cmd_run(cli: &Cli, config: &Path, out: &mut Sink, err: &mut Sink) -> i32 {
    let file = match load(cli, config) {
        Ok(f) => f,
        Err(e) => return fail(err, EXIT_CONFIG, &e),
    };
    let prepared = match file.run_config().prepare() {
        Ok(p) => p,
        Err(e) => return fail(err, EXIT_CONFIG, &e),
    };
    let (records, summary) = match prepared.run() {
        Ok(r) => r,
        Err(e) => return fail(err, EXIT_RUNTIME, &e),
    };
    match report::write_run(&file.out_dir, &records, &summary) {
        Ok(paths) => {
            let _ = writeln!(
                out,
                "avg_g1 = {}  bound = {}  ({} records, {} files in {})",
                summary.avg_g1,
                summary.bound.rhs,
                records.len(),
                paths.len(),
                file.out_dir.display()
            );
            EXIT_OK
        }
        Err(e) => fail(err, EXIT_RUNTIME, &e),
    }
}

pub fn cmd_bound(cli: &Cli, config: &Path, out: &mut Sink, err: &mut Sink) -> i32 {
    let result = load(cli, config)
        .and_then(|f| f.run_config().prepare())
        .and_then(|p| report::to_json(&p.bound));
    match result {
        Ok(json) => {
            let _ = out.write_all(json.as_bytes());
            EXIT_OK
        }
        Err(e) => fail(err, EXIT_CONFIG, &e),
    }
}

fn print_report(out: &mut Sink, r: &SuiteReport) {
    let _ = writeln!(out, "{}: {}/{} pass", r.suite, r.passed, r.total);
    let _ = writeln!(
        out,
        "  {:<36} {:>14} {:>14} {:>14}  status",
        "probe (tightest)", "lhs", "rhs", "margin"
    );
    for p in &r.tightest {
        let _ = writeln!(
            out,
            "  {:<36} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
            p.name,
            p.lhs,
            p.rhs,
            p.margin,
            if p.passed { "pass" } else { "FAIL" }
        );
    }
    for p in &r.failures {
        let _ = writeln!(
            out,
            "  FAILED {} lhs={:e} rhs={:e} margin={:e}",
            p.name, p.lhs, p.rhs, p.margin
        );
    }
}

pub fn cmd_verify(suites: &[Suite], opts: &VerifyOptions, out: &mut Sink, err: &mut Sink) -> i32 {
    let mut all_ok = true;
    for &suite in suites {
        match run_suite(suite, opts) {
            Ok(r) => {
                print_report(out, &r);
                all_ok &= r.ok();
            }
            Err(e) => return fail(err, EXIT_RUNTIME, &e),
        }
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_PROBE
    }
}

pub fn cmd_sweep(cli: &Cli, config: &Path, out: &mut Sink, err: &mut Sink) -> i32 {
    let file = match load(cli, config) {
        Ok(f) => f,
        Err(e) => return fail(err, EXIT_CONFIG, &e),
    };
    let Some(sweep) = &file.sweep else {
        return fail(err, EXIT_CONFIG, &Error::Config("missing [sweep] section".into()));
    };
    let cfg = file.run_config();
    // Validate everything that does not depend on the horizon up front.
    if let Err(e) = cfg.prepare() {
        if !matches!(e, Error::Inadmissible { .. }) {
            return fail(err, EXIT_CONFIG, &e);
        }
    }
    let outcome = match t_sweep(&cfg, &sweep.horizons, sweep.seeds) {
        Ok(o) => o,
        Err(e @ (Error::Config(_) | Error::InvalidInput(_))) => return fail(err, EXIT_CONFIG, &e),
        Err(e) => return fail(err, EXIT_RUNTIME, &e),
    };
    if let Err(e) = report::write_sweep(&file.out_dir, &outcome) {
        return fail(err, EXIT_RUNTIME, &e);
    }
    let _ = writeln!(out, "{:>8} {:>14} {:>12} {:>14}", "T", "mean_g1", "se", "bound");
    for p in &outcome.points {
        let _ = writeln!(
            out,
            "{:>8} {:>14.6e} {:>12.3e} {:>14.6e}{}",
            p.horizon,
            p.mean,
            p.se,
            p.rhs,
            if p.violation { "  BOUND VIOLATION" } else { "" }
        );
    }
    for t in &outcome.skipped {
        let _ = writeln!(out, "skipped T = {t}: below e^2/lambda");
    }
    let slopes = SlopeSummary::from_sweep(&outcome);
    if let Some(f) = slopes.empirical {
        let _ = writeln!(out, "empirical slope {:.4} (r2 {:.4})", f.slope, f.r2);
    }
    if let Some(f) = slopes.bound {
        let _ = writeln!(out, "bound slope     {:.4} (r2 {:.4})", f.slope, f.r2);
    }
    let violations = outcome.violations();
    if violations.is_empty() {
        EXIT_OK
    } else {
        let _ = writeln!(err, "BOUND VIOLATION at T = {violations:?}");
        EXIT_RUNTIME
    }
}

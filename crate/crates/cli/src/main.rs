//! `sconflict`: command line front end for scenario runs and verification.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info, warn};

use structural_conflict::batch::Execution;
use structural_conflict::error::{Error, Result};
use structural_conflict::measures::{
    hahn_jordan_with_tolerance, measure_from_matrix, DistributionFunction,
};
use structural_conflict::scenario::{
    self, bundled, run_scenario_with, sweep_depths, verify_suite, write_limits_csv, CheckStatus,
    RunReport, ScenarioConfig, Stages, VerifyReport, SUITES,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_VERIFICATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "sconflict",
    version,
    about = "Conflict dynamics of structured measures on n-adic partitions"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name instead of a file.
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomly drawn matrices.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Convergence tolerance of the dynamics.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Iteration cap of the dynamics.
    #[arg(long = "max-iter", global = true, value_name = "N")]
    max_iter: Option<usize>,
    /// Format of what goes to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Run batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Mu,
    Nu,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Iterate the conflict dynamics on the scenario's level.
    Simulate,
    /// Closed-form limit state for each level of the scenario.
    Limit,
    /// Closed-form reports over a range of levels.
    Sweep {
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Reclaim, reversal and occupation-strategy analyses.
    Control,
    /// Replay the worked examples and randomized checks.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Sample the distribution function of a level measure.
    EmitDistribution {
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Which::Mu)]
        measure: Which,
        /// Level to sample; defaults to the scenario's level.
        #[arg(long)]
        level: Option<usize>,
    },
}

impl Global {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut config = match (&self.config, &self.scenario) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, Some(name)) => bundled(name)?,
            (None, None) => {
                return Err(Error::Config(format!(
                    "give --config PATH or --scenario NAME (bundled: {})",
                    scenario::BUNDLED
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(tol) = self.tol {
            config.dynamics.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            config.dynamics.max_iter = max_iter;
        }
        if let Some(out) = &self.out {
            config.output.dir = Some(out.clone());
        }
        config.validate()?;
        debug!("scenario {} at levels {:?}", config.name, config.levels());
        Ok(config)
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// Some asserted check did not hold.
    Failed(usize),
}

fn stdout() -> io::BufWriter<io::StdoutLock<'static>> {
    io::BufWriter::new(io::stdout().lock())
}

fn emit_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = stdout();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn checks_csv<W: Write>(writer: W, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "lhs", "relation", "rhs", "slack", "holds"])?;
    for c in &report.checks {
        w.write_record([
            c.label.clone(),
            c.lhs.to_string(),
            c.relation.to_string(),
            c.rhs.to_string(),
            c.slack.to_string(),
            c.holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn levels_csv<W: Write>(writer: W, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "level",
        "cells",
        "D",
        "lambda_plus",
        "lambda_minus",
        "lambda_zero",
        "mu_limit_support",
        "nu_limit_support",
    ])?;
    let blank = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for l in reports.iter().flat_map(|r| &r.levels) {
        w.write_record([
            l.level.to_string(),
            l.cells.to_string(),
            l.variation_distance.to_string(),
            l.lambda_plus.to_string(),
            l.lambda_minus.to_string(),
            l.lambda_zero.to_string(),
            blank(l.mu_limit_support),
            blank(l.nu_limit_support),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn report_outcome(report: &RunReport) -> Outcome {
    let failed: Vec<_> = report.failed_checks().collect();
    for c in &failed {
        warn!("check failed: {c}");
    }
    if failed.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Failed(failed.len())
    }
}

fn run_stage(
    global: &Global,
    stages: Stages,
    csv: impl FnOnce(&ScenarioConfig, &RunReport) -> Result<()>,
) -> Result<Outcome> {
    let config = global.scenario()?;
    let report = run_scenario_with(&config, stages)?;
    info!(
        "{} finished in {:.3}s",
        config.name, report.wall_time_seconds
    );
    match global.format {
        Format::Json => emit_json(&report)?,
        Format::Csv => csv(&config, &report)?,
    }
    Ok(report_outcome(&report))
}

fn limits_to_stdout(config: &ScenarioConfig) -> Result<()> {
    let resolved = config.resolve()?;
    let level = config.primary_level();
    let mu = measure_from_matrix(&resolved.p, &resolved.scheme, level)?;
    let nu = measure_from_matrix(&resolved.r, &resolved.scheme, level)?;
    let d = hahn_jordan_with_tolerance(&mu, &nu, config.dynamics.sign_tol)?;
    write_limits_csv(stdout(), &mu, &nu, &d)
}

fn trajectory_to_stdout(config: &ScenarioConfig) -> Result<()> {
    let resolved = config.resolve()?;
    scenario::simulate(config, &resolved)?.write_csv(stdout())
}

fn write_verify(report: &VerifyReport, format: Format, out: Option<&Path>) -> Result<()> {
    for c in &report.checks {
        eprintln!("{c}");
    }
    eprintln!(
        "{}: {} passed, {} failed, {} unverifiable, {} info",
        report.suite, report.passed, report.failed, report.unverifiable, report.info
    );
    let table = |w: &mut dyn Write| -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "suite",
            "claim",
            "expected",
            "computed",
            "tolerance",
            "status",
            "note",
        ])?;
        for c in &report.checks {
            w.write_record([
                c.suite.clone(),
                c.claim.clone(),
                c.expected.to_string(),
                c.computed.to_string(),
                c.tolerance.to_string(),
                serde_json::to_value(c.status)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                c.note.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    match format {
        Format::Json => emit_json(report)?,
        Format::Csv => table(&mut stdout())?,
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("verify.json"),
            serde_json::to_string_pretty(report)?,
        )?;
        table(&mut fs::File::create(dir.join("verify.csv"))?)?;
    }
    Ok(())
}

fn emit_distribution(
    global: &Global,
    samples: usize,
    which: Which,
    level: Option<usize>,
) -> Result<Outcome> {
    if samples < 2 {
        return Err(Error::Config(format!(
            "--samples must be at least 2, got {samples}"
        )));
    }
    let config = global.scenario()?;
    let resolved = config.resolve()?;
    let level = level.unwrap_or_else(|| config.primary_level());
    let matrix = match which {
        Which::Mu => &resolved.p,
        Which::Nu => &resolved.r,
    };
    let measure = measure_from_matrix(matrix, &resolved.scheme, level)?;
    let points = DistributionFunction::new(&measure)?.samples(samples);
    let table = |w: &mut dyn Write| -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["x", "F"])?;
        for (x, f) in &points {
            w.write_record([x.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    match global.format {
        Format::Json => emit_json(&points)?,
        Format::Csv => table(&mut stdout())?,
    }
    if let Some(dir) = &global.out {
        fs::create_dir_all(dir)?;
        table(&mut fs::File::create(dir.join("distribution.csv"))?)?;
    }
    Ok(Outcome::Ok)
}

fn run(cli: Cli) -> Result<Outcome> {
    let global = &cli.global;
    match cli.command {
        Command::Simulate => run_stage(
            global,
            Stages {
                dynamics: true,
                control: false,
            },
            |config, _| trajectory_to_stdout(config),
        ),
        Command::Limit => run_stage(global, Stages::LIMITS, |config, report| {
            if report.levels.len() == 1 {
                limits_to_stdout(config)
            } else {
                levels_csv(stdout(), std::slice::from_ref(report))
            }
        }),
        Command::Control => run_stage(
            global,
            Stages {
                dynamics: false,
                control: true,
            },
            |_, report| checks_csv(stdout(), report),
        ),
        Command::Sweep { from, to } => {
            let config = global.scenario()?;
            let reports = sweep_depths(&config, from, to, global.execution())?;
            match global.format {
                Format::Json => emit_json(&reports)?,
                Format::Csv => levels_csv(stdout(), &reports)?,
            }
            let failed: usize = reports.iter().map(|r| r.failed_checks().count()).sum();
            let distances: Vec<f64> = reports
                .iter()
                .flat_map(|r| &r.levels)
                .map(|l| l.variation_distance)
                .collect();
            let decreases = distances.windows(2).filter(|w| w[0] > w[1] + 1e-12).count();
            if decreases > 0 {
                warn!("variation distance decreased {decreases} time(s) over the sweep");
            }
            Ok(if failed + decreases == 0 {
                Outcome::Ok
            } else {
                Outcome::Failed(failed + decreases)
            })
        }
        Command::Verify { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Error::UnknownSuite {
                    name: suite,
                    available: SUITES.join(", "),
                });
            }
            let report = verify_suite(&suite, global.execution())?;
            write_verify(&report, global.format, global.out.as_deref())?;
            let failed = report
                .checks
                .iter()
                .filter(|c| c.status == CheckStatus::Fail)
                .count();
            Ok(if failed == 0 {
                Outcome::Ok
            } else {
                Outcome::Failed(failed)
            })
        }
        Command::EmitDistribution {
            samples,
            measure,
            level,
        } => emit_distribution(global, samples, measure, level),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(n)) => {
            eprintln!("error: {n} check(s) failed");
            ExitCode::from(EXIT_VERIFICATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if !e.is_validation() {
                debug!("non-validation failure: {e:?}");
            }
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

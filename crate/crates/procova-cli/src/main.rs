//! Command-line front end: two-stage fits on CSV data (`fit`), scenario
//! replication runs (`simulate`), and the self-validation suite (`check`).
//!
//! Exit codes: 0 success, 1 validation-check failure, 2 input/schema error,
//! 3 estimation failure.

mod io;

use clap::{Parser, Subcommand, ValueEnum};
use procova_core::check::{run_checks, ToleranceProfile};
use procova_core::sim::{run_replications, OutcomeModel, ScenarioConfig, ShiftPattern};
use procova_core::{fit_procova, fit_prognostic, summarize, Error, ModelSpec};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;
const EXIT_ESTIMATION_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "procova",
    version,
    about = "Prognostic covariate adjustment: two-stage treatment-effect estimation \
             with known-score and estimation-aware sandwich variances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Ancova,
    AncovaCentered,
    Anhecova,
}

impl From<ModelArg> for ModelSpec {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ancova => ModelSpec::Ancova,
            ModelArg::AncovaCentered => ModelSpec::AncovaCentered,
            ModelArg::Anhecova => ModelSpec::Anhecova,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Two-stage fit on user-supplied trial and historical CSVs.
    Fit {
        /// Trial data: header `y,a,<covariates...>`.
        trial_csv: PathBuf,
        /// Historical control data: header `y,<same covariates...>`.
        historical_csv: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Ancova)]
        model: ModelArg,
        /// Confidence level, strictly between 0.5 and 1.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Scenario replication run with coverage and variance-ratio metrics.
    Simulate {
        /// Outcome model A..D.
        #[arg(long)]
        scenario: String,
        /// Covariate-shift pattern 1..9.
        #[arg(long)]
        shift: u8,
        /// Trial sample size per replication (minimum 10).
        #[arg(long)]
        n: usize,
        /// Historical sample size per replication.
        #[arg(long = "n-hist")]
        n_hist: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModelArg::Ancova)]
        model: ModelArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Worker threads; metrics are identical for any value.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Output base path; writes `<out>.metrics.csv` and
        /// `<out>.summary.json`. Prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Runs the exact-identity and finite-difference validation suite.
    Check {
        /// Tolerance profile: `default`, or `strict` (every tolerance halved).
        #[arg(long, default_value = "default")]
        profile: String,
        /// Fault-injection hook: offset added to one entry of the analytic
        /// cross-derivative matrix; any nonzero value must fail the gate.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_q1: f64,
    },
}

fn estimation_exit(err: &Error) -> u8 {
    match err {
        Error::DimensionMismatch(_)
        | Error::InvalidConfig(_)
        | Error::InvalidProbability(_)
        | Error::InvalidTarget(_) => EXIT_INPUT_ERROR,
        _ => EXIT_ESTIMATION_FAILURE,
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_fit(
    trial_csv: &PathBuf,
    historical_csv: &PathBuf,
    model: ModelSpec,
    level: f64,
    out: &Option<PathBuf>,
    format: Format,
) -> u8 {
    if !(0.5 < level && level < 1.0) {
        eprintln!("error: --level must lie strictly between 0.5 and 1, got {level}");
        return EXIT_INPUT_ERROR;
    }
    for path in [trial_csv, historical_csv] {
        if !path.exists() {
            eprintln!("error: input file {} does not exist", path.display());
            return EXIT_INPUT_ERROR;
        }
    }
    let (trial, covariate_names) = match io::read_trial_csv(trial_csv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("schema error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    let historical = match io::read_historical_csv(historical_csv, &covariate_names) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("schema error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    let report = (|| -> procova_core::Result<io::FitReport> {
        let prog = fit_prognostic(&historical)?;
        let fit = fit_procova(&trial, &prog, model)?;
        let rows = summarize(&fit, level)?;
        Ok(io::fit_report(&fit, &rows, level))
    })();
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("estimation error: {e}");
            return estimation_exit(&e);
        }
    };
    let rendered = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("serializable report");
            s.push('\n');
            s
        }
        Format::Csv => io::fit_report_csv(&report),
    };
    match write_or_print(out, &rendered) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    scenario: &str,
    shift: u8,
    n: usize,
    n_hist: usize,
    reps: usize,
    seed: u64,
    model: ModelSpec,
    level: f64,
    threads: usize,
    out: &Option<PathBuf>,
    format: Format,
) -> u8 {
    let outcome_model = match OutcomeModel::from_str(scenario) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    let shift_pattern = match ShiftPattern::new(shift) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    if n < 10 {
        eprintln!("error: --n must be at least 10, got {n}");
        return EXIT_INPUT_ERROR;
    }
    if !(0.5 < level && level < 1.0) {
        eprintln!("error: --level must lie strictly between 0.5 and 1, got {level}");
        return EXIT_INPUT_ERROR;
    }
    let config = ScenarioConfig {
        outcome_model,
        shift_pattern,
        n_trial: n,
        n_hist,
        replications: reps,
        seed,
        spec: model,
        level,
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_INPUT_ERROR;
    }
    let metrics = match run_replications(&config, threads) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("estimation error: {e}");
            return estimation_exit(&e);
        }
    };
    let summary = io::simulation_summary(&config, &metrics);
    let mut json = serde_json::to_string_pretty(&summary).expect("serializable summary");
    json.push('\n');
    let csv = io::metrics_csv(&config, &metrics);
    match out {
        Some(base) => {
            let mut csv_path = base.as_os_str().to_owned();
            csv_path.push(".metrics.csv");
            let mut json_path = base.as_os_str().to_owned();
            json_path.push(".summary.json");
            for (path, content) in [(csv_path, &csv), (json_path, &json)] {
                if let Err(e) = std::fs::write(&path, content) {
                    eprintln!("error: cannot write {}: {e}", PathBuf::from(&path).display());
                    return EXIT_INPUT_ERROR;
                }
            }
            eprintln!(
                "wrote {}.metrics.csv and {}.summary.json ({} completed, {} failed)",
                base.display(),
                base.display(),
                metrics.replications_completed,
                metrics.replications_failed
            );
            0
        }
        None => {
            match format {
                Format::Json => print!("{json}"),
                Format::Csv => print!("{csv}"),
            }
            0
        }
    }
}

fn cmd_check(profile: &str, perturb_q1: f64) -> u8 {
    let profile = match ToleranceProfile::by_name(profile) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    let report = match run_checks(&profile, perturb_q1) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("estimation error: {e}");
            return estimation_exit(&e);
        }
    };
    println!("validation suite, tolerance profile '{}':", profile.name);
    for o in &report.outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} (max discrepancy {:.3e}, tolerance {:.3e})",
            o.name, o.max_discrepancy, o.tolerance
        );
    }
    if report.all_passed() {
        0
    } else {
        EXIT_CHECK_FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Fit { trial_csv, historical_csv, model, level, out, format } => {
            cmd_fit(trial_csv, historical_csv, (*model).into(), *level, out, *format)
        }
        Command::Simulate {
            scenario,
            shift,
            n,
            n_hist,
            reps,
            seed,
            model,
            level,
            threads,
            out,
            format,
        } => cmd_simulate(
            scenario,
            *shift,
            *n,
            *n_hist,
            *reps,
            *seed,
            (*model).into(),
            *level,
            *threads,
            out,
            *format,
        ),
        Command::Check { profile, perturb_q1 } => cmd_check(profile, *perturb_q1),
    };
    ExitCode::from(code)
}

//! Command-line front end: fit, pdmr, predict, simulate and diagnose.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::CliError;

#[derive(Debug, Parser)]
#[command(name = "catfuse", version, about = "Partition selection for regression with categorical predictors")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Group Lasso fit at one λ or along a net.
    Fit(FitArgs),
    /// Screening, level fusion and model selection.
    Pdmr(PdmrArgs),
    /// Predictions from a saved model.
    Predict(PredictArgs),
    /// Simulation benchmark.
    Simulate(SimulateArgs),
    /// Theory diagnostics for a simulation setting.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    #[serde(skip)]
    input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    /// JSON schema forcing predictor kinds and level order.
    #[arg(long)]
    #[serde(skip)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SolverArgs {
    /// Weights are column norms raised to this power.
    #[arg(long, default_value_t = 1.0)]
    weight_exponent: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    penalize_intercept: bool,
    #[arg(long, default_value_t = 1e-5)]
    kkt_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
struct NetArgs {
    /// Single penalty level instead of a net.
    #[arg(long, conflicts_with_all = ["nlambda", "lambda_ratio"])]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 30)]
    nlambda: usize,
    /// Smallest λ over λ_max; default 0.01 when n < p, else 1e-4.
    #[arg(long)]
    lambda_ratio: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficient CSV (lambda, factor, level, coefficient); stdout if absent.
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PdmrArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Fixed criterion penalty λ_ic.
    #[arg(long, conflicts_with = "ric")]
    lambda_ic: Option<f64>,
    /// Risk inflation criterion, λ_ic² = 2σ² log p (default for nets).
    #[arg(long)]
    ric: bool,
    /// Known noise level for RIC; estimated when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    output: PathBuf,
    /// Selection table CSV.
    #[arg(long)]
    #[serde(skip)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    #[serde(skip)]
    model: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    input: PathBuf,
    /// Map levels missing from the model to the reference level.
    #[arg(long)]
    unseen_as_reference: bool,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Pdmr,
    Grouplasso,
    Oracle,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    setting: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Comma separated SNR values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Pdmr)]
    method: Method,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
    #[arg(long, default_value_t = 100)]
    factors: usize,
    /// Net length for pdmr and grouplasso.
    #[arg(long, default_value_t = 30)]
    nlambda: usize,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct DiagnoseArgs {
    #[arg(long)]
    setting: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    snr: f64,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Penalty for screening and the criterion; chosen from the theory when absent.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    factors: usize,
    /// Random restarts of the cone search.
    #[arg(long, default_value_t = 8)]
    cone_budget: usize,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Pdmr(a) => commands::pdmr(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let err = CliError::Input(msg.lines().next().unwrap_or_default().trim_start_matches("error: ").to_owned());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

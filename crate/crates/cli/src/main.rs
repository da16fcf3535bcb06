//! `breathmark`: simulate, fit, classify and evaluate respiratory-state
//! cohorts from the command line.
//!
//! Every command writes its artifacts plus a `manifest.json` (configuration,
//! tool version, seed, timestamp) into the `--out` directory. Exit codes: 0 on
//! success, 1 when a computation fails, 2 for usage or input errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "breathmark", version, about = "Markov and semi-Markov modelling of respiratory-state sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Directory receiving the artifacts and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate in Hz for CSV cohorts and simulated sequences.
    #[arg(long, default_value_t = breathmark_core::sequences::DEFAULT_SAMPLING_RATE_HZ)]
    pub fs: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Semi-Markov model JSON for the success class (default: built-in published model).
    #[arg(long)]
    pub model_success: Option<PathBuf>,
    /// Semi-Markov model JSON for the failure class (default: built-in published model).
    #[arg(long)]
    pub model_failure: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Simulate a labelled cohort from the two class models.
    Simulate(SimulateArgs),
    /// Fit per-class semi-Markov and Markov models to a cohort.
    Fit(FitArgs),
    /// Label each subject of a cohort by likelihood ratio under the class models.
    Classify(ClassifyArgs),
    /// Extract dwell, occurrence and transition-rate features.
    Features(InputArgs),
    /// Leave-one-out evaluation of a classification method.
    Evaluate(EvaluateArgs),
    /// Symmetric KL divergence between transition matrices.
    CompareKl(CompareKlArgs),
    /// ROC sweep over gamma at a fixed C for an SVM method.
    Roc(RocArgs),
    /// Bootstrap standard errors of per-class state fractions.
    Bootstrap(BootstrapArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 136)]
    pub n_success: usize,
    #[arg(long, default_value_t = 50)]
    pub n_failure: usize,
    /// Seconds per subject.
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cohort file: CSV (subject_id,label,state,duration_samples) or JSON.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Keep the first and last run of each sequence in the dwell pools.
    #[arg(long)]
    pub include_censored: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `all` or a state name for a per-state likelihood.
    #[arg(long, default_value = "all")]
    pub state: String,
    /// Per-state likelihoods use transitions only.
    #[arg(long)]
    pub exclude_dwell: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// markov, lk-all, lk-<state>, or svm-<feature set> such as svm-dw-oc-tr-all.
    #[arg(long)]
    pub method: Option<String>,
    /// Shorthand for `--method lk-<state>`.
    #[arg(long)]
    pub state: Option<String>,
    /// Comma-separated C values; `2^k` is accepted.
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Comma-separated gamma values; `2^k` is accepted.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    #[arg(long)]
    pub exclude_dwell: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareKlArgs {
    #[command(flatten)]
    pub common: Common,
    /// Optional cohort whose per-class fits are compared as well.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RocArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "svm-dw-oc-tr-all")]
    pub method: String,
    /// Fixed C; when absent the best C of a grid search is used.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub c_grid: Option<String>,
    #[arg(long)]
    pub gamma_grid: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_n: usize,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Classify(_) => "classify",
            Command::Features(_) => "features",
            Command::Evaluate(_) => "evaluate",
            Command::CompareKl(_) => "compare-kl",
            Command::Roc(_) => "roc",
            Command::Bootstrap(_) => "bootstrap",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::CompareKl(a) => &a.common,
            Command::Features(a) => &a.common,
            Command::Fit(a) => &a.input.common,
            Command::Classify(a) => &a.input.common,
            Command::Evaluate(a) => &a.input.common,
            Command::Roc(a) => &a.input.common,
            Command::Bootstrap(a) => &a.input.common,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = commands::check_common(cli.command.common()).and_then(|()| {
        let outputs = match &cli.command {
            Command::Simulate(a) => commands::simulate(a),
            Command::Fit(a) => commands::fit(a),
            Command::Classify(a) => commands::classify(a),
            Command::Features(a) => commands::features(a),
            Command::Evaluate(a) => commands::evaluate(a),
            Command::CompareKl(a) => commands::compare_kl(a),
            Command::Roc(a) => commands::roc(a),
            Command::Bootstrap(a) => commands::bootstrap(a),
        }?;
        commands::write_manifest(cli.command.name(), &cli.command, cli.command.common(), &outputs)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

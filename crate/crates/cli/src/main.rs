//! `fpdist`: staged command-line driver. Every subcommand reads the files
//! written by the previous stage and writes its own, so any prefix of the
//! pipeline can be re-run and inspected.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 internal error. Failures print a single line
//! `error kind=<usage|data|internal>: <message>` to stderr.

/// Prints to stdout, ignoring write errors such as a closed pipe.
macro_rules! say {
    () => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout());
    }};
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpdist::LearnerKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<fpdist::Error> for CliError {
    fn from(e: fpdist::Error) -> Self {
        use fpdist::learners::LearnError;
        use fpdist::select::SelectError;
        let msg = config::one_line(&e.to_string());
        match e {
            fpdist::Error::Learn(LearnError::InvalidHyperparameter(_)) | fpdist::Error::Select(SelectError::InvalidConfig(_)) => {
                CliError::Usage(msg)
            }
            fpdist::Error::Fingerprint(fpdist::fingerprint::FingerprintError::InvalidConfig(_)) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

macro_rules! data_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::from(fpdist::Error::from(e))
            }
        }
    )*};
}
data_error_from!(fpdist::io::DataError, fpdist::eval::EvalError, fpdist::learners::LearnError, fpdist::select::SelectError);

#[derive(Debug, Parser)]
#[command(name = "fpdist", version, about = "Distance estimation between WiFi RSSI fingerprint pairs")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splitting, GA, random search and synthetic venues.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Label threshold in metres for training-pair filtering.
    #[arg(long, global = true)]
    max_m: Option<f64>,
    /// F-beta weight.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Proximity threshold in metres (strictly-below counts as near).
    #[arg(long, global = true)]
    threshold_m: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic venue as long-format fingerprint CSV.
    Synth(SynthArgs),
    /// Validate and clip fingerprint files; write one file per dataset and a manifest.
    Ingest(IngestArgs),
    /// Extract features for every eligible fingerprint pair of every manifest dataset.
    Pairs(PairsArgs),
    /// Keep pairs whose label is at most --max-m.
    Filter(FilterArgs),
    /// Split pool pairs into train/validation/test; isolated datasets are set aside.
    Split(SplitArgs),
    /// Four-method feature importance voting on training pairs.
    Vote(VoteArgs),
    /// Genetic-algorithm feature selection with OLS as the wrapped learner.
    SelectGa(SelectGaArgs),
    /// Fit one learner with fixed hyperparameters.
    Train(TrainArgs),
    /// Random-search hyperparameters on the validation split.
    Tune(TuneArgs),
    /// Score a model on a pair file.
    Evaluate(EvaluateArgs),
    /// Aggregate evaluation reports into summary tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    fingerprints: Option<usize>,
    #[arg(long)]
    aps: Option<usize>,
    #[arg(long)]
    width_m: Option<f64>,
    #[arg(long)]
    height_m: Option<f64>,
    #[arg(long)]
    sigma_db: Option<f64>,
    #[arg(long)]
    path_loss_exponent: Option<f64>,
    #[arg(long)]
    dataset_id: Option<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Long-format fingerprint CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Dataset ids to hold out as isolated (repeatable).
    #[arg(long)]
    isolate: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PairsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Dataset roles; without it every pair is pooled.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct VoteArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectGaArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    validation: PathBuf,
    /// Selected mask, written as a 14-character bit string.
    #[arg(long)]
    out: PathBuf,
    /// Per-generation fitness CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelInput {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    learner: LearnerKind,
    /// Bit string, `all`, comma-separated feature names, or `@file`.
    #[arg(long, default_value = "all")]
    mask: String,
    /// Train on all pairs instead of those within the label filter.
    #[arg(long)]
    no_filter: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: ModelInput,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long)]
    validation: PathBuf,
    /// Every sampled configuration with its validation F-beta.
    #[arg(long)]
    trials: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    /// Name for the report rows; defaults to the pair file stem.
    #[arg(long)]
    dataset: Option<String>,
    /// Also score pairs with labels at most this many metres.
    #[arg(long)]
    restrict: Option<f64>,
    /// Require the pairs to come from isolated datasets the model never saw.
    #[arg(long)]
    isolated: bool,
    /// Dataset manifest used to check roles with --isolated.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Actual-vs-predicted histogram CSV (full set).
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report CSVs written by `evaluate`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let restrict = match &cli.command {
        Command::Evaluate(a) => a.restrict,
        _ => None,
    };
    let flags = config::Overrides { seed: cli.seed, max_m: cli.max_m, beta: cli.beta, threshold_m: cli.threshold_m, restrict };
    let cfg = config::RunConfig::load(cli.config.as_deref(), &flags)?;
    match cli.command {
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Ingest(a) => commands::ingest(&cfg, a),
        Command::Pairs(a) => commands::pairs(&cfg, a),
        Command::Filter(a) => commands::filter(&cfg, a),
        Command::Split(a) => commands::split(&cfg, a),
        Command::Vote(a) => commands::vote(&cfg, a, cli.max_m),
        Command::SelectGa(a) => commands::select_ga(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Tune(a) => commands::tune(&cfg, a),
        Command::Evaluate(a) => commands::evaluate(&cfg, a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return fail(&CliError::Usage(config::one_line(first.trim_start_matches("error: "))));
        }
    };
    std::panic::set_hook(Box::new(|_| {}));
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => fail(&e),
        Err(panic) => {
            let msg =
                panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            fail(&CliError::Internal(config::one_line(&msg)))
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error kind={}: {}", e.kind(), config::one_line(&e.to_string()));
    ExitCode::from(e.code())
}

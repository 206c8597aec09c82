use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Discover, purify and evaluate pure measurement models from
/// vanishing-tetrad constraints.
#[derive(Debug, Parser)]
#[command(name = "mmdisc", version, about)]
struct Cli {
    /// Log more (-v info, -vv debug). `RUST_LOG` takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a measurement pattern from data or a covariance matrix.
    Discover(DiscoverArgs),
    /// List the pure measurement models of a pattern.
    Purify(PurifyArgs),
    /// Generate a ground-truth graph and a dataset for one study.
    Simulate(SimulateArgs),
    /// Score an estimated pure model against a ground truth.
    Evaluate(EvaluateArgs),
    /// Run a simulation study end to end over many trials.
    Replicate(ReplicateArgs),
    /// Test the three tetrad constraints among four variables.
    TestTetrad(TestTetradArgs),
}

/// Where sample moments come from.
#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct InputArgs {
    /// Dataset CSV: header of labels, one numeric row per observation.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Covariance CSV: header of labels, one numeric row per variable.
    #[arg(long)]
    pub cov: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Significance level of every statistical decision.
    #[arg(long, default_value_t = mmdisc::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Tetrad test: wishart or bollen.
    #[arg(long = "test", default_value = "wishart")]
    pub test_kind: mmdisc::TestKind,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Sample size behind `--cov`.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub test: TestArgs,
    /// Link latents whose indicator triples are entirely uncorrelated.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub link_on_uncorrelated: bool,
    /// Test the nonzero partial correlation clause of Unclustered on samples.
    #[arg(long)]
    pub partial_clause: bool,
    /// Pattern JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a plain-text summary of the pattern.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PurifyArgs {
    /// Pattern JSON written by `discover`.
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(long, default_value_t = mmdisc::DEFAULT_MIN_CHILDREN)]
    pub min_children: usize,
    /// Data used to re-check purity; without it impurity edges are taken as given.
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub test: TestArgs,
    /// JSON array of pure models.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study 1 (pure linear), 2 (linear with impurities) or 3 (nonlinear diamond).
    #[arg(long)]
    pub study: u8,
    /// Number of latents.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Indicators per latent.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Impurities such as `ce=2,de=1,cl=1` or `none`; defaults to the study's preset.
    #[arg(long)]
    pub impurities: Option<mmdisc::ImpuritySpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes `<prefix>.csv` and `<prefix>.truth.json`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// One pure model, or an array of them (the largest is scored).
    #[arg(long)]
    pub est: PathBuf,
    /// Ground truth JSON written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(long)]
    pub study: u8,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub impurities: Option<mmdisc::ImpuritySpec>,
    #[command(flatten)]
    pub test: TestArgs,
    /// Decide constraints on the exact population covariance (linear studies).
    #[arg(long)]
    pub population: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub link_on_uncorrelated: bool,
    #[arg(long)]
    pub partial_clause: bool,
    #[arg(long, default_value_t = mmdisc::DEFAULT_MIN_CHILDREN)]
    pub min_children: usize,
    /// Table JSON output; the text table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestTetradArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Four comma-separated labels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub vars: Vec<String>,
    #[command(flatten)]
    pub test: TestArgs,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Discover(a) => commands::discover(&a),
        Command::Purify(a) => commands::purify(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Replicate(a) => commands::replicate(&a),
        Command::TestTetrad(a) => commands::test_tetrad(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use batched_bandits::harness::{run_experiment, AdversaryKind, ExperimentKind, OutputFormat, RunConfig};
use batched_bandits::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Batched bandit simulations.
///
/// Settings come from `--config FILE` (JSON with the same field names, e.g.
/// `{"means": [0.9, 0.6], "horizon": 5000, "batches": [4]}`) and from flags.
/// A flag given on the command line overrides the same field in the file.
///
/// Exit codes: 0 success, 1 invalid input, 2 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "batched-bandits", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Batched arm elimination on a stochastic multi-armed bandit.
    Mab(CommonArgs),
    /// Batched elimination on a linear bandit.
    Linear(CommonArgs),
    /// Batched EXP3 against an adversarial reward table.
    Adversarial(CommonArgs),
    /// One experiment repeated for every value in `--batches`.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AdversaryArg {
    Batchrandom,
    Switching,
    File,
    Iid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Mab,
    Linear,
    Adversarial,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Arm means (mab) or Bernoulli probabilities (adversarial iid), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    means: Option<Vec<f64>>,
    /// Unknown parameter of the linear bandit, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// CSV file of linear actions, one per row, no header.
    #[arg(long, value_name = "FILE")]
    actions_file: Option<PathBuf>,
    /// Adversary for the adversarial experiment.
    #[arg(long, value_enum)]
    adversary: Option<AdversaryArg>,
    /// Reward table CSV for `--adversary file`.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Horizon T.
    #[arg(long, value_name = "T")]
    horizon: Option<u64>,
    /// Number of batches B; a comma-separated list for sweeps.
    #[arg(long, value_name = "B", value_delimiter = ',')]
    batches: Option<Vec<u64>>,
    /// Experiment repeated by a sweep (default mab).
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Replications R.
    #[arg(long, value_name = "R")]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Growth factor of the elimination batches (mab only).
    #[arg(long)]
    q: Option<f64>,
    /// Output file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format for `--out`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Log progress to stderr; repeat for per-batch detail.
    #[arg(long, short, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl CommonArgs {
    fn overrides(&self, experiment: ExperimentKind) -> RunConfig {
        RunConfig {
            experiment: Some(experiment),
            sweep_kind: self.kind.map(|k| match k {
                KindArg::Mab => ExperimentKind::Mab,
                KindArg::Linear => ExperimentKind::Linear,
                KindArg::Adversarial => ExperimentKind::Adversarial,
            }),
            means: self.means.clone(),
            theta: self.theta.clone(),
            actions_file: self.actions_file.clone(),
            adversary: self.adversary.map(|a| match a {
                AdversaryArg::Batchrandom => AdversaryKind::BatchRandom,
                AdversaryArg::Switching => AdversaryKind::Switching,
                AdversaryArg::File => AdversaryKind::File,
                AdversaryArg::Iid => AdversaryKind::Iid,
            }),
            table: self.table.clone(),
            horizon: self.horizon,
            batches: self.batches.clone(),
            reps: self.reps,
            seed: self.seed,
            q: self.q,
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Svg => OutputFormat::Svg,
            }),
            ..Default::default()
        }
    }
}

fn run(args: &CommonArgs, experiment: ExperimentKind) -> Result<(), Error> {
    let base = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    let config = base.merged(args.overrides(experiment));
    let output = run_experiment(&config)?;
    let text = serde_json::to_string_pretty(&output.summaries).expect("summaries serialize");
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (args, kind) = match &cli.command {
        Command::Mab(a) => (a, ExperimentKind::Mab),
        Command::Linear(a) => (a, ExperimentKind::Linear),
        Command::Adversarial(a) => (a, ExperimentKind::Adversarial),
        Command::Sweep(a) => (a, ExperimentKind::Sweep),
    };
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(args, kind) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bfrate::harness::commands::{cmd_check, cmd_kl, cmd_marginal, cmd_simulate, cmd_trajectory, CommandOutcome};
use bfrate::harness::config::ExperimentConfig;
use bfrate::harness::suites::{builtin, SUITE_NAMES};
use bfrate::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bfrate",
    version,
    about = "Bayes factor convergence experiments for competing AR(1) models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one simulated series per seed.
    Simulate(Common),
    /// Track (1/n) log B_n for every model pair and compare with the limit.
    Trajectory(Common),
    /// Cross-check closed-form divergence rates against Monte Carlo.
    Kl(Common),
    /// Converged log marginal likelihoods per model, seed and checkpoint.
    Marginal(Common),
    /// Run the assumption diagnostics and report OK/WARN.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Output root; defaults to the config's `outputs.directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in suite name.
    #[arg(long, value_name = "NAME")]
    suite: Option<String>,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidProcess(_)
            | Error::InvalidDomain(_)
            | Error::SigmaFloor(_)
            | Error::BadCheckpoints
            | Error::SieveBeta { .. }
    )
}

fn load(source: &Source) -> Result<ExperimentConfig, Error> {
    match (&source.config, &source.suite) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(name)) => {
            builtin(name).ok_or_else(|| Error::Config(format!("unknown suite {name:?}; built-ins are {}", SUITE_NAMES.join(", "))))
        }
        (None, None) => unreachable!("clap requires one of --config/--suite"),
    }
}

fn run(command: &Command) -> Result<CommandOutcome, Error> {
    let (Command::Simulate(common)
    | Command::Trajectory(common)
    | Command::Kl(common)
    | Command::Marginal(common)
    | Command::Check(common)) = command;
    let config = load(&common.source)?;
    let threads = common.threads.or(config.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&config.outputs.directory));
    pool.install(|| match command {
        Command::Simulate(_) => cmd_simulate(&config, &out),
        Command::Trajectory(_) => cmd_trajectory(&config, &out),
        Command::Kl(_) => cmd_kl(&config, &out),
        Command::Marginal(_) => cmd_marginal(&config, &out),
        Command::Check(_) => cmd_check(&config, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            let verb = if outcome.reused { "reused" } else { "wrote" };
            println!("{verb} run {}", outcome.run_dir.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { EXIT_FAIL })
        }
    }
}

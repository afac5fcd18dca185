use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selftest_lab::error::{LabError, Result};
use selftest_lab::runner::{
    check_bounds, check_game, check_honest, check_isometry, check_lemmas, check_sweep, load_config, parse_pairs,
    render_report, run_config, sha256_hex, BoundsArgs, GameArgs, HonestArgs, LemmaArgs, Section, SweepArgs, VerifyArgs,
};

/// Environment variable fixing the worker thread count.
const THREADS_ENV: &str = "SELFTEST_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "selftest-lab", version, about = "Numerical checks for self-testing of graph states")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exhaustive string-sum, decomposition and phase identities.
    LemmaChecks(LemmaArgs),
    /// Honest strategies reproduce their ideal correlations.
    HonestCheck(HonestArgs),
    /// Evaluate robustness bounds.
    Bounds(BoundsArgs),
    /// Apply the extraction isometry and compare with the bounds.
    VerifyIsometry(VerifyArgs),
    /// Exact and sampled referee expectation.
    Game(GameArgs),
    /// Distance and bounds over a range of rotation angles.
    SweepNoise(SweepArgs),
    /// Run the checks listed in a JSON config.
    Run {
        /// Path to the run config; relative paths inside resolve against its directory.
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize =
            raw.parse().map_err(|_| LabError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| LabError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn hash_args<T: serde::Serialize>(command: &str, args: &T, extra: &[u8]) -> Result<String> {
    let json = serde_json::to_vec(args)?;
    Ok(sha256_hex(&[command.as_bytes(), &json, extra]))
}

/// A finished command and where its outputs go.
struct Outcome {
    command: &'static str,
    config_sha256: String,
    section: Section,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let (mut out, mut csv) = (cli.out.clone(), cli.csv.clone());
    let (name, hash, section) = match &cli.command {
        Command::LemmaChecks(a) => ("lemma-checks", hash_args("lemma-checks", a, &[])?, check_lemmas(a)?),
        Command::HonestCheck(a) => ("honest-check", hash_args("honest-check", a, &[])?, check_honest(a)?),
        Command::Bounds(a) => ("bounds", hash_args("bounds", a, &[])?, check_bounds(a)?),
        Command::VerifyIsometry(a) => {
            let (s, bytes) = a.strategy.load()?;
            let section = check_isometry(&s, a.test, parse_pairs(&a.pairs)?, a.seed)?;
            ("verify-isometry", hash_args("verify-isometry", a, &bytes)?, section)
        }
        Command::Game(a) => {
            let (s, bytes) = a.strategy.load()?;
            ("game", hash_args("game", a, &bytes)?, check_game(&s, a.rounds, a.seed)?)
        }
        Command::SweepNoise(a) => ("sweep-noise", hash_args("sweep-noise", a, &[])?, check_sweep(a)?),
        Command::Run { config } => {
            let (cfg, dir, hash) = load_config(config)?;
            out = out.or_else(|| cfg.output.as_ref().map(|p| dir.join(p)));
            csv = csv.or_else(|| cfg.csv.as_ref().map(|p| dir.join(p)));
            ("run", hash, run_config(&cfg, &dir)?)
        }
    };
    Ok(Outcome { command: name, config_sha256: hash, section, out, csv })
}

fn run(cli: &Cli) -> Result<bool> {
    init_threads()?;
    let Outcome { command, config_sha256, section, out, csv } = execute(cli)?;
    let report = render_report(command, &config_sha256, &section)?;
    match out {
        Some(path) => {
            fs::write(&path, report).map_err(|e| LabError::Io(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{report}"),
    }
    if let Some(path) = csv {
        section.csv.write(&path)?;
    }
    Ok(section.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("selftest-lab: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e @ LabError::Internal(_)) => {
            eprintln!("selftest-lab: internal error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("selftest-lab: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use punctura_cli::commands::{self, CmdError, OracleKind};
use punctura_cli::config::ExperimentConfig;

/// Bound states of a delta interaction on a planar curve and their shifts
/// under a small puncture.
///
/// Exit codes: 0 success, 1 verification failed, 2 solver error,
/// 3 config or usage error.
#[derive(Parser)]
#[command(name = "punctura", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = one per core. Falls back to PUNCTURA_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound states of the unpunctured curve -> spectrum.csv
    Spectrum,
    /// Puncture sweep against the first-order law -> sweep.csv, verdict.json
    Verify,
    /// Comparison with an independent reference -> oracle.csv
    Oracle {
        #[arg(value_enum)]
        which: Which,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Circle,
    Grid,
    Norm,
}

fn threads(flag: Option<usize>) -> Result<usize, CmdError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("PUNCTURA_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CmdError::Config(format!("PUNCTURA_THREADS = `{v}` is not a count"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<bool, CmdError> {
    let n = threads(cli.threads)?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CmdError::Solver(e.to_string()))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CmdError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg =
        ExperimentConfig::parse(&text).map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
    if let Some(out) = cli.out {
        cfg.outputs = out;
    }
    match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg).map(|_| true),
        Command::Verify => commands::cmd_verify(&cfg),
        Command::Oracle { which } => {
            let kind = match which {
                Which::Circle => OracleKind::Circle,
                Which::Grid => OracleKind::Grid,
                Which::Norm => OracleKind::Norm,
            };
            commands::cmd_oracle(&cfg, kind).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed; see verdict.json");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

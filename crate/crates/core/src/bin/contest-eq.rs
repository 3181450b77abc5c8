use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use contest_eq::cli_io::{parse_config_with, run_command, CliError, Command};

/// Steady-state equilibria of repeated contests with temporary exclusion.
#[derive(Debug, Parser)]
#[command(name = "contest-eq", version)]
struct Args {
    /// One of: solve, sweep, simulate, compare, figures.
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set model.V=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file (a directory for `figures`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shorthand for `--set policy.regime=<name>`.
    #[arg(long)]
    regime: Option<String>,
}

fn run(args: Args) -> Result<bool, CliError> {
    let cmd = Command::parse(&args.command)
        .ok_or_else(|| CliError::Validation(format!("unknown command `{}`", args.command)))?;
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Io {
        path: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    let mut overrides = args.set;
    if let Some(r) = args.regime {
        overrides.push(format!("policy.regime=\"{r}\""));
    }
    let cfg = parse_config_with(&text, &overrides)?;
    let report = run_command(cmd, &cfg, args.out.as_deref())?;
    for note in &report.notes {
        eprintln!("{}", serde_json::json!({ "note": note }));
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    if !report.contracts_met {
        eprintln!(
            "{}",
            serde_json::json!({ "error": "ContractViolation", "message": "a residual or tolerance contract was not met" })
        );
    }
    Ok(report.contracts_met)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{}", e.to_json());
            match e {
                CliError::Parse(_) | CliError::Validation(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use secthru::config::{RunConfig, CONFIG_HELP};
use secthru::verify::Fault;
use secthru::{cmd_point, cmd_region, cmd_verify, CliError};

/// Effective secrecy throughput region of a fading broadcast channel with
/// confidential messages.
#[derive(Parser)]
#[command(name = "secthru", version, after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat TOML configuration file.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.set)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one boundary point.
    #[command(after_help = CONFIG_HELP)]
    Point {
        #[command(flatten)]
        config: ConfigArgs,
        /// Weight of the common message; the confidential one gets 1 - lambda0.
        #[arg(long, allow_negative_numbers = true)]
        lambda0: f64,
        /// Also write the record to this file (overrides `report`).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sweep the weights and write the boundary CSV.
    #[command(after_help = CONFIG_HELP)]
    Region {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV output, `-` for stdout (overrides `csv`).
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// SVG output (overrides `svg`).
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Run the oracle and property checks.
    #[command(after_help = CONFIG_HELP)]
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Point { config, lambda0, out } => {
            let mut cfg = config.load()?;
            if out.is_some() {
                cfg.report = out;
            }
            let row = cmd_point(&cfg, lambda0)?;
            print!("{}", row.record());
            Ok(())
        }
        Command::Region { config, csv, svg } => {
            let mut cfg = config.load()?;
            if let Some(p) = csv {
                cfg.csv = p;
            }
            if svg.is_some() {
                cfg.svg = svg;
            }
            let (rows, res) = cmd_region(&cfg);
            let ok = rows.iter().filter(|r| r.is_ok()).count();
            eprintln!("{ok} of {} points solved", rows.len());
            for r in rows.iter().filter(|r| !r.is_ok()) {
                eprintln!("  lambda0 = {}: {}", r.lambda0, r.status);
            }
            res
        }
        Command::Verify { config, inject_fault } => {
            let cfg = config.load()?;
            let checks = cmd_verify(&cfg, inject_fault)?;
            for c in &checks {
                println!("{:<24} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
            match checks.iter().filter(|c| !c.pass).count() {
                0 => Ok(()),
                n => Err(CliError::Verify(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("secthru: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emloc::Error;

use crate::config::RunConfig;

/// Locate grid disturbances from timestamped frequency measurements.
#[derive(Parser)]
#[command(name = "emloc", version)]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the event and extract relative arrival times.
    Detect {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        /// Also write arrivals.csv and arrivals.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: report, arrival surface grid and mesh.
    Locate {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenario the traces were simulated from; adds error figures.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Propagation speed map from the arrival surface gradient.
    Speedmap {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic traces and a registry from a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the residual regression on an existing report.
    Validate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        arrivals: PathBuf,
        /// Defaults to the arrivals path with a `.json` extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        registry: PathBuf,
    },
    /// Print the effective configuration.
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoEvent => 3,
        Error::NoCoverage
        | Error::Collinear
        | Error::DegenerateTriangle(_)
        | Error::OutOfDomain { .. }
        | Error::EmptyGrid
        | Error::Numerical(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<commands::Output, Error> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let out_dir = |o: Option<PathBuf>| o.unwrap_or_else(|| cfg.output_dir.clone());
    match cli.command {
        Command::Detect { traces, registry, out } => commands::detect(&traces, &registry, out.as_deref(), &cfg),
        Command::Locate {
            traces,
            registry,
            out,
            scenario,
        } => commands::locate(&traces, &registry, &out_dir(out), scenario.as_deref(), &cfg),
        Command::Speedmap { traces, registry, out } => commands::speedmap(&traces, &registry, &out_dir(out), &cfg),
        Command::Simulate { scenario, out } => commands::simulate(&scenario, &out_dir(out)),
        Command::Validate {
            report,
            arrivals,
            sidecar,
            registry,
        } => {
            let sidecar = sidecar.unwrap_or_else(|| commands::default_sidecar(&arrivals));
            commands::revalidate(&report, &arrivals, &sidecar, &registry, &cfg)
        }
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(commands::Output {
                json: serde_json::Value::Null,
                code: 0,
                warnings: Vec::new(),
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if !out.json.is_null() {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("json serializes"));
            }
            ExitCode::from(out.code as u8)
        }
        Err(Error::NoEvent) => {
            println!("{}", serde_json::json!({ "event": null }));
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

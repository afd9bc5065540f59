use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use daqn::harness::{audit_path, evaluate, export_plots, inspect, train, AuditConfig, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "daqn", version, about = "Train and inspect hierarchical gridworld agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from the checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Greedy rollouts of a run's checkpoint with fixed seeds.
    Evaluate {
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Score abstract states by how much their outcomes depend on the
    /// previous state. Takes a run directory or a trace file.
    AuditMarkov {
        path: PathBuf,
        #[arg(long, default_value_t = AuditConfig::default().threshold)]
        threshold: f64,
    },
    /// Print the discovered abstraction, values and option table of a run.
    InspectAbstraction { dir: PathBuf },
    /// Write a combined CSV and SVG charts for one or more runs.
    ExportPlots {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<ConfigError>() {
            Some(c) => Failure::Config(c.to_string()),
            None => Failure::Runtime(e),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { config, seed, out, resume } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let summary = train(cfg, &out, resume)?;
            println!(
                "trained {} steps; final eval reward {:.3}; rooms discovered {}",
                summary.train_steps,
                summary.final_eval_reward(),
                summary.rooms_discovered()
            );
        }
        Command::Evaluate { dir, episodes } => print!("{}", evaluate(&dir, episodes)?.table()),
        Command::AuditMarkov { path, threshold } => {
            let cfg = AuditConfig {
                threshold,
                ..AuditConfig::default()
            };
            print!("{}", audit_path(&path, &cfg)?.render());
        }
        Command::InspectAbstraction { dir } => print!("{}", inspect(&dir)?),
        Command::ExportPlots { dirs, out } => {
            let runs = export_plots(&dirs, &out)?;
            println!("wrote {} runs to {}", runs.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtransfer::{Execution, DEFAULT_N_MAX};

mod commands;

use commands::{Format, Model};

/// Extract retweet-transfer patterns and fit classical and quantum
/// q-attention models.
#[derive(Debug, Parser)]
#[command(name = "qtransfer", version)]
struct Cli {
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse corpora and write instances.csv and patterns.csv.
    Extract {
        /// Corpus files; `-` reads standard input.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "snap")]
        format: Format,
        #[arg(long = "nmax", default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit models to a patterns.csv table.
    Fit {
        stats: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        model: Model,
        /// Seed for the quantum multi-start grid.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight the classical regression by instance counts.
        #[arg(long)]
        weighted: bool,
        /// Report file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus from a key-value config file.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "snap")]
        format: Format,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run extraction and fitting end to end and write a JSON run report.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "snap")]
        format: Format,
        #[arg(long = "nmax", default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        #[arg(long, value_enum, default_value = "both")]
        model: Model,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        weighted: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Extract {
            inputs,
            format,
            n_max,
            out,
        } => commands::cmd_extract(&inputs, format, n_max, &out, exec).map(drop),
        Command::Fit {
            stats,
            model,
            seed,
            weighted,
            out,
        } => commands::cmd_fit(&stats, model, seed, weighted, out.as_deref(), exec).map(drop),
        Command::Simulate {
            config,
            out,
            format,
            seed,
        } => commands::cmd_simulate(&config, &out, format, seed, exec).map(drop),
        Command::Report {
            inputs,
            format,
            n_max,
            model,
            seed,
            weighted,
            out,
        } => commands::cmd_report(&inputs, format, n_max, model, seed, weighted, &out, exec)
            .map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod input;

use commands::Overrides;

#[derive(Parser)]
#[command(name = "mdaux", version, about = "Multi-Dirichlet auxiliary-variable inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gibbs,
    Expectation,
}

impl From<SchemeArg> for mdaux::Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Gibbs => mdaux::Scheme::Gibbs,
            SchemeArg::Expectation => mdaux::Scheme::Expectation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the hierarchical model to a counts file.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
    },
    /// Closed-form expected parent counts, parent tables and tables.
    Expect {
        /// CSV with one row of K parameters per parent.
        #[arg(long)]
        alpha: PathBuf,
        /// Comma-separated category counts.
        #[arg(long, allow_hyphen_values = true)]
        counts: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw synthetic group counts and write them with the generating parents.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Truth file; defaults to the counts path with a `.truth.json` extension.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check every closed form against enumeration and urn simulation.
    Verify {
        #[arg(long)]
        max_total_count: Option<usize>,
        #[arg(long)]
        max_parents: Option<usize>,
        #[arg(long)]
        max_categories: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Perturb the expected parent tables (debug builds only).
        #[cfg(debug_assertions)]
        #[arg(long, num_args = 0..=1, default_missing_value = "1e-3")]
        fault_inject: Option<f64>,
    },
}

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Fit {
            config,
            data,
            out,
            seed,
            sweeps,
            scheme,
        } => commands::fit(
            &config,
            &Overrides {
                data,
                out,
                seed,
                sweeps,
                scheme: scheme.map(Into::into),
            },
        ),
        Command::Expect { alpha, counts, out } => commands::expect(&alpha, &counts, out.as_deref()),
        Command::Simulate { config, out, truth, seed } => commands::simulate(
            &config,
            &Overrides {
                out,
                seed,
                ..Overrides::default()
            },
            truth.as_deref(),
        ),
        Command::Verify {
            max_total_count,
            max_parents,
            max_categories,
            seed,
            out,
            #[cfg(debug_assertions)]
            fault_inject,
        } => {
            #[cfg(not(debug_assertions))]
            let fault_inject = None;
            commands::verify(&commands::VerifyArgs {
                max_total_count,
                max_parents,
                max_categories,
                seed,
                out,
                fault: fault_inject,
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdaux: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

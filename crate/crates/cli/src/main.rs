use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mosco_flow::config::{read_config, ReadError};
use mosco_flow::runner::{self, RunError, THREADS_ENV};
use mosco_flow::selftest::{self, Mutation};

#[derive(Parser)]
#[command(
    name = "mosco-flow",
    about = "Gradient flows on varying Hilbert spaces: sweeps and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exact and combinatorial self-test suites.
    Selftest {
        #[arg(long, hide = true, value_parser = ["quad"])]
        mutate: Option<String>,
    },
    /// Print the build identifier.
    Version,
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("mosco-flow: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(config: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match read_config(&config) {
        Ok(c) => c,
        Err(ReadError::Io(e)) => return fail(RunError::Io(format!("{}: {e}", config.display()))),
        Err(ReadError::Config(e)) => return fail(RunError::Config(e.to_string())),
    };
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let threads = match runner::thread_cap(std::env::var(THREADS_ENV).ok().as_deref()) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    match runner::run(&cfg, threads) {
        Ok(summary) => {
            print!("{}", summary.report.to_csv());
            for (name, value) in summary.report.flags() {
                println!("# {name} = {value}");
            }
            println!(
                "# wrote {} files to {}",
                summary.files.len() + 1,
                summary.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Selftest { mutate } => {
            let mutation = match mutate.as_deref() {
                Some("quad") => Mutation::Quadrature,
                _ => Mutation::None,
            };
            let results = selftest::run_all(mutation);
            print!("{}", selftest::render(&results));
            if results.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Version => {
            println!("{}", runner::build_id());
            ExitCode::SUCCESS
        }
    }
}

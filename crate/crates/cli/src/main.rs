use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regretlab::{property_suite, repro, run_scenario, CliError, FigureRecipe, Mode, ScenarioConfig};

/// Continuous-time learning dynamics: simulation, comparison and checks.
#[derive(Debug, Parser)]
#[command(name = "regretlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every model in a scenario file and write the requested outputs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Like `simulate`, but always writes reward gaps against the first model and regret reports.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data behind a built-in figure.
    Repro {
        /// example1, example2, example3 or fig6
        recipe: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the frequency sweep of a scenario file.
    SweepFreq {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a randomized property suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            print_json(&run_scenario(&ScenarioConfig::load(&config)?, Mode::Simulate, &out)?)
        }
        Command::Compare { config, out } => {
            print_json(&run_scenario(&ScenarioConfig::load(&config)?, Mode::Compare, &out)?)
        }
        Command::SweepFreq { config, out } => {
            print_json(&run_scenario(&ScenarioConfig::load(&config)?, Mode::SweepFreq, &out)?)
        }
        Command::Repro { recipe, out } => print_json(&repro(recipe.parse::<FigureRecipe>()?, &out)?),
        Command::Verify { suite, seed, trials } => {
            let report = property_suite(&suite, seed, trials)?;
            print!("{report}");
            if !report.passed {
                return Err(CliError::SuiteFailed(report.suite));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

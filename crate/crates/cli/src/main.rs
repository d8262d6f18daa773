//! `ramdp`: run learning experiments, solve model files and inspect the
//! bundled environments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, ExportArgs, RunArgs, SolveArgs};

#[derive(Parser)]
#[command(
    name = "ramdp",
    version,
    about = "Robust anytime learning of Markov decision processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "RAMDP_WORKERS")]
        workers: Option<usize>,
    },
    /// Solve a model file and print the value of its initial state.
    Solve {
        model: PathBuf,
        /// Objective: Pmax, Pmin, Rmax or Rmin.
        #[arg(long, default_value = "Pmax")]
        spec: String,
        /// Target states (labels or indices), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
        /// States to avoid (turns reachability into reach-avoid).
        #[arg(long, value_delimiter = ',')]
        avoid: Vec<String>,
        /// exact, optimistic or pessimistic; defaults to exact for point
        /// models and pessimistic for interval models.
        #[arg(long)]
        semantics: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iterations: usize,
        /// Write the policy as `state action` lines.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// List the benchmark environments.
    ListEnvs,
    /// Write an environment in the text model format.
    ExportEnv {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = ramdp::environments::DEFAULT_CHAIN_STATES)]
        chain_states: usize,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => commands::cmd_run(&RunArgs {
            config,
            out,
            seed,
            workers,
        }),
        Command::Solve {
            model,
            spec,
            targets,
            avoid,
            semantics,
            tolerance,
            max_iterations,
            policy,
        } => commands::cmd_solve(&SolveArgs {
            model,
            spec,
            targets,
            avoid,
            semantics,
            tolerance,
            max_iterations,
            policy,
        }),
        Command::ListEnvs => commands::cmd_list_envs(),
        Command::ExportEnv {
            name,
            out,
            chain_states,
        } => commands::cmd_export_env(&ExportArgs {
            name,
            out,
            chain_states,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

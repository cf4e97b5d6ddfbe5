mod args;
mod commands;
mod config_file;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use commands::CommandError;
use manifest::RunManifest;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &CommandError) -> u8 {
    match err {
        CommandError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
        CommandError::Core(_) => EXIT_DATA,
        CommandError::GradCheckFailed { .. } => EXIT_NUMERICAL,
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("EMOCLUSTER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("EMOCLUSTER_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: &Command) -> Result<(), CommandError> {
    let start = Instant::now();
    let outcome = match command {
        Command::GenSynth(a) => commands::gen_synth(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::EvalClusters(a) => commands::eval_clusters(a),
        Command::MinePairs(a) => commands::mine_pairs(a),
        Command::Pretrain(a) => commands::pretrain_cmd(a),
        Command::Probe(a) => commands::probe(a),
        Command::Protocol(a) => commands::protocol(a),
        Command::GradCheck(a) => commands::grad_check(a),
        Command::Project(a) => commands::project(a),
    }?;
    if let Some(primary) = &outcome.primary {
        manifest::write(
            primary,
            &RunManifest {
                command: command.name(),
                config: command,
                inputs: outcome.inputs,
                outputs: outcome.outputs,
                seed: outcome.seed,
                tool_version: env!("CARGO_PKG_VERSION"),
                duration_secs: start.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config_file::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

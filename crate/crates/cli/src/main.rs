//! `relkep`: periodic orbits of the planar relativistic Kepler problem from
//! the command line.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error. Errors are
//! written to stderr as a JSON object.

mod commands;
mod config;
mod error;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relkep::PhysicalParams;

use crate::config::{positive, Command, Format, OutputTarget, RunConfig};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "relkep", version, about = "Periodic solutions of the planar relativistic Kepler problem")]
struct Cli {
    /// Particle mass [default: 1].
    #[arg(long, global = true, value_parser = positive)]
    m: Option<f64>,
    /// Speed of light [default: 1].
    #[arg(long, global = true, value_parser = positive)]
    c: Option<f64>,
    /// Kepler coupling [default: 1].
    #[arg(long, global = true, value_parser = positive)]
    alpha: Option<f64>,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Print the run configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: TopLevel,
}

#[derive(Subcommand, Debug)]
enum TopLevel {
    #[command(flatten)]
    Compute(Command),
    /// Execute a configuration saved with --print-config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn resolve(cli: Cli) -> Result<(RunConfig, bool), CliError> {
    let mut cfg = match cli.command {
        TopLevel::Compute(command) => RunConfig {
            params: PhysicalParams::default(),
            command,
            output: OutputTarget::default(),
        },
        TopLevel::Run { config } => {
            let text = std::fs::read_to_string(&config)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid configuration {}: {e}", config.display())))?
        }
    };
    if let Some(m) = cli.m {
        cfg.params.m = m;
    }
    if let Some(c) = cli.c {
        cfg.params.c = c;
    }
    if let Some(alpha) = cli.alpha {
        cfg.params.alpha = alpha;
    }
    if cli.output.is_some() {
        cfg.output.path = cli.output;
    }
    if cli.format.is_some() {
        cfg.output.format = cli.format;
    }
    cfg.params.validate()?;
    Ok((cfg, cli.print_config))
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("RELKEP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Usage(format!("RELKEP_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(target: &OutputTarget, text: &str) -> Result<(), CliError> {
    match &target.path {
        Some(path) => std::fs::write(path, text)?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // The reader went away (`| head`); nothing left to report.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cfg, print_config) = resolve(cli)?;
    if print_config {
        // --output names the configuration file itself here.
        let target = OutputTarget { path: cfg.output.path.clone(), format: None };
        let saved = RunConfig { output: OutputTarget { path: None, ..cfg.output }, ..cfg };
        let text = serde_json::to_string_pretty(&saved).expect("config serializes") + "\n";
        return emit(&target, &text);
    }
    let pool = thread_pool()?;
    let product = commands::run(cfg.params, &cfg.command, &pool)?;
    let text = match cfg.output.format.unwrap_or(cfg.command.default_format()) {
        Format::Json => serde_json::to_string_pretty(&product.json).expect("values serialize") + "\n",
        Format::Csv => product.csv,
    };
    emit(&cfg.output, &text)
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // The summary paragraph, without the usage and help footer.
            let rendered = e.render().to_string();
            let summary: Vec<&str> = rendered.lines().take_while(|l| !l.is_empty()).map(str::trim).collect();
            return fail(&CliError::Usage(summary.join(" ").trim_start_matches("error: ").to_string()));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

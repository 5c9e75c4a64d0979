mod args;
mod cmd_eval;
mod cmd_match;
mod output;
mod viz;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, EvalMode};

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent flags; exit code 1.
    Usage(String),
    /// Failure after validation; exit code 2.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<dfm::DfmError> for CliError {
    fn from(e: dfm::DfmError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DFM_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    let result = match cli.command {
        Command::Match(a) => cmd_match::run(&a),
        Command::Eval(a) => cmd_eval::run(&a.common, a.mode),
        Command::EvalMma(a) => cmd_eval::run(&a, EvalMode::Mma),
        Command::EvalHomography(a) => cmd_eval::run(&a, EvalMode::Homography),
        Command::Viz(a) => viz::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

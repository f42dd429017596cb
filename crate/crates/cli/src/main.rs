//! `famsynth`: command-line front end of the family synthesis engine.
//!
//! Exit codes: 0 success, 1 usage or I/O, 2 parse or semantic error,
//! 3 resource limit (size cap, budget, timeout, non-convergence),
//! 4 undefined expected reward.

mod args;
mod report;
mod run;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use famsynth::{FormatError, ModelError, SmtError, SolveError, SynthesisError};

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown specification `{0}`")]
    UnknownSpec(String),
    #[error("the document has no suitable specification; name one with --spec")]
    NoSpec,
    #[error("{0}")]
    Undefined(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

fn solve_code(e: &SolveError) -> u8 {
    match e {
        SolveError::UndefinedReward { .. } => 4,
        SolveError::NotConverged { .. } => 3,
        _ => 2,
    }
}

impl CliError {
    /// Diagnostic code of format and model errors.
    fn diagnostic_code(&self) -> Option<&'static str> {
        match self {
            CliError::Format(e) => Some(e.code()),
            CliError::Model(e) | CliError::Synthesis(SynthesisError::Model(e)) => Some(e.code()),
            _ => None,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::UnknownSpec(_) | CliError::NoSpec | CliError::Format(_) | CliError::Model(_) => 2,
            CliError::Undefined(_) => 4,
            CliError::Synthesis(e) => match e {
                SynthesisError::SizeCap { .. } | SynthesisError::BudgetExhausted { .. } => 3,
                SynthesisError::Solve(s) => solve_code(s),
                _ => 2,
            },
            CliError::Smt(e) => match e {
                SmtError::Timeout(_) => 3,
                SmtError::Solve(s) => solve_code(s),
                SmtError::Io(_) => 1,
                _ => 2,
            },
        }
    }
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
    let result = match &cli.command {
        Command::Check(a) => run::baseline("check", a),
        Command::Allinone(a) => run::baseline("allinone", a),
        Command::Enum(a) => run::baseline("enum", a),
        Command::Synth(a) => run::synth(a),
        Command::SmtExport(a) => run::smt_export(a),
        Command::Gen(a) => run::gen(a),
        Command::Bench(a) => run::bench(a),
    };
    match result {
        Ok(text) => {
            run::emit(&text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            match e.diagnostic_code() {
                Some(code) => eprintln!("famsynth: error[{code}]: {e}"),
                None => eprintln!("famsynth: error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

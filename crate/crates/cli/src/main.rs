mod args;
mod bench;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Raised when a run violates an invariant the solvers guarantee, such as
/// serial and parallel traces disagreeing.
#[derive(Debug)]
pub struct InvariantViolation(pub String);

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvariantViolation {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|cause| {
        cause.downcast_ref::<InvariantViolation>().is_some()
            || cause
                .downcast_ref::<mmpar::Error>()
                .is_some_and(mmpar::Error::is_numerical)
    });
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rosenbrock(a) => commands::rosenbrock(&cli.shared, a),
        Command::Nnmf(a) => commands::nnmf(&cli.shared, a, false),
        Command::NnmfPoisson(a) => commands::nnmf(&cli.shared, a, true),
        Command::Pet(a) => commands::pet(&cli.shared, a),
        Command::Mds(a) => commands::mds(&cli.shared, a),
        Command::GenPhantom(a) => commands::gen_phantom(a),
        Command::GenSysmat(a) => commands::gen_sysmat(a),
        Command::Bench(a) => bench::run(&cli.shared, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

use std::process::ExitCode;

use fmcf_cli::{execute, parse_config, CliError};

fn report(e: &CliError) -> ExitCode {
    match e {
        CliError::Clap(c) => {
            let _ = c.print();
        }
        _ => eprintln!("fmcf: {e}"),
    }
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let config = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match execute(&config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => report(&e),
    }
}

use std::process::ExitCode;

use clap::Parser;
use hermite_reach::cli::Cli;
use hermite_reach::commands;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(out) => {
            if let Some(r) = out.report {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&r).expect("reports serialize")
                );
            }
            ExitCode::from(if out.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use cvlearn::cli::{self, Cli};
use cvlearn::Error;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Parse(e.to_string().trim_end().to_string());
            eprintln!("{}", cli::error_json(&err));
            return ExitCode::from(2);
        }
    };
    match cli::run(&cli.command, &cli.flags) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
            if let Some(dir) = &report.out_dir {
                eprintln!("wrote {}", dir.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(2)
        }
    }
}

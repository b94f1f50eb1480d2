use clap::Parser;
use lrl_core::cli::{self, Cli};
use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli::run(&args) {
        Ok(out) => {
            if !out.body.is_empty() {
                let mut stdout = std::io::stdout().lock();
                let _ = stdout.write_all(out.body.as_bytes());
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("lrl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

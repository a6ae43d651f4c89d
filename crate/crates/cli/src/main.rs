use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use gpq_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match gpq_cli::run(cli, &mut out) {
        Ok(()) => {
            let _ = out.flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = out.flush();
            // One line: `error: <kind>: <message>`.
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {}", e.kind(), msg);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

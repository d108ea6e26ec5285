use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = amflood_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match amflood_cli::dispatch(cli, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

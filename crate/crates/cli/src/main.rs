use std::process::ExitCode;

use clap::Parser;
use tierprice_cli::{commands, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli).and_then(|out| commands::emit(&out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

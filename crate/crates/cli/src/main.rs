use clap::Parser;
use degenwave_cli::{execute, exit_code, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

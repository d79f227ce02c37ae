use clap::Parser;

use pilotwave::cli::{main_with, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = main_with(&cli) {
        eprintln!("pilotwave: {e}");
        std::process::exit(e.exit_code());
    }
}

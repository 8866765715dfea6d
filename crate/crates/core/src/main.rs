use clap::Parser;

use fee_timing::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli, &mut std::io::stdout().lock()) {
        eprintln!("fee-timing: {e}");
        std::process::exit(e.exit_code());
    }
}

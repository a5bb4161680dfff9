mod cli;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    if let Err(f) = cli::run(args) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

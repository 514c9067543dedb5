use clap::Parser;
use rollwave::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}

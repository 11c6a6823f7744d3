use clap::Parser;

fn main() {
    std::process::exit(epdyn_cli::run(epdyn_cli::Cli::parse()));
}

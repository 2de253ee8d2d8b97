use clap::Parser;

fn main() {
    let cli = spindle::cli::Cli::parse();
    std::process::exit(spindle::cli::run(cli));
}

use clap::Parser;

fn main() {
    let cli = amjump::cli::Cli::parse();
    std::process::exit(amjump::cli::run(cli));
}

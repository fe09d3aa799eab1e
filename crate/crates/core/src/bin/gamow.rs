use clap::Parser;

fn main() {
    let cli = gamow::cli::Cli::parse();
    std::process::exit(gamow::cli::run(cli));
}

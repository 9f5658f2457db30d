use clap::Parser;

fn main() {
    let cli = smdd_cli::Cli::parse();
    std::process::exit(smdd_cli::dispatch(cli));
}

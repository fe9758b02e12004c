use clap::Parser;

fn main() {
    let cli = qsep_cli::Cli::parse();
    std::process::exit(qsep_cli::main_with(&cli));
}

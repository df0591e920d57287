use clap::Parser;

fn main() {
    let cli = autoeval::cli::Cli::parse();
    if let Err(e) = autoeval::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

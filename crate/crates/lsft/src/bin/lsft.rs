use clap::Parser;

fn main() {
    let cli = lsft::cli::Cli::parse();
    if let Err(e) = lsft::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

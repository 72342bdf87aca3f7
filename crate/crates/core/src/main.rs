use clap::Parser;

fn main() {
    let cli = wavedamas::cli::Cli::parse();
    if let Err(e) = wavedamas::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

use clap::Parser;
use oqs_bench::cli::{execute, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = execute(&cli, &mut std::io::stdout().lock()) {
        eprintln!("oqs-bench: {e}");
        std::process::exit(e.exit_code());
    }
}

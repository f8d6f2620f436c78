use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AQUAPLACE_LOG", "warn")).init();
    let cli = aquaplace_cli::Cli::parse();
    if let Err(e) = aquaplace_cli::run_cli(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

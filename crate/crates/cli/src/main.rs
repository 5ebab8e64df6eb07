use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = spm_cli::Cli::parse();
    if let Err(e) = spm_cli::run(&cli) {
        eprintln!("spm: {e}");
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;
use sddm_nav::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SDDM_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}

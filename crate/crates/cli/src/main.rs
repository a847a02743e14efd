use clap::Parser;
use mi_isac_cli::{run, threads_from_env, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| run(&cli, threads));
    if let Err(e) = result {
        eprintln!("mi-isac {}: {e}", cli.command.name());
        std::process::exit(e.exit_code());
    }
}

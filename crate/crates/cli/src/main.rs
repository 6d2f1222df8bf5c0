use std::process::ExitCode;

use clap::Parser;
use quasisphere_cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QS_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = cli
        .load_config()
        .and_then(|(config, base)| execute(cli.command, &config, &base));
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(1)
        }
    }
}

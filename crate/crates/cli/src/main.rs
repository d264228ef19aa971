mod cli;
mod commands;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(&cli.command) {
        Ok(manifest) => println!("manifest: {}", manifest.display()),
        Err(e) => {
            eprintln!("ctclass: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

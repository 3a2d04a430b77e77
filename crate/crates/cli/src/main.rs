use clap::Parser;
use gflame_cli::error::exit;
use gflame_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => {
            println!("{}: wrote {} files to {}", cli.command.name(), outcome.manifest.files.len() + 1, outcome.out_dir.display());
            match outcome.failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    exit::NUMERICAL
                }
                None => exit::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

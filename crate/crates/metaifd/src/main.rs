use std::process::ExitCode;

use clap::Parser;
use metaifd::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stderr = std::io::stderr();
    match execute(&cli, &mut stderr) {
        Ok(done) => {
            println!("{}", serde_json::json!({
                "status": "ok",
                "command": done.manifest.command,
                "manifest_hash": done.manifest_hash,
            }));
            ExitCode::SUCCESS
        }
        Err(failed) => {
            let (_, record) = *failed;
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
            ExitCode::FAILURE
        }
    }
}

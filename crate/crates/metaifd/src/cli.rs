use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, Command, Finished, ReportKind};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{write_json, ErrorRecord};

#[derive(Debug, Parser)]
#[command(name = "metaifd", version, about = "Fraud detection on Ethereum interaction graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Replaces the base seed and the training seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Degree,
    Meta,
    Margin,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Generate a synthetic graph with planted fraud.
    Synth(Common),
    /// Validate the input files and write a dataset snapshot.
    Ingest(Common),
    /// Write the normalized and raw account features.
    Features(Common),
    /// Pretrain the interaction-aware CVAE.
    Pretrain(Common),
    /// Train and test the detector for every configured seed.
    Train(Common),
    /// Recompute test metrics from saved predictions.
    Evaluate(Common),
    /// Write plot tables.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
}

impl CliCommand {
    pub fn split(&self) -> (Command, &Common) {
        match self {
            CliCommand::Synth(c) => (Command::Synth, c),
            CliCommand::Ingest(c) => (Command::Ingest, c),
            CliCommand::Features(c) => (Command::Features, c),
            CliCommand::Pretrain(c) => (Command::Pretrain, c),
            CliCommand::Train(c) => (Command::Train, c),
            CliCommand::Evaluate(c) => (Command::Evaluate, c),
            CliCommand::Report { common, kind } => {
                let kind = match kind {
                    KindArg::Degree => ReportKind::Degree,
                    KindArg::Meta => ReportKind::Meta,
                    KindArg::Margin => ReportKind::Margin,
                };
                (Command::Report(kind), common)
            }
        }
    }
}

pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    config.apply_overrides(common.seed, common.out.as_deref());
    Ok(config)
}

/// Runs one command. On failure an error record is written to the output
/// directory (when it is known) and returned alongside the error.
pub fn execute(cli: &Cli, log: &mut dyn Write) -> std::result::Result<Finished, Box<(crate::Error, ErrorRecord)>> {
    let (command, common) = cli.command.split();
    let name = command.name();
    let mut out_dir: Option<PathBuf> = common.out.clone();
    let result = resolve_config(common).and_then(|config| {
        out_dir = Some(config.output.dir.clone());
        commands::run(command, &config, log)
    });
    result.map_err(|err| {
        let record = ErrorRecord::new(&name, &err);
        if let Some(dir) = out_dir {
            let _ = write_json(&Path::new(&dir).join(ErrorRecord::file_name(&name)), &record);
        }
        Box::new((err, record))
    })
}

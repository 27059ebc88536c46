use std::fs;
use std::io;

use metaifd::cli::{execute, Cli};
use metaifd::commands::{self, Command, MetricsReport, ReportKind, EVALUATION_FILE, METRICS_FILE};
use metaifd::config::RunConfig;
use metaifd::output::{read_json, ErrorRecord, Manifest};
use clap::Parser;

fn quick_config(dir: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::parse(
        "seed = 3\n\
         [icvae]\nepochs = 3\n\
         [train]\nmax_epochs = 3\nseeds = [0, 1]\n",
    )
    .unwrap();
    c.output.dir = dir.to_path_buf();
    c
}

#[test]
fn synth_then_train_on_a_thousand_accounts() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick_config(dir.path());
    assert_eq!(c.synth.n_accounts, 1000);
    let sink = &mut io::sink();
    commands::run(Command::Synth, &c, sink).unwrap();
    let done = commands::run(Command::Train, &c, sink).unwrap();
    for name in ["icvae.json", "metrics.json", "metrics.csv", "history_seed0.csv", "predictions_seed1.csv"] {
        assert!(done.manifest.outputs.contains_key(name), "{name} missing");
    }

    // evaluate re-derives the test metrics from the saved predictions
    commands::run(Command::Evaluate, &c, sink).unwrap();
    let trained: MetricsReport = read_json(&dir.path().join(METRICS_FILE)).unwrap();
    let evaluated: MetricsReport = read_json(&dir.path().join(EVALUATION_FILE)).unwrap();
    for (a, b) in trained.runs.iter().zip(&evaluated.runs) {
        assert_eq!(a.test, b.test);
    }
    assert_eq!(trained.summary, evaluated.summary);

    let margin = commands::run(Command::Report(ReportKind::Margin), &c, sink).unwrap();
    assert!(margin.manifest.outputs.contains_key("report_margin.csv"));
    let history = fs::read_to_string(dir.path().join("history_seed0.csv")).unwrap();
    assert!(history.starts_with("epoch,pred,con_eoa,con_ca,joint,val_precision"));
}

#[test]
fn manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick_config(dir.path());
    c.synth.n_accounts = 200;
    c.synth.fraud_count = 6;
    c.synth.labeled_normals = 40;
    let sink = &mut io::sink();
    let a = commands::run(Command::Synth, &c, sink).unwrap();
    let f1 = commands::run(Command::Features, &c, sink).unwrap();
    let b = commands::run(Command::Synth, &c, sink).unwrap();
    let f2 = commands::run(Command::Features, &c, sink).unwrap();
    assert_eq!(a.manifest_hash, b.manifest_hash);
    assert_eq!(f1.manifest_hash, f2.manifest_hash);
    let stored: Manifest = read_json(&Manifest::path(dir.path(), "features")).unwrap();
    assert_eq!(stored, f2.manifest);
    // the manifest alone reproduces the run
    let replay = RunConfig::parse(&stored.config).unwrap();
    assert_eq!(replay, c);
}

#[test]
fn ingest_snapshot_feeds_later_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick_config(dir.path());
    c.synth.n_accounts = 150;
    c.synth.fraud_count = 5;
    c.synth.labeled_normals = 30;
    let sink = &mut io::sink();
    commands::run(Command::Synth, &c, sink).unwrap();
    commands::run(Command::Ingest, &c, sink).unwrap();
    let from_files = commands::load_heig(&c).unwrap();
    let mut snap = c.clone();
    snap.data.snapshot = Some(dir.path().join(commands::SNAPSHOT_FILE));
    let from_snapshot = commands::load_heig(&snap).unwrap();
    assert_eq!(from_files.features(), from_snapshot.features());
    assert_eq!(from_files.labels(), from_snapshot.labels());
}

#[test]
fn failures_leave_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[train]\nlambda = 0.1\n").unwrap();
    let out = dir.path().join("out");
    let cli = Cli::parse_from([
        "metaifd",
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let (_, record) = *execute(&cli, &mut io::sink()).unwrap_err();
    assert_eq!(record.kind, "io");
    let stored: ErrorRecord = read_json(&out.join(ErrorRecord::file_name("train"))).unwrap();
    assert_eq!(stored, record);

    fs::write(&cfg, "[train]\nlamda = 0.1\n").unwrap();
    let (_, record) = *execute(&cli, &mut io::sink()).unwrap_err();
    assert_eq!(record.kind, "config");
}

#[test]
fn seed_flag_overrides_config() {
    let cli = Cli::parse_from(["metaifd", "report", "--config", "c.toml", "--seed", "4", "--kind", "meta"]);
    let (command, common) = cli.command.split();
    assert_eq!(command, Command::Report(ReportKind::Meta));
    assert_eq!(common.seed, Some(4));
    let mut c = RunConfig::default();
    c.apply_overrides(common.seed, None);
    assert_eq!((c.seed, c.train.seeds.as_slice()), (4, &[4u64][..]));
}

#[test]
fn readme_lists_the_defaults() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + 8;
    let len = readme[start..].find("```").expect("closed block");
    assert_eq!(RunConfig::parse(&readme[start..start + len]).unwrap(), RunConfig::default());
}

//! The pipeline commands. Each reads what it needs from the configured
//! output directory, writes its files there and finishes with a manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use metaifd_core::heig::{FEATURE_NAMES, META_DIM};
use metaifd_core::icvae::{pretrain, IcvaeParams};
use metaifd_core::record::{AccountTypeTable, LabelTable};
use metaifd_core::report::{distribution_report, histogram};
use metaifd_core::synth;
use metaifd_core::trainer::{
    evaluate, run_views, summarize, train, Detector, MetricSummary, Metrics, TrainOutcome,
    METRIC_NAMES,
};
use metaifd_core::{Heig, InteractionRecord};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_detector, load_icvae, detector_checkpoint, icvae_checkpoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    parse_account_types, parse_labels, parse_records, write_account_types, write_labels,
    write_records, RecordFormat,
};
use crate::output::{csv_bytes, Manifest, OutputDir};
use crate::snapshot::{load_snapshot, DatasetSnapshot};

pub const RECORDS_FILE: &str = "records.csv";
pub const ACCOUNTS_FILE: &str = "accounts.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SNAPSHOT_FILE: &str = "dataset.snapshot";
pub const FEATURES_FILE: &str = "features.csv";
pub const RAW_FEATURES_FILE: &str = "raw_features.csv";
pub const ICVAE_FILE: &str = "icvae.json";
pub const PRETRAIN_HISTORY_FILE: &str = "pretrain_history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const EVALUATION_FILE: &str = "evaluation.json";

pub fn history_file(seed: u64) -> String {
    format!("history_seed{seed}.csv")
}

pub fn predictions_file(seed: u64) -> String {
    format!("predictions_seed{seed}.csv")
}

pub fn detector_file(seed: u64) -> String {
    format!("detector_seed{seed}.json")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    /// Degree histogram per label group and account type.
    Degree,
    /// Per-meta-interaction degree quartiles and edge counts.
    Meta,
    /// Contrast margin histogram before and after training.
    Margin,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Degree => "degree",
            ReportKind::Meta => "meta",
            ReportKind::Margin => "margin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ingest,
    Features,
    Pretrain,
    Train,
    Evaluate,
    Report(ReportKind),
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Synth => "synth".into(),
            Command::Ingest => "ingest".into(),
            Command::Features => "features".into(),
            Command::Pretrain => "pretrain".into(),
            Command::Train => "train".into(),
            Command::Evaluate => "evaluate".into(),
            Command::Report(kind) => format!("report-{}", kind.as_str()),
        }
    }
}

/// Result of a successful command.
#[derive(Debug, Clone)]
pub struct Finished {
    pub manifest: Manifest,
    /// SHA-256 of the manifest file.
    pub manifest_hash: String,
}

pub fn run(command: Command, config: &RunConfig, log: &mut dyn Write) -> Result<Finished> {
    config.validate()?;
    let mut out = OutputDir::new(&config.output.dir)?;
    match command {
        Command::Synth => synth_cmd(config, &mut out)?,
        Command::Ingest => ingest_cmd(config, &mut out, log)?,
        Command::Features => features_cmd(config, &mut out)?,
        Command::Pretrain => pretrain_cmd(config, &mut out, log)?,
        Command::Train => train_cmd(config, &mut out, log)?,
        Command::Evaluate => evaluate_cmd(config, &mut out)?,
        Command::Report(kind) => report_cmd(kind, config, &mut out)?,
    }
    let (manifest, manifest_hash) = out.finish(&command.name(), &config.canonical(), config.seed)?;
    Ok(Finished {
        manifest,
        manifest_hash,
    })
}

fn logline(log: &mut dyn Write, value: serde_json::Value) {
    // logging never fails a command
    let _ = writeln!(log, "{value}");
}

/// Records, declared account types and labels of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<InteractionRecord>,
    pub account_types: Option<AccountTypeTable>,
    pub labels: Option<LabelTable>,
}

fn existing(explicit: &Option<PathBuf>, fallback: PathBuf) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(p.clone()),
        None => fallback.exists().then_some(fallback),
    }
}

pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    if let Some(path) = &config.data.snapshot {
        let snap = load_snapshot(path)?;
        return Ok(Dataset {
            records: snap.records,
            account_types: Some(snap.account_types),
            labels: snap.labels,
        });
    }
    let out = &config.output.dir;
    let records_path = config.data.records.clone().unwrap_or_else(|| out.join(RECORDS_FILE));
    let format = config
        .data
        .format
        .unwrap_or_else(|| RecordFormat::from_path(&records_path));
    let records = parse_records(&records_path, format)?;
    let account_types = existing(&config.data.accounts, out.join(ACCOUNTS_FILE))
        .map(|p| parse_account_types(&p))
        .transpose()?;
    let labels = existing(&config.data.labels, out.join(LABELS_FILE))
        .map(|p| parse_labels(&p, config.fraud_kind()))
        .transpose()?;
    Ok(Dataset {
        records,
        account_types,
        labels,
    })
}

pub fn load_heig(config: &RunConfig) -> Result<Heig> {
    let d = load_dataset(config)?;
    let mut heig = Heig::build(&d.records, d.account_types.as_ref(), d.labels.as_ref())?;
    heig.apply_feature_mask(config.data.feature_mask);
    Ok(heig)
}

fn synth_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let generated = synth::generate(&config.synth_config())?;
    let mut buf = Vec::new();
    write_records(&mut buf, &generated.records, RecordFormat::Csv)?;
    out.write(RECORDS_FILE, &buf)?;
    buf.clear();
    write_account_types(&mut buf, &generated.account_types)?;
    out.write(ACCOUNTS_FILE, &buf)?;
    buf.clear();
    write_labels(&mut buf, &generated.labels)?;
    out.write(LABELS_FILE, &buf)?;
    Ok(())
}

fn ingest_cmd(config: &RunConfig, out: &mut OutputDir, log: &mut dyn Write) -> Result<()> {
    let d = load_dataset(config)?;
    // the stored table covers every address, declared or inferred
    let types = metaifd_core::record::resolve_types(&d.records, d.account_types.as_ref())?;
    Heig::build(&d.records, Some(&types), d.labels.as_ref())?;
    let snap = DatasetSnapshot::new(d.records, types, d.labels);
    out.write(SNAPSHOT_FILE, &snap.to_bytes())?;
    logline(
        log,
        serde_json::json!({
            "event": "snapshot",
            "records": snap.records.len(),
            "accounts": snap.account_types.len(),
            "checksum": snap.checksum,
        }),
    );
    Ok(())
}

fn features_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let heig = load_heig(config)?;
    let mut header = vec!["address", "type", "label"];
    header.extend(FEATURE_NAMES);
    let label = |i: usize| heig.label(i).map_or(String::new(), |l| l.class().to_string());
    let rows = (0..heig.num_accounts()).map(|i| {
        let mut row = vec![
            heig.address(i).to_string(),
            heig.account_type(i).to_string(),
            label(i),
        ];
        row.extend(heig.feature_row(i).iter().map(|v| v.to_string()));
        row
    });
    out.write_csv(FEATURES_FILE, &header, rows)?;

    let mut header = vec!["address"];
    header.extend(FEATURE_NAMES);
    let rows = heig.raw_features().accounts.iter().enumerate().map(|(i, a)| {
        let mut row = vec![heig.address(i).to_string()];
        for k in [a.call, a.trans] {
            let avg = |v: metaifd_core::heig::Average| v.to_f64().to_string();
            row.extend([
                k.total_out.to_string(),
                k.total_in.to_string(),
                avg(k.avg_out()),
                avg(k.avg_in()),
                k.balance().to_string(),
                k.n_initiated.to_string(),
                k.n_received.to_string(),
            ]);
        }
        row
    });
    out.write_csv(RAW_FEATURES_FILE, &header, rows)?;
    Ok(())
}

fn pretrain_and_write(
    config: &RunConfig,
    heig: &Heig,
    out: &mut OutputDir,
    log: &mut dyn Write,
) -> Result<IcvaeParams> {
    let outcome = pretrain(heig, config.icvae_config(), &config.pretrain_config())?;
    for (epoch, (loss, train_loss)) in outcome.history.iter().zip(&outcome.train_history).enumerate() {
        logline(
            log,
            serde_json::json!({"event": "pretrain_epoch", "epoch": epoch, "loss": loss, "train_loss": train_loss}),
        );
    }
    let rows = outcome
        .history
        .iter()
        .zip(&outcome.train_history)
        .enumerate()
        .map(|(e, (l, t))| vec![e.to_string(), l.to_string(), t.to_string()]);
    out.write_csv(PRETRAIN_HISTORY_FILE, &["epoch", "loss", "train_loss"], rows)?;
    out.write_json(ICVAE_FILE, &icvae_checkpoint(&outcome.params))?;
    Ok(outcome.params)
}

fn pretrain_cmd(config: &RunConfig, out: &mut OutputDir, log: &mut dyn Write) -> Result<()> {
    let heig = load_heig(config)?;
    pretrain_and_write(config, &heig, out, log)?;
    Ok(())
}

/// One record per seed plus the aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
    pub summary: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<Metrics>,
    pub test: Metrics,
}

impl MetricsReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> Self {
        let tests: Vec<Metrics> = runs.iter().map(|r| r.test).collect();
        Self {
            summary: summarize(&tests),
            runs,
        }
    }

    fn csv(&self) -> Vec<u8> {
        let mut header = vec!["seed"];
        header.extend(METRIC_NAMES);
        let row = |name: String, m: &Metrics| {
            let mut r = vec![name];
            r.extend(m.as_array().iter().map(|v| v.to_string()));
            r
        };
        let mut rows: Vec<Vec<String>> = self.runs.iter().map(|r| row(r.seed.to_string(), &r.test)).collect();
        rows.push(row("mean".into(), &self.summary.mean));
        rows.push(row("std".into(), &self.summary.std));
        csv_bytes(&header, rows)
    }
}

fn load_or_pretrain(config: &RunConfig, heig: &Heig, out: &mut OutputDir, log: &mut dyn Write) -> Result<IcvaeParams> {
    let path = out.path(ICVAE_FILE);
    if path.exists() {
        load_icvae(&path)
    } else {
        pretrain_and_write(config, heig, out, log)
    }
}

fn write_run(heig: &Heig, run: &TrainOutcome, out: &mut OutputDir, log: &mut dyn Write) -> Result<()> {
    let seed = run.seed;
    let mut header = vec!["epoch", "pred", "con_eoa", "con_ca", "joint"];
    let val_names: Vec<String> = METRIC_NAMES.iter().map(|n| format!("val_{n}")).collect();
    header.extend(val_names.iter().map(String::as_str));
    let rows = run.history.iter().map(|h| {
        let mut r = vec![
            h.epoch.to_string(),
            h.pred.to_string(),
            h.con_eoa.to_string(),
            h.con_ca.to_string(),
            h.joint.to_string(),
        ];
        r.extend(h.val.as_array().iter().map(|v| v.to_string()));
        r
    });
    out.write_csv(&history_file(seed), &header, rows)?;
    for h in &run.history {
        logline(
            log,
            serde_json::json!({
                "event": "epoch", "seed": seed, "epoch": h.epoch, "pred": h.pred,
                "con_eoa": h.con_eoa, "con_ca": h.con_ca, "joint": h.joint,
                "val_macro_f1": h.val.macro_f1,
            }),
        );
    }
    let rows = run.predictions.iter().map(|p| {
        vec![
            heig.address(p.account).to_string(),
            p.label.to_string(),
            p.fraud_probability.to_string(),
            p.predicted.to_string(),
        ]
    });
    out.write_csv(
        &predictions_file(seed),
        &["address", "label", "fraud_probability", "predicted"],
        rows,
    )?;
    out.write_json(&detector_file(seed), &detector_checkpoint(&run.detector))?;
    Ok(())
}

fn train_cmd(config: &RunConfig, out: &mut OutputDir, log: &mut dyn Write) -> Result<()> {
    let heig = load_heig(config)?;
    let icvae = load_or_pretrain(config, &heig, out, log)?;
    if config.train.seeds.is_empty() {
        return Err(Error::Config("train.seeds is empty".into()));
    }
    let mut runs = Vec::new();
    for &seed in &config.train.seeds {
        let run = train(&heig, &icvae, &config.train, seed)?;
        write_run(&heig, &run, out, log)?;
        runs.push(RunMetrics {
            seed,
            best_epoch: Some(run.best_epoch),
            epochs_run: Some(run.epochs_run),
            val: Some(run.val),
            test: run.test,
        });
    }
    let report = MetricsReport::from_runs(runs);
    out.write_json(METRICS_FILE, &report)?;
    out.write(METRICS_CSV_FILE, &report.csv())?;
    Ok(())
}

/// Reads a predictions file back into `(predicted, label)` columns.
pub fn read_predictions(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut predicted = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: i + 2,
            reason: e.to_string(),
        })?;
        let class = |k: usize| -> Result<usize> {
            match row.get(k) {
                Some("0") => Ok(0),
                Some("1") => Ok(1),
                other => Err(Error::MalformedRow {
                    line: i + 2,
                    reason: format!("class `{}` is not 0 or 1", other.unwrap_or("")),
                }),
            }
        };
        labels.push(class(1)?);
        predicted.push(class(3)?);
    }
    Ok((predicted, labels))
}

fn evaluate_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let runs = config
        .train
        .seeds
        .iter()
        .map(|&seed| {
            let (pred, labels) = read_predictions(&out.path(&predictions_file(seed)))?;
            Ok(RunMetrics {
                seed,
                best_epoch: None,
                epochs_run: None,
                val: None,
                test: evaluate(&pred, &labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.write_json(EVALUATION_FILE, &MetricsReport::from_runs(runs))?;
    Ok(())
}

pub const MARGIN_BINS: usize = 20;

fn report_cmd(kind: ReportKind, config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let heig = load_heig(config)?;
    match kind {
        ReportKind::Degree => {
            let r = distribution_report(&heig);
            let rows = r.degree_histogram.iter().map(|b| {
                vec![
                    b.group.as_str().to_string(),
                    b.account_type.to_string(),
                    b.degree.to_string(),
                    b.count.to_string(),
                ]
            });
            out.write_csv("report_degree.csv", &["group", "type", "degree", "count"], rows)?;
        }
        ReportKind::Meta => {
            let r = distribution_report(&heig);
            let rows = r.meta_quartiles.iter().map(|q| {
                vec![
                    q.group.as_str().to_string(),
                    q.meta.as_str().to_string(),
                    q.accounts.to_string(),
                    q.min.to_string(),
                    q.q1.to_string(),
                    q.median.to_string(),
                    q.q3.to_string(),
                    q.max.to_string(),
                ]
            });
            out.write_csv(
                "report_meta_quartiles.csv",
                &["group", "meta", "accounts", "min", "q1", "median", "q3", "max"],
                rows,
            )?;
            debug_assert_eq!(r.meta_counts.len(), META_DIM);
            let rows = r
                .meta_counts
                .iter()
                .map(|c| vec![c.meta.as_str().to_string(), c.edges.to_string()]);
            out.write_csv("report_meta_counts.csv", &["meta", "edges"], rows)?;
        }
        ReportKind::Margin => margin_report(config, &heig, out)?,
    }
    Ok(())
}

/// Margins of the freshly initialized detector ("before") and of the
/// trained one ("after"), per seed, against the same views.
fn margin_report(config: &RunConfig, heig: &Heig, out: &mut OutputDir) -> Result<()> {
    let icvae_path = out.path(ICVAE_FILE);
    if !icvae_path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run `pretrain` or `train` first",
            icvae_path.display()
        )));
    }
    let icvae = load_icvae(&icvae_path)?;
    let mut stages: Vec<(String, u64, Vec<f64>)> = Vec::new();
    for &seed in &config.train.seeds {
        let trained = load_detector(&out.path(&detector_file(seed)))?;
        let views = run_views(heig, &icvae, trained.config.views, seed, None)?;
        let initial = Detector::new(trained.config, seed)?;
        stages.push(("before".into(), seed, initial.margins(heig, &views)));
        stages.push(("after".into(), seed, trained.margins(heig, &views)));
    }
    let all = stages.iter().flat_map(|s| s.2.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };

    let mut hist_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for (stage, seed, margins) in &stages {
        for b in histogram(margins, MARGIN_BINS, lo, hi) {
            hist_rows.push(vec![
                stage.clone(),
                seed.to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
            ]);
        }
        let mean = margins.iter().sum::<f64>() / margins.len().max(1) as f64;
        summary_rows.push(vec![stage.clone(), seed.to_string(), mean.to_string()]);
    }
    out.write_csv(
        "report_margin.csv",
        &["stage", "seed", "bin_lo", "bin_hi", "count"],
        hist_rows,
    )?;
    out.write_csv("report_margin_summary.csv", &["stage", "seed", "mean_margin"], summary_rows)?;
    Ok(())
}

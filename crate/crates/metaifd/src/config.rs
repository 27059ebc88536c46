//! TOML run configuration.
//!
//! Every key is optional; unknown keys are rejected. Relative paths are
//! resolved against the directory holding the configuration file.
//!
//! ```toml
//! seed = 0                  # synthetic graph, ICVAE initialization and pretraining
//!
//! [data]
//! records = "records.csv"   # default: <output.dir>/records.csv
//! format = "csv"            # csv | jsonl; default from the extension
//! accounts = "accounts.csv" # default: <output.dir>/accounts.csv when present
//! labels = "labels.csv"     # default: <output.dir>/labels.csv when present
//! snapshot = "d.snapshot"   # load this snapshot instead of the files above
//! fraud_kind = "ponzi"      # ponzi | phish
//! feature_mask = "all"      # all | call_only | trans_only
//!
//! [synth]                   # n_accounts = 1000, ca_fraction = 0.2,
//!                           # powerlaw_exponent = 2.5, edges_per_account = 4.0,
//!                           # fraud_count = 50, fraud_kind = "ponzi",
//!                           # label_noise = 0.0, labeled_normals = 250
//!
//! [icvae]                   # interaction_aware = true, lr = 0.01, epochs = 200,
//!                           # batch_size = 256, fanout = 100
//!
//! [train]                   # lambda = 0.1, views = 3, hidden = 64, lr = 0.01,
//!                           # heads = 4, patience = 50, max_epochs = 200,
//!                           # split = [0.6, 0.2, 0.2], seeds = [0, 1, 2, 3, 4],
//!                           # batch_size = 64, fanout = 100, hops = 2,
//!                           # alpha = 0.3, aggregation = "self_attention",
//!                           # share_weights = false, disable_contrast = false,
//!                           # regenerate_views_per_epoch = false
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use metaifd_core::heig::FeatureMask;
use metaifd_core::icvae::{IcvaeConfig, PretrainConfig};
use metaifd_core::record::FraudKind;
use metaifd_core::synth::SynthConfig;
use metaifd_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RecordFormat;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub synth: SynthSection,
    pub icvae: IcvaeSection,
    pub train: TrainConfig,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub records: Option<PathBuf>,
    pub format: Option<RecordFormat>,
    pub accounts: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub fraud_kind: Option<FraudKind>,
    pub feature_mask: FeatureMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_accounts: usize,
    pub ca_fraction: f64,
    pub powerlaw_exponent: f64,
    pub edges_per_account: f64,
    pub fraud_count: usize,
    pub fraud_kind: FraudKind,
    pub label_noise: f64,
    pub labeled_normals: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_accounts: d.n_accounts,
            ca_fraction: d.ca_fraction,
            powerlaw_exponent: d.powerlaw_exponent,
            edges_per_account: d.edges_per_account,
            fraud_count: d.fraud_count,
            fraud_kind: d.fraud_kind,
            label_noise: d.label_noise,
            labeled_normals: d.labeled_normals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcvaeSection {
    pub interaction_aware: bool,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub fanout: usize,
}

impl Default for IcvaeSection {
    fn default() -> Self {
        let d = PretrainConfig::default();
        Self {
            interaction_aware: IcvaeConfig::default().interaction_aware,
            lr: d.lr,
            epochs: d.epochs,
            batch_size: d.batch_size,
            fanout: d.fanout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a configuration file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output.dir);
        for p in [
            &mut self.data.records,
            &mut self.data.accounts,
            &mut self.data.labels,
            &mut self.data.snapshot,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// `--seed` replaces the base seed and the training seed list.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<&Path>) {
        if let Some(seed) = seed {
            self.seed = seed;
            self.train.seeds = vec![seed];
        }
        if let Some(out) = out {
            self.output.dir = out.to_path_buf();
        }
    }

    /// Canonical TOML of the resolved configuration; its digest goes in
    /// every manifest.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            n_accounts: s.n_accounts,
            ca_fraction: s.ca_fraction,
            powerlaw_exponent: s.powerlaw_exponent,
            edges_per_account: s.edges_per_account,
            fraud_count: s.fraud_count,
            fraud_kind: s.fraud_kind,
            seed: self.seed,
            label_noise: s.label_noise,
            labeled_normals: s.labeled_normals,
        }
    }

    pub fn icvae_config(&self) -> IcvaeConfig {
        IcvaeConfig {
            interaction_aware: self.icvae.interaction_aware,
            ..IcvaeConfig::default()
        }
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            lr: self.icvae.lr,
            epochs: self.icvae.epochs,
            batch_size: self.icvae.batch_size,
            seed: self.seed,
            fanout: self.icvae.fanout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.icvae_config().validate()?;
        if self.icvae.batch_size == 0 {
            return Err(Error::Config("icvae.batch_size must be positive".into()));
        }
        if !(self.icvae.lr > 0.0) {
            return Err(Error::Config("icvae.lr must be positive".into()));
        }
        Ok(())
    }

    /// Fraud kind for label files: `data.fraud_kind`, else the synth setting.
    pub fn fraud_kind(&self) -> FraudKind {
        self.data.fraud_kind.unwrap_or(self.synth.fraud_kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.lambda, 0.1);
        assert_eq!(c.train.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.icvae.lr, 0.01);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("colour = 1").is_err());
        assert!(RunConfig::parse("[train]\nlamda = 0.1").is_err());
        assert!(RunConfig::parse("[synth]\nseed = 3").is_err());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::parse(
            "seed = 7\n[train]\nlambda = 1.0\naggregation = \"concat\"\nseeds = [3]\n\
             [data]\nfeature_mask = \"call_only\"\nformat = \"jsonl\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.lambda, 1.0);
        assert_eq!(c.train.seeds, vec![3]);
        assert_eq!(c.data.feature_mask, FeatureMask::CallOnly);
        assert_eq!(c.synth_config().seed, 7);
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::default();
        c.apply_overrides(Some(9), Some(Path::new("/tmp/x")));
        let back = RunConfig::parse(&c.canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train.seeds, vec![9]);
    }

    #[test]
    fn invalid_values_fail_validation() {
        let c = RunConfig::parse("[train]\nsplit = [0.5, 0.2, 0.2]").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("[train]\nhidden = 30").unwrap();
        assert!(c.validate().is_err());
    }
}

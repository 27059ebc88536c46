//! JSON checkpoints of model parameters.
//!
//! ```json
//! {
//!   "format": "metaifd-checkpoint",
//!   "version": 1,
//!   "model": "icvae",
//!   "config": { ... },
//!   "shapes": [["enc.w1", 34, 32], ...],
//!   "tensors": { "enc.w1": [ ...row-major... ], ... }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! reloaded model reproduces the saved one bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use metaifd_core::icvae::{IcvaeConfig, IcvaeParams};
use metaifd_core::params::ParamStore;
use metaifd_core::trainer::{Detector, DetectorConfig};
use metaifd_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "metaifd-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint<C> {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub config: C,
    pub shapes: Vec<(String, usize, usize)>,
    pub tensors: BTreeMap<String, Vec<f64>>,
}

impl<C> Checkpoint<C> {
    pub fn new(model: &str, config: C, store: &ParamStore) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: model.to_string(),
            config,
            shapes: store.shapes(),
            tensors: store
                .iter()
                .map(|(name, m)| (name.to_string(), m.data().to_vec()))
                .collect(),
        }
    }

    /// Rebuilds the parameter store in manifest order, checking every
    /// tensor against its declared shape.
    pub fn store(&self, model: &str) -> Result<ParamStore> {
        if self.format != FORMAT {
            return Err(Error::Config(format!("not a checkpoint: format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::VersionUnsupported(self.version.to_string()));
        }
        if self.model != model {
            return Err(Error::Config(format!(
                "checkpoint holds a `{}` model, expected `{model}`",
                self.model
            )));
        }
        if self.tensors.len() != self.shapes.len() {
            return Err(Error::Config("tensor list does not match the shape manifest".into()));
        }
        let mut store = ParamStore::new();
        for (name, rows, cols) in &self.shapes {
            let data = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("tensor `{name}` missing")))?;
            if data.len() != rows * cols {
                return Err(metaifd_core::Error::DimensionMismatch {
                    what: "checkpoint tensor",
                    expected: rows * cols,
                    found: data.len(),
                }
                .into());
            }
            store.push(name, Matrix::from_vec(*rows, *cols, data.clone()));
        }
        Ok(store)
    }
}

pub const ICVAE: &str = "icvae";
pub const DETECTOR: &str = "detector";

pub fn icvae_checkpoint(params: &IcvaeParams) -> Checkpoint<IcvaeConfig> {
    Checkpoint::new(ICVAE, params.config, &params.store)
}

pub fn detector_checkpoint(detector: &Detector) -> Checkpoint<DetectorConfig> {
    Checkpoint::new(DETECTOR, detector.config, &detector.store)
}

pub fn save_icvae(path: &Path, params: &IcvaeParams) -> Result<()> {
    crate::output::write_json(path, &icvae_checkpoint(params))
}

pub fn load_icvae(path: &Path) -> Result<IcvaeParams> {
    let ckpt: Checkpoint<IcvaeConfig> = crate::output::read_json(path)?;
    Ok(IcvaeParams::from_store(ckpt.config, ckpt.store(ICVAE)?)?)
}

pub fn save_detector(path: &Path, detector: &Detector) -> Result<()> {
    crate::output::write_json(path, &detector_checkpoint(detector))
}

pub fn load_detector(path: &Path) -> Result<Detector> {
    let ckpt: Checkpoint<DetectorConfig> = crate::output::read_json(path)?;
    Ok(Detector::from_parts(ckpt.config, ckpt.store(DETECTOR)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use metaifd_core::trainer::TrainConfig;

    #[test]
    fn icvae_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("icvae.json");
        let params = IcvaeParams::init(IcvaeConfig::default(), 11).unwrap();
        save_icvae(&path, &params).unwrap();
        assert_eq!(load_icvae(&path).unwrap(), params);
    }

    #[test]
    fn detector_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.json");
        let det = Detector::new(TrainConfig::default().detector(), 5).unwrap();
        save_detector(&path, &det).unwrap();
        assert_eq!(load_detector(&path).unwrap().store, det.store);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let params = IcvaeParams::init(IcvaeConfig::default(), 1).unwrap();
        let mut ckpt = icvae_checkpoint(&params);
        ckpt.tensors.get_mut("enc.w1").unwrap().pop();
        assert!(ckpt.store(ICVAE).is_err());
        let ckpt = icvae_checkpoint(&params);
        assert!(ckpt.store(DETECTOR).is_err());
    }
}

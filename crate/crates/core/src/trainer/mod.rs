//! Joint training of the detector: views from a pretrained ICVAE, multi-view
//! encoding, contrast regularization, feature passing and classification.

mod metrics;
mod split;

pub use metrics::{evaluate, summarize, Confusion, MetricSummary, Metrics, METRIC_NAMES};
pub use split::{split_dataset, validate_fractions, Split, MIN_PER_CLASS};

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::contrast::{account_margins, contrast_on_tape, ContrastConfig, ContrastLoss};
use crate::error::{Error, Result};
use crate::heig::{sample_subgraph, Heig, Subgraph, DEFAULT_FANOUT, DEFAULT_LAYERS};
use crate::icvae::{generate_all_views, AugmentedFeatureSet, IcvaeParams};
use crate::linalg::Matrix;
use crate::multiview::{MultiViewConfig, MultiViewLayout, ViewAggregation, DEFAULT_HEADS};
use crate::optim::Adam;
use crate::params::ParamStore;
use crate::propagation::{PropagationConfig, PropagationLayout, CLASSES};
use crate::record::{AccountType, Label};
use crate::rng::{derive_seed, rng_for, stream};
use crate::tape::{Tape, Var};
use crate::FEATURE_DIM;

/// Floor applied to probabilities inside the cross-entropy.
pub use crate::tape::PROB_FLOOR;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Weight of the contrast terms in the joint objective.
    pub lambda: f64,
    /// Number of generated views `M`.
    pub views: usize,
    /// Hidden width `d′`.
    pub hidden: usize,
    pub lr: f64,
    pub heads: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub split: [f64; 3],
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    pub fanout: usize,
    pub hops: usize,
    pub alpha: f64,
    pub aggregation: ViewAggregation,
    pub share_weights: bool,
    /// Drop the contrast module altogether.
    pub disable_contrast: bool,
    /// Draw fresh views at the start of every epoch instead of once per run.
    pub regenerate_views_per_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            views: 3,
            hidden: 64,
            lr: 0.01,
            heads: DEFAULT_HEADS,
            patience: 50,
            max_epochs: 200,
            split: [0.6, 0.2, 0.2],
            seeds: vec![0, 1, 2, 3, 4],
            batch_size: 64,
            fanout: DEFAULT_FANOUT,
            hops: DEFAULT_LAYERS,
            alpha: crate::contrast::DEFAULT_MARGIN,
            aggregation: ViewAggregation::SelfAttention,
            share_weights: false,
            disable_contrast: false,
            regenerate_views_per_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        validate_fractions(self.split)?;
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.batch_size == 0 || self.fanout == 0 {
            return Err(Error::Config("batch size and fanout must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be finite and non-negative".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.contrast().validate()?;
        self.detector().multiview().validate()
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            feature_dim: FEATURE_DIM,
            views: self.views,
            hidden: self.hidden,
            heads: self.heads,
            aggregation: self.aggregation,
            share_weights: self.share_weights,
        }
    }

    pub fn contrast(&self) -> ContrastConfig {
        ContrastConfig { alpha: self.alpha }
    }
}

/// Shape of the detector network.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorConfig {
    pub feature_dim: usize,
    pub views: usize,
    pub hidden: usize,
    pub heads: usize,
    pub aggregation: ViewAggregation,
    pub share_weights: bool,
}

impl DetectorConfig {
    pub fn multiview(&self) -> MultiViewConfig {
        MultiViewConfig {
            feature_dim: self.feature_dim,
            hidden: self.hidden,
            heads: self.heads,
            views: self.views,
            aggregation: self.aggregation,
            share_weights: self.share_weights,
        }
    }

    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            input_dim: self.multiview().output_dim(),
            hidden: self.hidden,
            share_weights: self.share_weights,
        }
    }
}

const MV_PREFIX: &str = "mv.";
const PROP_PREFIX: &str = "prop.";

/// Multi-view encoder, feature passing and prediction head in one store.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub config: DetectorConfig,
    pub store: ParamStore,
    pub multiview: MultiViewLayout,
    pub propagation: PropagationLayout,
}

/// Loss components of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub pred: Var,
    pub con_eoa: Option<Var>,
    pub con_ca: Option<Var>,
    pub joint: Var,
}

/// Output of [`Detector::forward`].
#[derive(Debug, Clone)]
pub struct ForwardNodes {
    /// Logits of the subgraph's target accounts.
    pub logits: Var,
    /// Contrast loss per type group present in the subgraph.
    pub contrast: Vec<(AccountType, Var)>,
}

impl Detector {
    pub fn new(config: DetectorConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let multiview = MultiViewLayout::register(&mut store, MV_PREFIX, config.multiview(), seed)?;
        let propagation =
            PropagationLayout::register(&mut store, PROP_PREFIX, config.propagation(), seed)?;
        Ok(Self {
            config,
            store,
            multiview,
            propagation,
        })
    }

    /// Rebuilds a detector from a stored parameter set, checking every shape.
    pub fn from_parts(config: DetectorConfig, store: ParamStore) -> Result<Self> {
        let multiview = MultiViewLayout::locate(&store, MV_PREFIX, config.multiview())?;
        let propagation = PropagationLayout::locate(&store, PROP_PREFIX, config.propagation())?;
        let expected = Self::new(config, 0)?.store.len();
        if store.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "detector parameter count",
                expected,
                found: store.len(),
            });
        }
        Ok(Self {
            config,
            store,
            multiview,
            propagation,
        })
    }

    /// Forward pass over a sampled subgraph. `views` is indexed by global
    /// account id. Contrast nodes are built when `alpha` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        heig: &Heig,
        views: &[AugmentedFeatureSet],
        sub: &Subgraph,
        alpha: Option<f64>,
    ) -> Result<ForwardNodes> {
        let sets: Vec<&AugmentedFeatureSet> = sub.nodes.iter().map(|&g| &views[g]).collect();
        let types: Vec<AccountType> = sub.nodes.iter().map(|&g| heig.account_type(g)).collect();
        let mv = self.multiview.forward(tape, vars, &sets, &types)?;
        let contrast = match alpha {
            Some(alpha) => mv
                .groups
                .iter()
                .map(|g| (g.ty, contrast_on_tape(tape, g.h_hat, self.config.views, alpha)))
                .collect(),
            None => Vec::new(),
        };
        let adjacency = sub.adjacency(heig);
        let h2 = self
            .propagation
            .message_pass(tape, vars, mv.fused, &adjacency, &types)?;
        let targets: Vec<usize> = (0..sub.num_targets).collect();
        let h_targets = tape.select_rows(h2, &targets);
        let logits = self.propagation.logits(tape, vars, h_targets);
        Ok(ForwardNodes { logits, contrast })
    }

    /// Builds `L_pred + λ(L_eoa + L_ca)` on the tape; the contrast terms are
    /// left out entirely when `contrast` is `None`.
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        heig: &Heig,
        views: &[AugmentedFeatureSet],
        sub: &Subgraph,
        labels: &[usize],
        contrast: Option<(f64, f64)>,
    ) -> Result<LossNodes> {
        if labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let nodes = self.forward(tape, vars, heig, views, sub, contrast.map(|c| c.1))?;
        let pred = tape.softmax_cross_entropy(nodes.logits, labels);
        let find = |ty| nodes.contrast.iter().find(|(t, _)| *t == ty).map(|(_, v)| *v);
        let con_eoa = find(AccountType::Eoa);
        let con_ca = find(AccountType::Ca);
        let joint = match contrast {
            Some((lambda, _)) => {
                let mut total = pred;
                for c in [con_eoa, con_ca].into_iter().flatten() {
                    let weighted = tape.scale(c, lambda);
                    total = tape.add(total, weighted);
                }
                total
            }
            None => pred,
        };
        Ok(LossNodes {
            pred,
            con_eoa,
            con_ca,
            joint,
        })
    }

    /// Class probabilities for the subgraph's targets.
    pub fn predict(
        &self,
        heig: &Heig,
        views: &[AugmentedFeatureSet],
        sub: &Subgraph,
    ) -> Result<Vec<[f64; CLASSES]>> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let nodes = self.forward(&mut tape, &vars, heig, views, sub, None)?;
        let logits = tape.value(nodes.logits);
        Ok((0..logits.rows())
            .map(|r| {
                let mut p = [logits.get(r, 0), logits.get(r, 1)];
                crate::linalg::softmax_in_place(&mut p);
                p
            })
            .collect())
    }

    /// Type-specific encodings `Ĥ` of every account, `(views · 4) × d′` each.
    pub fn encode_views(&self, heig: &Heig, views: &[AugmentedFeatureSet]) -> Vec<Matrix> {
        (0..heig.num_accounts())
            .map(|i| {
                let w = self.multiview.weights_for(heig.account_type(i)).theta_hat;
                views[i].data.matmul(self.store.get(w)).map(libm::tanh)
            })
            .collect()
    }

    /// Mean over accounts of the per-account mean contrast margin.
    pub fn mean_margin(&self, heig: &Heig, views: &[AugmentedFeatureSet]) -> f64 {
        let margins = self.margins(heig, views);
        if margins.is_empty() {
            0.0
        } else {
            margins.iter().sum::<f64>() / margins.len() as f64
        }
    }

    /// Per-account margin `‖a − n‖² − ‖a − p‖²`, averaged over views.
    pub fn margins(&self, heig: &Heig, views: &[AugmentedFeatureSet]) -> Vec<f64> {
        self.encode_views(heig, views)
            .iter()
            .map(|h| {
                let m = account_margins(h);
                m.iter().sum::<f64>() / m.len().max(1) as f64
            })
            .collect()
    }
}

/// Mean of `−ln max(p[y], floor)` over the batch.
pub fn classification_loss(probabilities: &[[f64; CLASSES]], labels: &[usize]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if probabilities.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "probabilities and labels",
            expected: labels.len(),
            found: probabilities.len(),
        });
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| -libm::log(p[y].max(PROB_FLOOR)))
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn joint_loss(pred: f64, con_eoa: f64, con_ca: f64, lambda: f64) -> f64 {
    pred + lambda * (con_eoa + con_ca)
}

/// Index of the larger probability; ties go to the normal class.
pub fn argmax(p: &[f64; CLASSES]) -> usize {
    usize::from(p[1] > p[0])
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub pred: f64,
    pub con_eoa: f64,
    pub con_ca: f64,
    pub joint: f64,
    pub val: Metrics,
}

/// Per-account test output.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    pub account: usize,
    pub label: usize,
    pub fraud_probability: f64,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub seed: u64,
    pub detector: Detector,
    pub split: Split,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    pub val: Metrics,
    pub test: Metrics,
    pub predictions: Vec<Prediction>,
    /// Views the best detector was trained against.
    pub views: Vec<AugmentedFeatureSet>,
}

/// Views for one run; the same seed always yields the same views.
pub fn run_views(
    heig: &Heig,
    icvae: &IcvaeParams,
    views: usize,
    seed: u64,
    epoch: Option<usize>,
) -> Result<Vec<AugmentedFeatureSet>> {
    let key = match epoch {
        Some(e) => derive_seed(seed, &[stream::VIEWS, e as u64 + 1]),
        None => derive_seed(seed, &[stream::VIEWS]),
    };
    generate_all_views(heig, views, icvae, key)
}

fn labels_of(heig: &Heig, accounts: &[usize]) -> Vec<usize> {
    accounts
        .iter()
        .map(|&a| heig.label(a).map_or(0, Label::class))
        .collect()
}

fn evaluate_on(
    detector: &Detector,
    heig: &Heig,
    views: &[AugmentedFeatureSet],
    sub: &Subgraph,
) -> Result<(Metrics, Vec<Prediction>)> {
    let probs = detector.predict(heig, views, sub)?;
    let labels = labels_of(heig, sub.targets());
    let preds: Vec<usize> = probs.iter().map(argmax).collect();
    let metrics = evaluate(&preds, &labels)?;
    let rows = sub
        .targets()
        .iter()
        .zip(&probs)
        .zip(&labels)
        .map(|((&account, p), &label)| Prediction {
            account,
            label,
            fraud_probability: p[1],
            predicted: argmax(p),
        })
        .collect();
    Ok((metrics, rows))
}

/// One training run with early stopping on validation Macro-F1.
pub fn train(heig: &Heig, icvae: &IcvaeParams, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let split = split_dataset(heig.labels(), config.split, seed)?;
    let mut views = run_views(heig, icvae, config.views, seed, None)?;
    let mut detector = Detector::new(config.detector(), seed)?;
    let mut opt = Adam::new(config.lr, &detector.store);
    let contrast = (!config.disable_contrast).then_some((config.lambda, config.alpha));

    let val_sub = sample_subgraph(
        heig,
        &split.val,
        config.fanout,
        config.hops,
        derive_seed(seed, &[stream::EVAL_SAMPLE, 0]),
    );
    let test_sub = sample_subgraph(
        heig,
        &split.test,
        config.fanout,
        config.hops,
        derive_seed(seed, &[stream::EVAL_SAMPLE, 1]),
    );

    let mut order = split.train.clone();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore, Vec<AugmentedFeatureSet>)> = None;
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        epochs_run = epoch + 1;
        if config.regenerate_views_per_epoch && epoch > 0 {
            views = run_views(heig, icvae, config.views, seed, Some(epoch))?;
        }
        order.clone_from(&split.train);
        order.shuffle(&mut rng_for(seed, &[stream::EPOCH_SHUFFLE, epoch as u64]));
        let mut sums = [0.0; 4];
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let sub = sample_subgraph(
                heig,
                batch,
                config.fanout,
                config.hops,
                derive_seed(seed, &[stream::SAMPLE, epoch as u64, b as u64]),
            );
            let labels = labels_of(heig, sub.targets());
            let mut tape = Tape::new();
            let vars = detector.store.bind(&mut tape);
            let nodes = detector.loss(&mut tape, &vars, heig, &views, &sub, &labels, contrast)?;
            let value = |v: Option<Var>| v.map_or(0.0, |v| tape.value(v).item());
            let w = batch.len() as f64;
            sums[0] += w * tape.value(nodes.pred).item();
            sums[1] += w * value(nodes.con_eoa);
            sums[2] += w * value(nodes.con_ca);
            sums[3] += w * tape.value(nodes.joint).item();
            let mut grads = tape.backward(nodes.joint);
            let grads = detector.store.collect_grads(&mut grads, &vars);
            opt.step(&mut detector.store, &grads);
        }
        let n = split.train.len().max(1) as f64;
        let (val, _) = evaluate_on(&detector, heig, &views, &val_sub)?;
        history.push(EpochRecord {
            epoch,
            pred: sums[0] / n,
            con_eoa: sums[1] / n,
            con_ca: sums[2] / n,
            joint: sums[3] / n,
            val,
        });
        let improved = best.as_ref().map_or(true, |b| val.macro_f1 > b.0);
        if improved {
            best = Some((val.macro_f1, epoch, detector.store.clone(), views.clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch >= best_epoch + config.patience {
            break;
        }
    }

    let (best_epoch, views) = match best {
        Some((_, epoch, store, best_views)) => {
            detector.store = store;
            (epoch, best_views)
        }
        None => (0, views),
    };
    let (val, _) = evaluate_on(&detector, heig, &views, &val_sub)?;
    let (test, predictions) = evaluate_on(&detector, heig, &views, &test_sub)?;
    Ok(TrainOutcome {
        seed,
        detector,
        split,
        best_epoch,
        epochs_run,
        history,
        val,
        test,
        predictions,
        views,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedOutcome {
    pub runs: Vec<TrainOutcome>,
    pub summary: MetricSummary,
}

/// [`train`] once per configured seed, reporting mean and deviation of the
/// test metrics.
pub fn train_seeds(heig: &Heig, icvae: &IcvaeParams, config: &TrainConfig) -> Result<MultiSeedOutcome> {
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let runs = config
        .seeds
        .iter()
        .map(|&s| train(heig, icvae, config, s))
        .collect::<Result<Vec<_>>>()?;
    let tests: Vec<Metrics> = runs.iter().map(|r| r.test).collect();
    Ok(MultiSeedOutcome {
        summary: summarize(&tests),
        runs,
    })
}

/// Contrast loss of the current parameters evaluated directly.
pub fn contrast_of(detector: &Detector, heig: &Heig, views: &[AugmentedFeatureSet], alpha: f64) -> ContrastLoss {
    crate::contrast::contrast_loss(&detector.encode_views(heig, views), heig.types(), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_loss_examples() {
        assert_eq!(classification_loss(&[[0.0, 1.0], [1.0, 0.0]], &[1, 0]).unwrap(), 0.0);
        let l = classification_loss(&[[0.5, 0.5]], &[1]).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        let floor = classification_loss(&[[1.0, 0.0]], &[1]).unwrap();
        assert!((floor - 12.0 * core::f64::consts::LN_10).abs() < 1e-9);
        assert_eq!(classification_loss(&[], &[]), Err(Error::EmptyBatch));
    }

    #[test]
    fn joint_loss_examples() {
        assert_eq!(joint_loss(0.7, 0.2, 0.3, 0.0), 0.7);
        assert!((joint_loss(1.0, 0.2, 0.3, 0.1) - 1.05).abs() < 1e-15);
        assert_eq!(joint_loss(0.0, 0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn detector_round_trips_through_parts() {
        let cfg = TrainConfig {
            hidden: 8,
            views: 2,
            ..TrainConfig::default()
        };
        let d = Detector::new(cfg.detector(), 3).unwrap();
        let back = Detector::from_parts(d.config, d.store.clone()).unwrap();
        assert_eq!(d, back);
        let mut wrong = cfg.detector();
        wrong.hidden = 12;
        assert!(Detector::from_parts(wrong, d.store).is_err());
    }
}

//! Interaction-aware conditional VAE (ICVAE).
//!
//! The encoder sees `(x_i, x_j, r_ij)`: target features, neighbor features
//! and the one-hot meta-interaction. It outputs the mean and log standard
//! deviation of a diagonal Gaussian posterior. The decoder maps
//! `(x_i, r_ij, z)` back to a feature vector. After pretraining, decoding
//! fresh `z ~ N(0, I)` under each of the three meta-interactions an account
//! can initiate yields its augmented views.
//!
//! The prior over `z` is a standard normal.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::heig::{sample_subgraph, Heig, MetaInteraction, META_DIM};
use crate::linalg::Matrix;
use crate::optim::Adam;
use crate::params::{fan_in_uniform, ParamId, ParamStore};
use crate::record::AccountType;
use crate::rng::{rng_for, stream, Rng};
use crate::tape::{Tape, Var};
use crate::FEATURE_DIM;

/// Bounds applied to the encoder's log standard deviation.
pub const LOG_SIGMA_CLAMP: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcvaeConfig {
    pub feature_dim: usize,
    /// Output widths of the three encoder layers. The last is split in half
    /// into the mean and log standard deviation.
    pub encoder_widths: [usize; 3],
    /// Hidden width of the two-layer decoder; its output width is `feature_dim`.
    pub decoder_hidden: usize,
    /// When false the meta-interaction condition is zeroed everywhere,
    /// reducing the model to a plain CVAE conditioned on `x_i` only.
    pub interaction_aware: bool,
}

impl Default for IcvaeConfig {
    fn default() -> Self {
        Self {
            feature_dim: FEATURE_DIM,
            encoder_widths: [32, 64, 50],
            decoder_hidden: 32,
            interaction_aware: true,
        }
    }
}

impl IcvaeConfig {
    pub fn latent_dim(&self) -> usize {
        self.encoder_widths[2] / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths[2] % 2 != 0 || self.encoder_widths[2] == 0 {
            return Err(Error::Config(alloc::format!(
                "last encoder width must be even and positive, got {}",
                self.encoder_widths[2]
            )));
        }
        if self.feature_dim == 0 || self.decoder_hidden == 0 || self.encoder_widths.contains(&0)
        {
            return Err(Error::Config("ICVAE widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    enc: [(ParamId, ParamId); 3],
    dec: [(ParamId, ParamId); 2],
}

impl Layout {
    fn new() -> Self {
        let p = |i| ParamId(i);
        Self {
            enc: [(p(0), p(1)), (p(2), p(3)), (p(4), p(5))],
            dec: [(p(6), p(7)), (p(8), p(9))],
        }
    }
}

/// ICVAE weights. Parameter order: `enc.w1, enc.b1, enc.w2, enc.b2, enc.w3,
/// enc.b3, dec.w1, dec.b1, dec.w2, dec.b2`; weights are `in × out`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcvaeParams {
    pub config: IcvaeConfig,
    pub store: ParamStore,
}

const NAMES: [&str; 10] = [
    "enc.w1", "enc.b1", "enc.w2", "enc.b2", "enc.w3", "enc.b3", "dec.w1", "dec.b1", "dec.w2",
    "dec.b2",
];

impl IcvaeParams {
    fn layer_shapes(config: &IcvaeConfig) -> [(usize, usize); 5] {
        let d = config.feature_dim;
        let [h1, h2, h3] = config.encoder_widths;
        [
            (2 * d + META_DIM, h1),
            (h1, h2),
            (h2, h3),
            (d + META_DIM + config.latent_dim(), config.decoder_hidden),
            (config.decoder_hidden, d),
        ]
    }

    /// Fan-in uniform weights, zero biases.
    pub fn init(config: IcvaeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, &[stream::INIT, 0x1cae]);
        let mut store = ParamStore::new();
        for (l, (fan_in, fan_out)) in Self::layer_shapes(&config).into_iter().enumerate() {
            store.push(NAMES[2 * l], fan_in_uniform(&mut rng, fan_in, fan_out));
            store.push(NAMES[2 * l + 1], Matrix::zeros(1, fan_out));
        }
        Ok(Self { config, store })
    }

    /// All weights and biases zero.
    pub fn zeros(config: IcvaeConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        for (l, (fan_in, fan_out)) in Self::layer_shapes(&config).into_iter().enumerate() {
            store.push(NAMES[2 * l], Matrix::zeros(fan_in, fan_out));
            store.push(NAMES[2 * l + 1], Matrix::zeros(1, fan_out));
        }
        Ok(Self { config, store })
    }

    /// Checks that `store` has the names and shapes `config` implies.
    pub fn from_store(config: IcvaeConfig, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = Self::zeros(config)?.store.shapes();
        let found = store.shapes();
        if expected.len() != found.len() {
            return Err(Error::DimensionMismatch {
                what: "ICVAE parameter count",
                expected: expected.len(),
                found: found.len(),
            });
        }
        for (e, f) in expected.iter().zip(&found) {
            if e != f {
                return Err(Error::DimensionMismatch {
                    what: "ICVAE parameter shape",
                    expected: e.1 * e.2,
                    found: f.1 * f.2,
                });
            }
        }
        Ok(Self { config, store })
    }
}

/// Batch of `(x_i, x_j, r_ij)` triples stored as matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleBatch {
    pub targets: Matrix,
    pub neighbors: Matrix,
    pub relations: Matrix,
}

impl TripleBatch {
    pub fn len(&self) -> usize {
        self.targets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.rows() == 0
    }

    pub fn from_triples(triples: &[TrainingTriple], feature_dim: usize) -> Self {
        let n = triples.len();
        let mut targets = Matrix::zeros(n, feature_dim);
        let mut neighbors = Matrix::zeros(n, feature_dim);
        let mut relations = Matrix::zeros(n, META_DIM);
        for (i, t) in triples.iter().enumerate() {
            targets.row_mut(i).copy_from_slice(&t.target);
            neighbors.row_mut(i).copy_from_slice(&t.neighbor);
            relations.row_mut(i).copy_from_slice(&t.relation.one_hot());
        }
        Self {
            targets,
            neighbors,
            relations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriple {
    /// `x_i`, the initiator and condition.
    pub target: Vec<f64>,
    /// `x_j`, the recipient and reconstruction target.
    pub neighbor: Vec<f64>,
    pub relation: MetaInteraction,
}

/// Tape handles for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ElboNodes {
    pub mu: Var,
    pub log_sigma: Var,
    pub sigma: Var,
    pub reconstruction: Var,
    /// Per-row squared reconstruction error.
    pub recon_error: Var,
    /// Per-row KL divergence to the standard normal.
    pub kl: Var,
    /// Mean over the batch of `recon_error + kl`: the negated ELBO.
    pub loss: Var,
}

fn condition(tape: &mut Tape, config: &IcvaeConfig, relations: &Matrix) -> Var {
    if config.interaction_aware {
        tape.constant(relations.clone())
    } else {
        tape.constant(Matrix::zeros(relations.rows(), relations.cols()))
    }
}

fn dense(tape: &mut Tape, input: Var, (w, b): (Var, Var), activate: bool) -> Var {
    let h = tape.matmul(input, w);
    let h = tape.add_row(h, b);
    if activate {
        tape.tanh(h)
    } else {
        h
    }
}

fn check_batch(config: &IcvaeConfig, batch: &TripleBatch) -> Result<()> {
    let d = config.feature_dim;
    for (what, m, cols) in [
        ("target features", &batch.targets, d),
        ("neighbor features", &batch.neighbors, d),
        ("meta-interaction one-hot", &batch.relations, META_DIM),
    ] {
        if m.cols() != cols {
            return Err(Error::DimensionMismatch {
                what,
                expected: cols,
                found: m.cols(),
            });
        }
        if m.rows() != batch.targets.rows() {
            return Err(Error::DimensionMismatch {
                what: "batch rows",
                expected: batch.targets.rows(),
                found: m.rows(),
            });
        }
    }
    Ok(())
}

/// Encoder on the tape; returns `(mu, log_sigma, sigma)`.
pub fn encode_on_tape(
    tape: &mut Tape,
    vars: &[Var],
    config: &IcvaeConfig,
    batch: &TripleBatch,
) -> (Var, Var, Var) {
    let layout = Layout::new();
    let v = |id: ParamId| vars[id.0];
    let xi = tape.constant(batch.targets.clone());
    let xj = tape.constant(batch.neighbors.clone());
    let r = condition(tape, config, &batch.relations);
    let input = tape.concat_cols(&[xi, xj, r]);
    let [l1, l2, l3] = layout.enc;
    let h = dense(tape, input, (v(l1.0), v(l1.1)), true);
    let h = dense(tape, h, (v(l2.0), v(l2.1)), true);
    let out = dense(tape, h, (v(l3.0), v(l3.1)), false);
    let latent = config.latent_dim();
    let mu = tape.slice_cols(out, 0, latent);
    let raw_log_sigma = tape.slice_cols(out, latent, latent);
    let log_sigma = tape.clamp(raw_log_sigma, LOG_SIGMA_CLAMP.0, LOG_SIGMA_CLAMP.1);
    let sigma = tape.exp(log_sigma);
    (mu, log_sigma, sigma)
}

/// Decoder on the tape: `(x_i, r, z) ↦ x̂`.
pub fn decode_on_tape(
    tape: &mut Tape,
    vars: &[Var],
    config: &IcvaeConfig,
    targets: Var,
    relations: &Matrix,
    z: Var,
) -> Var {
    let layout = Layout::new();
    let v = |id: ParamId| vars[id.0];
    let r = condition(tape, config, relations);
    let input = tape.concat_cols(&[targets, r, z]);
    let [l1, l2] = layout.dec;
    let h = dense(tape, input, (v(l1.0), v(l1.1)), true);
    dense(tape, h, (v(l2.0), v(l2.1)), false)
}

/// Full negated-ELBO graph with explicit standard-normal noise `eps`
/// (`batch × latent`).
pub fn elbo_on_tape(
    tape: &mut Tape,
    vars: &[Var],
    config: &IcvaeConfig,
    batch: &TripleBatch,
    eps: &Matrix,
) -> ElboNodes {
    let (mu, log_sigma, sigma) = encode_on_tape(tape, vars, config, batch);
    let eps = tape.constant(eps.clone());
    let noise = tape.mul(eps, sigma);
    let z = tape.add(mu, noise);
    let xi = tape.constant(batch.targets.clone());
    let reconstruction = decode_on_tape(tape, vars, config, xi, &batch.relations, z);
    let xj = tape.constant(batch.neighbors.clone());
    let diff = tape.sub(xj, reconstruction);
    let sq = tape.square(diff);
    let recon_error = tape.row_sum(sq);
    let kl = kl_on_tape(tape, mu, log_sigma, sigma);
    let per_row = tape.add(recon_error, kl);
    let loss = tape.mean(per_row);
    ElboNodes {
        mu,
        log_sigma,
        sigma,
        reconstruction,
        recon_error,
        kl,
        loss,
    }
}

/// Per-row `½ Σ (σ² + μ² − 1 − 2 log σ)`.
fn kl_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var, sigma: Var) -> Var {
    let s2 = tape.square(sigma);
    let m2 = tape.square(mu);
    let two_log = tape.scale(log_sigma, 2.0);
    let a = tape.add(s2, m2);
    let a = tape.sub(a, two_log);
    let a = tape.add_scalar(a, -1.0);
    let a = tape.row_sum(a);
    tape.scale(a, 0.5)
}

/// Closed-form KL divergence of `N(μ, σ²)` from `N(0, I)`.
pub fn kl_divergence(mu: &[f64], sigma: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(sigma)
        .map(|(&m, &s)| s * s + m * m - 1.0 - 2.0 * libm::log(s))
        .sum::<f64>()
}

fn single(x: &[f64]) -> Matrix {
    Matrix::row_vector(x)
}

/// Posterior mean and standard deviation for one triple.
pub fn encode(
    target: &[f64],
    neighbor: &[f64],
    relation: &[f64],
    params: &IcvaeParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let batch = TripleBatch {
        targets: single(target),
        neighbors: single(neighbor),
        relations: single(relation),
    };
    check_batch(&params.config, &batch)?;
    let mut tape = Tape::new();
    let vars = params.store.bind(&mut tape);
    let (mu, _, sigma) = encode_on_tape(&mut tape, &vars, &params.config, &batch);
    Ok((
        tape.value(mu).data().to_vec(),
        tape.value(sigma).data().to_vec(),
    ))
}

/// `z = μ + ε ⊙ σ`.
pub fn reparameterize(mu: &[f64], sigma: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(sigma)
        .zip(eps)
        .map(|((m, s), e)| m + e * s)
        .collect()
}

/// Generated features for condition `(x_i, r)` and latent `z`.
pub fn decode(target: &[f64], relation: &[f64], z: &[f64], params: &IcvaeParams) -> Result<Vec<f64>> {
    let config = &params.config;
    let expected = config.feature_dim + META_DIM + config.latent_dim();
    let found = target.len() + relation.len() + z.len();
    if target.len() != config.feature_dim || relation.len() != META_DIM || found != expected {
        return Err(Error::DimensionMismatch {
            what: "decoder input",
            expected,
            found,
        });
    }
    let mut tape = Tape::new();
    let vars = params.store.bind(&mut tape);
    let xi = tape.constant(single(target));
    let zv = tape.constant(single(z));
    let out = decode_on_tape(&mut tape, &vars, config, xi, &single(relation), zv);
    Ok(tape.value(out).data().to_vec())
}

/// Standard-normal `rows × cols` matrix.
pub fn standard_normal(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Mean negated ELBO and its parts for a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboValue {
    /// Mean over the batch of `reconstruction + kl`; the quantity minimized.
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

impl ElboValue {
    /// The ELBO itself (to be maximized).
    pub fn elbo(&self) -> f64 {
        -self.loss
    }
}

pub fn elbo_loss_with_noise(
    batch: &TripleBatch,
    params: &IcvaeParams,
    eps: &Matrix,
) -> Result<ElboValue> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_batch(&params.config, batch)?;
    let mut tape = Tape::new();
    let vars = params.store.bind(&mut tape);
    let nodes = elbo_on_tape(&mut tape, &vars, &params.config, batch, eps);
    let n = batch.len() as f64;
    Ok(ElboValue {
        loss: tape.value(nodes.loss).item(),
        reconstruction: tape.value(nodes.recon_error).sum() / n,
        kl: tape.value(nodes.kl).sum() / n,
    })
}

/// Negated ELBO with noise drawn from `seed`.
pub fn elbo_loss(batch: &TripleBatch, params: &IcvaeParams, seed: u64) -> Result<ElboValue> {
    let mut rng = rng_for(seed, &[stream::PRETRAIN_NOISE]);
    let eps = standard_normal(&mut rng, batch.len(), params.config.latent_dim());
    elbo_loss_with_noise(batch, params, &eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Per-group cap when sampling the edges that become training triples.
    pub fanout: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 200,
            batch_size: 256,
            seed: 0,
            fanout: crate::heig::DEFAULT_FANOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub params: IcvaeParams,
    /// Mean negated ELBO over the epoch's batches, as seen during training.
    pub train_history: Vec<f64>,
    /// Negated ELBO of all triples after each epoch, with noise fixed for
    /// the whole run.
    pub history: Vec<f64>,
}

/// One triple per sampled edge, with the initiator as target.
pub fn training_triples(heig: &Heig, fanout: usize, seed: u64) -> Vec<TrainingTriple> {
    let all: Vec<usize> = (0..heig.num_accounts()).collect();
    let sub = sample_subgraph(
        heig,
        &all,
        fanout,
        1,
        crate::rng::derive_seed(seed, &[stream::PRETRAIN_SAMPLE]),
    );
    sub.edges
        .iter()
        .map(|&e| {
            let edge = heig.edge(e);
            TrainingTriple {
                target: heig.feature_row(edge.src).to_vec(),
                neighbor: heig.feature_row(edge.dst).to_vec(),
                relation: edge.meta,
            }
        })
        .collect()
}

pub fn pretrain(
    heig: &Heig,
    icvae: IcvaeConfig,
    config: &PretrainConfig,
) -> Result<PretrainOutcome> {
    if heig.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let triples = training_triples(heig, config.fanout, config.seed);
    let params = IcvaeParams::init(icvae, config.seed)?;
    pretrain_on_triples(&triples, params, config)
}

/// Minibatch Adam on the negated ELBO, starting from `params`.
pub fn pretrain_on_triples(
    triples: &[TrainingTriple],
    mut params: IcvaeParams,
    config: &PretrainConfig,
) -> Result<PretrainOutcome> {
    if triples.is_empty() {
        return Err(Error::NoEdges);
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut opt = Adam::new(config.lr, &params.store);
    let latent = params.config.latent_dim();
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut train_history = Vec::with_capacity(config.epochs);
    let all = TripleBatch::from_triples(triples, params.config.feature_dim);
    let eval_eps = standard_normal(
        &mut rng_for(config.seed, &[stream::PRETRAIN_NOISE, u64::MAX]),
        all.len(),
        latent,
    );
    let mut picked = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(
            config.seed,
            &[stream::PRETRAIN_SHUFFLE, epoch as u64],
        ));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            picked.clear();
            picked.extend(chunk.iter().map(|&i| triples[i].clone()));
            let batch = TripleBatch::from_triples(&picked, params.config.feature_dim);
            let mut rng = rng_for(
                config.seed,
                &[stream::PRETRAIN_NOISE, epoch as u64, b as u64],
            );
            let eps = standard_normal(&mut rng, batch.len(), latent);
            let mut tape = Tape::new();
            let vars = params.store.bind(&mut tape);
            let nodes = elbo_on_tape(&mut tape, &vars, &params.config, &batch, &eps);
            total += tape.value(nodes.loss).item() * batch.len() as f64;
            let mut grads = tape.backward(nodes.loss);
            let grads = params.store.collect_grads(&mut grads, &vars);
            opt.step(&mut params.store, &grads);
        }
        train_history.push(total / triples.len() as f64);
        history.push(elbo_loss_with_noise(&all, &params, &eval_eps)?.loss);
    }
    Ok(PretrainOutcome {
        params,
        train_history,
        history,
    })
}

/// Original plus generated features for one account: `views × 4` rows of
/// width `d`, view-major. Slot 0 of every view is `x_i`; slots 1..=3 are
/// decoded under the account type's `r¹, r², r³`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AugmentedFeatureSet {
    pub views: usize,
    pub data: Matrix,
}

pub const SLOTS: usize = 4;

impl AugmentedFeatureSet {
    pub fn slot(&self, view: usize, slot: usize) -> &[f64] {
        self.data.row(view * SLOTS + slot)
    }
}

/// Builds the view tensor from explicit latents (`views·3 × latent`, ordered
/// view-major then meta-interaction rank).
pub fn generate_views_from_latents(
    target: &[f64],
    account_type: AccountType,
    params: &IcvaeParams,
    latents: &Matrix,
) -> Result<AugmentedFeatureSet> {
    let config = &params.config;
    let views = latents.rows() / 3;
    if views == 0 || latents.rows() % 3 != 0 || latents.cols() != config.latent_dim() {
        return Err(Error::DimensionMismatch {
            what: "view latents",
            expected: config.latent_dim(),
            found: latents.cols(),
        });
    }
    if target.len() != config.feature_dim {
        return Err(Error::DimensionMismatch {
            what: "target features",
            expected: config.feature_dim,
            found: target.len(),
        });
    }
    let metas = MetaInteraction::initiable_by(account_type);
    let rows = latents.rows();
    let mut relations = Matrix::zeros(rows, META_DIM);
    let mut targets = Matrix::zeros(rows, config.feature_dim);
    for r in 0..rows {
        relations.row_mut(r).copy_from_slice(&metas[r % 3].one_hot());
        targets.row_mut(r).copy_from_slice(target);
    }
    let mut tape = Tape::new();
    let vars = params.store.bind(&mut tape);
    let xi = tape.constant(targets);
    let z = tape.constant(latents.clone());
    let out = decode_on_tape(&mut tape, &vars, config, xi, &relations, z);
    let generated = tape.value(out);
    let mut data = Matrix::zeros(views * SLOTS, config.feature_dim);
    for m in 0..views {
        data.row_mut(m * SLOTS).copy_from_slice(target);
        for k in 0..3 {
            data.row_mut(m * SLOTS + 1 + k)
                .copy_from_slice(generated.row(m * 3 + k));
        }
    }
    Ok(AugmentedFeatureSet { views, data })
}

/// Samples a fresh `z ~ N(0, I)` per (view, meta-interaction) and decodes.
pub fn generate_views(
    target: &[f64],
    account_type: AccountType,
    views: usize,
    params: &IcvaeParams,
    seed: u64,
) -> Result<AugmentedFeatureSet> {
    if views == 0 {
        return Err(Error::Config("view count must be at least 1".into()));
    }
    let mut rng = rng_for(seed, &[stream::VIEWS]);
    let latents = standard_normal(&mut rng, views * 3, params.config.latent_dim());
    generate_views_from_latents(target, account_type, params, &latents)
}

/// Views for every account of `heig`; the stream for account `i` is keyed by
/// `(seed, i)`.
pub fn generate_all_views(
    heig: &Heig,
    views: usize,
    params: &IcvaeParams,
    seed: u64,
) -> Result<Vec<AugmentedFeatureSet>> {
    (0..heig.num_accounts())
        .map(|i| {
            generate_views(
                heig.feature_row(i),
                heig.account_type(i),
                views,
                params,
                crate::rng::derive_seed(seed, &[i as u64]),
            )
        })
        .collect()
}

/// Empty placeholder used by callers that fill views lazily.
pub fn zero_views(views: usize, feature_dim: usize) -> AugmentedFeatureSet {
    AugmentedFeatureSet {
        views,
        data: Matrix::zeros(views * SLOTS, feature_dim),
    }
}

//! Multi-view interaction feature learning: type-specific encoding,
//! intra-view mean pooling and inter-view fusion.
//!
//! Input rows are laid out account-major, then view, then slot, so one
//! account's augmented set occupies `views × 4` consecutive rows.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::icvae::{AugmentedFeatureSet, SLOTS};
use crate::linalg::Matrix;
use crate::params::{fan_in_uniform, ParamId, ParamStore};
use crate::record::AccountType;
use crate::rng::{rng_for, stream};
use crate::tape::{Tape, Var};
use crate::FEATURE_DIM;

pub const DEFAULT_HEADS: usize = 4;

/// How the `M` per-view vectors are fused into one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViewAggregation {
    /// Multi-head self-attention across views, then the mean over views.
    #[default]
    SelfAttention,
    Sum,
    /// Views concatenated; the output width is `views · hidden`.
    Concat,
    /// A learned score per view, softmax over views, weighted sum.
    NaiveAttention,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiViewConfig {
    pub feature_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub views: usize,
    pub aggregation: ViewAggregation,
    /// One weight set for both account types.
    pub share_weights: bool,
}

impl Default for MultiViewConfig {
    fn default() -> Self {
        Self {
            feature_dim: FEATURE_DIM,
            hidden: 64,
            heads: DEFAULT_HEADS,
            views: 3,
            aggregation: ViewAggregation::SelfAttention,
            share_weights: false,
        }
    }
}

impl MultiViewConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views == 0 {
            return Err(Error::Config("view count must be at least 1".into()));
        }
        if self.hidden == 0 || self.heads == 0 || self.feature_dim == 0 {
            return Err(Error::Config("hidden width and head count must be positive".into()));
        }
        if self.aggregation == ViewAggregation::SelfAttention && self.hidden % self.heads != 0 {
            return Err(Error::HeadDivisibility {
                dim: self.hidden,
                heads: self.heads,
            });
        }
        Ok(())
    }

    /// Width of the fused account vector.
    pub fn output_dim(&self) -> usize {
        match self.aggregation {
            ViewAggregation::Concat => self.views * self.hidden,
            _ => self.hidden,
        }
    }
}

/// Parameter ids of one account type's weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeWeights {
    /// `Θ̂`, `feature_dim × hidden`.
    pub theta_hat: ParamId,
    /// `Θ̄`, `hidden × hidden`.
    pub theta_bar: ParamId,
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    /// Per-view score vector (`hidden × 1`), naive attention only.
    pub score: Option<ParamId>,
}

/// Where the multi-view weights live inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewLayout {
    pub config: MultiViewConfig,
    sets: Vec<TypeWeights>,
}

fn set_names(config: &MultiViewConfig) -> &'static [&'static str] {
    if config.share_weights {
        &["shared"]
    } else {
        &["eoa", "ca"]
    }
}

impl MultiViewLayout {
    /// Appends freshly initialized weights to `store` under `prefix`.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        config: MultiViewConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, &[stream::INIT, 0x3a11]);
        let (d, h) = (config.feature_dim, config.hidden);
        let mut sets = Vec::new();
        for set in set_names(&config) {
            let mut push = |name: &str, rows, cols| {
                store.push(
                    &format!("{prefix}{set}.{name}"),
                    fan_in_uniform(&mut rng, rows, cols),
                )
            };
            let theta_hat = push("theta_hat", d, h);
            let theta_bar = push("theta_bar", h, h);
            let w_q = push("w_q", h, h);
            let w_k = push("w_k", h, h);
            let w_v = push("w_v", h, h);
            let score = (config.aggregation == ViewAggregation::NaiveAttention)
                .then(|| push("score", h, 1));
            sets.push(TypeWeights {
                theta_hat,
                theta_bar,
                w_q,
                w_k,
                w_v,
                score,
            });
        }
        Ok(Self { config, sets })
    }

    /// Resolves the ids of an already populated store.
    pub fn locate(store: &ParamStore, prefix: &str, config: MultiViewConfig) -> Result<Self> {
        config.validate()?;
        let find = |set: &str, name: &str, rows: usize, cols: usize| {
            let full = format!("{prefix}{set}.{name}");
            let id = store
                .index_of(&full)
                .ok_or_else(|| Error::Config(format!("missing parameter {full}")))?;
            let m = store.get(id);
            if m.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    what: "multi-view weight",
                    expected: rows * cols,
                    found: m.rows() * m.cols(),
                });
            }
            Ok(id)
        };
        let (d, h) = (config.feature_dim, config.hidden);
        let mut sets = Vec::new();
        for set in set_names(&config) {
            sets.push(TypeWeights {
                theta_hat: find(set, "theta_hat", d, h)?,
                theta_bar: find(set, "theta_bar", h, h)?,
                w_q: find(set, "w_q", h, h)?,
                w_k: find(set, "w_k", h, h)?,
                w_v: find(set, "w_v", h, h)?,
                score: match config.aggregation {
                    ViewAggregation::NaiveAttention => Some(find(set, "score", h, 1)?),
                    _ => None,
                },
            });
        }
        Ok(Self { config, sets })
    }

    pub fn weights_for(&self, ty: AccountType) -> &TypeWeights {
        if self.config.share_weights {
            &self.sets[0]
        } else {
            &self.sets[ty.index()]
        }
    }

    /// Forward pass for a batch of accounts; `fused` rows follow `sets`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        sets: &[&AugmentedFeatureSet],
        types: &[AccountType],
    ) -> Result<MultiViewNodes> {
        assert_eq!(sets.len(), types.len());
        let c = &self.config;
        for s in sets {
            if s.views != c.views || s.data.cols() != c.feature_dim {
                return Err(Error::DimensionMismatch {
                    what: "augmented feature set",
                    expected: c.views * SLOTS * c.feature_dim,
                    found: s.views * SLOTS * s.data.cols(),
                });
            }
        }
        let mut groups = Vec::new();
        for ty in AccountType::ALL {
            let rows: Vec<usize> = (0..types.len()).filter(|&i| types[i] == ty).collect();
            if rows.is_empty() {
                continue;
            }
            let block = c.views * SLOTS;
            let mut x = Matrix::zeros(rows.len() * block, c.feature_dim);
            for (k, &i) in rows.iter().enumerate() {
                x.data_mut()[k * block * c.feature_dim..(k + 1) * block * c.feature_dim]
                    .copy_from_slice(sets[i].data.data());
            }
            let x = tape.constant(x);
            let nodes = self.forward_group(tape, vars, x, ty);
            groups.push(GroupNodes {
                ty,
                rows,
                h_hat: nodes.0,
                h_bar: nodes.1,
                attention: nodes.2,
                fused: nodes.3,
            });
        }
        let parts: Vec<(Var, &[usize])> = groups.iter().map(|g| (g.fused, &g.rows[..])).collect();
        let fused = tape.merge_rows(types.len(), &parts);
        Ok(MultiViewNodes { fused, groups })
    }

    /// `x` is `(n · views · 4) × feature_dim` for accounts of type `ty`.
    /// Returns `(Ĥ, H̄, attention node, fused)`.
    fn forward_group(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        ty: AccountType,
    ) -> (Var, Var, Option<Var>, Var) {
        let c = &self.config;
        let w = self.weights_for(ty);
        let v = |id: ParamId| vars[id.0];
        let h_hat = tape.matmul(x, v(w.theta_hat));
        let h_hat = tape.tanh(h_hat);
        let pooled = tape.group_mean(h_hat, SLOTS);
        let h_bar = tape.matmul(pooled, v(w.theta_bar));
        let h_bar = tape.tanh(h_bar);
        let rows = tape.value(h_bar).rows() / c.views;
        let (attention, fused) = match c.aggregation {
            ViewAggregation::SelfAttention => {
                let q = tape.matmul(h_bar, v(w.w_q));
                let k = tape.matmul(h_bar, v(w.w_k));
                let val = tape.matmul(h_bar, v(w.w_v));
                let att = tape.view_attention(q, k, val, c.views, c.heads);
                (Some(att), tape.group_mean(att, c.views))
            }
            ViewAggregation::Sum => (None, tape.group_sum(h_bar, c.views)),
            ViewAggregation::Concat => (None, tape.reshape(h_bar, rows, c.views * c.hidden)),
            ViewAggregation::NaiveAttention => {
                let scores = tape.matmul(h_bar, v(w.score.expect("score vector registered")));
                let weights = tape.group_softmax(scores, c.views);
                let weighted = tape.mul_rows_by_col(h_bar, weights);
                (None, tape.group_sum(weighted, c.views))
            }
        };
        (h_hat, h_bar, attention, fused)
    }
}

/// Tape nodes of one account-type group.
#[derive(Debug, Clone)]
pub struct GroupNodes {
    pub ty: AccountType,
    /// Positions of the group's accounts in the batch.
    pub rows: Vec<usize>,
    /// `(n · views · 4) × hidden`.
    pub h_hat: Var,
    /// `(n · views) × hidden`.
    pub h_bar: Var,
    pub attention: Option<Var>,
    pub fused: Var,
}

#[derive(Debug, Clone)]
pub struct MultiViewNodes {
    pub fused: Var,
    pub groups: Vec<GroupNodes>,
}

/// Stand-alone multi-view encoder with its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewEncoder {
    pub store: ParamStore,
    pub layout: MultiViewLayout,
}

impl MultiViewEncoder {
    pub fn new(config: MultiViewConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let layout = MultiViewLayout::register(&mut store, "", config, seed)?;
        Ok(Self { store, layout })
    }

    pub fn config(&self) -> &MultiViewConfig {
        &self.layout.config
    }

    pub fn weights_mut(&mut self, ty: AccountType, pick: impl Fn(&TypeWeights) -> ParamId) -> &mut Matrix {
        let id = pick(self.layout.weights_for(ty));
        self.store.get_mut(id)
    }

    /// `Ĥ = tanh(X̂ Θ̂)`, one row per (view, slot).
    pub fn encode_type_specific(&self, x: &AugmentedFeatureSet, ty: AccountType) -> Result<Matrix> {
        let c = self.config();
        if x.data.cols() != c.feature_dim {
            return Err(Error::DimensionMismatch {
                what: "augmented features",
                expected: c.feature_dim,
                found: x.data.cols(),
            });
        }
        let w = self.store.get(self.layout.weights_for(ty).theta_hat);
        Ok(x.data.matmul(w).map(libm::tanh))
    }

    /// `H̄[m] = tanh(mean_slots(Ĥ[m]) Θ̄)`.
    pub fn intra_view_aggregate(&self, h_hat: &Matrix, ty: AccountType) -> Result<Matrix> {
        let c = self.config();
        if h_hat.cols() != c.hidden || h_hat.rows() % SLOTS != 0 || h_hat.rows() == 0 {
            return Err(Error::DimensionMismatch {
                what: "encoded view tensor",
                expected: c.hidden,
                found: h_hat.cols(),
            });
        }
        let views = h_hat.rows() / SLOTS;
        let mut pooled = Matrix::zeros(views, c.hidden);
        for m in 0..views {
            for s in 0..SLOTS {
                for (p, &v) in pooled.row_mut(m).iter_mut().zip(h_hat.row(m * SLOTS + s)) {
                    *p += v / SLOTS as f64;
                }
            }
        }
        let w = self.store.get(self.layout.weights_for(ty).theta_bar);
        Ok(pooled.matmul(w).map(libm::tanh))
    }

    /// Self-attention over the rows of `h_bar` (`M × hidden`). Returns the
    /// fused vector, the per-view outputs and the attention weights laid out
    /// `[head][query][key]`.
    pub fn inter_view_attention(
        &self,
        h_bar: &Matrix,
        ty: AccountType,
    ) -> Result<(Vec<f64>, Matrix, Vec<f64>)> {
        let c = self.config();
        if c.hidden % c.heads != 0 {
            return Err(Error::HeadDivisibility {
                dim: c.hidden,
                heads: c.heads,
            });
        }
        if h_bar.cols() != c.hidden || h_bar.rows() == 0 {
            return Err(Error::DimensionMismatch {
                what: "view hidden matrix",
                expected: c.hidden,
                found: h_bar.cols(),
            });
        }
        let w = self.layout.weights_for(ty);
        let mut tape = Tape::new();
        let h = tape.constant(h_bar.clone());
        let [wq, wk, wv] = [w.w_q, w.w_k, w.w_v].map(|id| tape.constant(self.store.get(id).clone()));
        let q = tape.matmul(h, wq);
        let k = tape.matmul(h, wk);
        let v = tape.matmul(h, wv);
        let views = h_bar.rows();
        let att = tape.view_attention(q, k, v, views, c.heads);
        let fused = tape.group_mean(att, views);
        Ok((
            tape.value(fused).data().to_vec(),
            tape.value(att).clone(),
            tape.attention_weights(att).unwrap_or_default().to_vec(),
        ))
    }

    /// Fused vectors for several accounts, in input order.
    pub fn fuse(&self, sets: &[&AugmentedFeatureSet], types: &[AccountType]) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let nodes = self.layout.forward(&mut tape, &vars, sets, types)?;
        Ok(tape.value(nodes.fused).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(hidden: usize, heads: usize, views: usize) -> MultiViewConfig {
        MultiViewConfig {
            feature_dim: 3,
            hidden,
            heads,
            views,
            aggregation: ViewAggregation::SelfAttention,
            share_weights: false,
        }
    }

    fn set(views: usize, rows: &[[f64; 3]]) -> AugmentedFeatureSet {
        let flat: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        AugmentedFeatureSet {
            views,
            data: Matrix::from_rows(&flat),
        }
    }

    #[test]
    fn head_divisibility_checked() {
        assert_eq!(
            MultiViewEncoder::new(cfg(6, 4, 1), 0).unwrap_err(),
            Error::HeadDivisibility { dim: 6, heads: 4 }
        );
    }

    #[test]
    fn zero_weights_give_zero_encoding() {
        let mut e = MultiViewEncoder::new(cfg(4, 2, 1), 0).unwrap();
        e.store.values_mut().iter_mut().for_each(|m| *m = Matrix::zeros(m.rows(), m.cols()));
        let x = set(1, &[[1.0, 2.0, 3.0]; 4]);
        let h = e.encode_type_specific(&x, AccountType::Ca).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn type_specific_weights_differ() {
        let e = MultiViewEncoder::new(cfg(4, 2, 1), 2).unwrap();
        let x = set(1, &[[0.5, 0.1, 0.9]; 4]);
        assert_ne!(
            e.encode_type_specific(&x, AccountType::Eoa).unwrap(),
            e.encode_type_specific(&x, AccountType::Ca).unwrap()
        );
    }

    #[test]
    fn toy_encoding_matches_hand_product() {
        let mut e = MultiViewEncoder::new(cfg(2, 1, 1), 0).unwrap();
        *e.weights_mut(AccountType::Eoa, |w| w.theta_hat) =
            Matrix::from_rows(&[&[1.0, 0.0], &[0.5, -1.0], &[0.0, 2.0]]);
        let x = set(1, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]);
        let h = e.encode_type_specific(&x, AccountType::Eoa).unwrap();
        let expected = [[1.0, 0.0], [0.5, -1.0], [0.0, 2.0], [1.5, 1.0]];
        for (r, row) in expected.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert_eq!(h.get(r, c), libm::tanh(v));
            }
        }
    }

    #[test]
    fn pooling_cancels_symmetric_slots() {
        let e = MultiViewEncoder::new(cfg(2, 1, 1), 4).unwrap();
        let h = Matrix::from_rows(&[&[0.3, -0.2], &[-0.3, 0.2], &[0.7, 0.1], &[-0.7, -0.1]]);
        let out = e.intra_view_aggregate(&h, AccountType::Ca).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooling_of_identical_slots() {
        let e = MultiViewEncoder::new(cfg(2, 1, 1), 4).unwrap();
        let h = Matrix::from_rows(&[&[0.3, -0.2][..]; 4]);
        let out = e.intra_view_aggregate(&h, AccountType::Eoa).unwrap();
        let direct = Matrix::row_vector(&[0.3, -0.2])
            .matmul(e.store.get(e.layout.weights_for(AccountType::Eoa).theta_bar))
            .map(libm::tanh);
        assert!(out.max_abs_diff(&direct) < 1e-15);
    }

    #[test]
    fn single_view_returns_value_row() {
        let e = MultiViewEncoder::new(cfg(4, 2, 1), 5).unwrap();
        let h = Matrix::row_vector(&[0.1, -0.4, 0.3, 0.8]);
        let (fused, _, weights) = e.inter_view_attention(&h, AccountType::Eoa).unwrap();
        let wv = e.store.get(e.layout.weights_for(AccountType::Eoa).w_v);
        let v = h.matmul(wv);
        assert_eq!(fused, v.data());
        assert!(weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn shared_weights_ignore_type() {
        let mut c = cfg(4, 2, 2);
        c.share_weights = true;
        let e = MultiViewEncoder::new(c, 1).unwrap();
        let x = set(2, &[[0.2, 0.4, 0.6]; 8]);
        let out = e.fuse(&[&x, &x], &[AccountType::Eoa, AccountType::Ca]).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn aggregation_output_widths() {
        for (agg, width) in [
            (ViewAggregation::SelfAttention, 4),
            (ViewAggregation::Sum, 4),
            (ViewAggregation::Concat, 8),
            (ViewAggregation::NaiveAttention, 4),
        ] {
            let mut c = cfg(4, 2, 2);
            c.aggregation = agg;
            let e = MultiViewEncoder::new(c, 1).unwrap();
            let x = set(2, &[[0.2, 0.4, 0.6]; 8]);
            let out = e.fuse(&[&x], &[AccountType::Ca]).unwrap();
            assert_eq!(out.shape(), (1, width));
            assert_eq!(c.output_dim(), width);
        }
    }

    #[test]
    fn batch_fuse_matches_single_account_path() {
        let e = MultiViewEncoder::new(cfg(4, 2, 2), 9).unwrap();
        let a = set(2, &[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9], [0.2, 0.1, 0.0],
                         [0.1, 0.2, 0.3], [0.9, 0.5, 0.1], [0.3, 0.3, 0.3], [0.0, 1.0, 0.0]]);
        let b = set(2, &[[0.5; 3]; 8]);
        let batch = e.fuse(&[&a, &b], &[AccountType::Ca, AccountType::Eoa]).unwrap();
        let h = e.encode_type_specific(&a, AccountType::Ca).unwrap();
        let hb = e.intra_view_aggregate(&h, AccountType::Ca).unwrap();
        let (fused, _, _) = e.inter_view_attention(&hb, AccountType::Ca).unwrap();
        for (x, y) in batch.row(0).iter().zip(&fused) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

//! The 14-dimensional manual account features.
//!
//! Layout: the `call` block (columns 0..7) then the `trans` block (7..14),
//! each `[total_out, total_in, avg_out, avg_in, balance, n_initiated,
//! n_received]`. "Out" is value the account sent (investment), "in" is value
//! it received (return).

use alloc::vec;
use alloc::vec::Vec;

use super::Heig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::record::InteractionKind;
use crate::FEATURE_DIM;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "call_total_out",
    "call_total_in",
    "call_avg_out",
    "call_avg_in",
    "call_balance",
    "call_n_initiated",
    "call_n_received",
    "trans_total_out",
    "trans_total_in",
    "trans_avg_out",
    "trans_avg_in",
    "trans_balance",
    "trans_n_initiated",
    "trans_n_received",
];

/// Exact mean `total / count`; zero when `count == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Average {
    pub total: u128,
    pub count: u64,
}

impl Average {
    pub fn to_f64(self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total as f64 / self.count as f64
        }
    }
}

/// Integer statistics of one account for one interaction kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindStats {
    pub total_out: u128,
    pub total_in: u128,
    pub n_initiated: u64,
    pub n_received: u64,
}

impl KindStats {
    pub fn record_out(&mut self, value: u128) {
        self.total_out = self.total_out.saturating_add(value);
        self.n_initiated += 1;
    }

    pub fn record_in(&mut self, value: u128) {
        self.total_in = self.total_in.saturating_add(value);
        self.n_received += 1;
    }

    pub fn avg_out(&self) -> Average {
        Average {
            total: self.total_out,
            count: self.n_initiated,
        }
    }

    pub fn avg_in(&self) -> Average {
        Average {
            total: self.total_in,
            count: self.n_received,
        }
    }

    /// `total_in - total_out`, saturating at the `i128` range.
    pub fn balance(&self) -> i128 {
        let clamp = |v: u128| i128::try_from(v).unwrap_or(i128::MAX);
        clamp(self.total_in).saturating_sub(clamp(self.total_out))
    }

    fn write_block(&self, out: &mut [f64]) {
        out[0] = self.total_out as f64;
        out[1] = self.total_in as f64;
        out[2] = self.avg_out().to_f64();
        out[3] = self.avg_in().to_f64();
        out[4] = self.balance() as f64;
        out[5] = self.n_initiated as f64;
        out[6] = self.n_received as f64;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccountStats {
    pub call: KindStats,
    pub trans: KindStats,
}

impl AccountStats {
    pub fn kind(&self, kind: InteractionKind) -> &KindStats {
        match kind {
            InteractionKind::Call => &self.call,
            InteractionKind::Trans => &self.trans,
        }
    }

    pub fn kind_mut(&mut self, kind: InteractionKind) -> &mut KindStats {
        match kind {
            InteractionKind::Call => &mut self.call,
            InteractionKind::Trans => &mut self.trans,
        }
    }

    pub fn to_row(&self) -> [f64; FEATURE_DIM] {
        let mut row = [0.0; FEATURE_DIM];
        self.call.write_block(&mut row[..7]);
        self.trans.write_block(&mut row[7..]);
        row
    }
}

/// Pre-normalization features, kept in integer form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawFeatures {
    pub accounts: Vec<AccountStats>,
}

impl RawFeatures {
    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.accounts.len(), FEATURE_DIM);
        for (i, a) in self.accounts.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&a.to_row());
        }
        m
    }
}

/// Per-account statistics from each account's incident edge lists.
/// A self-interaction counts as both an initiation and a reception.
pub fn extract_features(heig: &Heig) -> RawFeatures {
    let accounts = (0..heig.num_accounts())
        .map(|v| {
            let mut stats = AccountStats::default();
            for &e in heig.out_edges(v) {
                let edge = heig.edge(e);
                stats.kind_mut(edge.kind).record_out(edge.value);
            }
            for &e in heig.in_edges(v) {
                let edge = heig.edge(e);
                stats.kind_mut(edge.kind).record_in(edge.value);
            }
            stats
        })
        .collect();
    RawFeatures { accounts }
}

/// `sign(x) · ln(1 + |x|)`.
pub fn log1p_signed(x: f64) -> f64 {
    if x < 0.0 {
        -libm::log1p(-x)
    } else {
        libm::log1p(x)
    }
}

/// Per-column range of the signed-log features.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    /// Maps `raw` into `[0, 1]` per column: signed log, then min-max with the
    /// stored range. Constant columns map to 0; out-of-range values are
    /// clamped.
    pub fn apply(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.min.len() {
            return Err(Error::DimensionMismatch {
                what: "normalization columns",
                expected: self.min.len(),
                found: raw.cols(),
            });
        }
        let mut out = Matrix::zeros(raw.rows(), raw.cols());
        for r in 0..raw.rows() {
            for c in 0..raw.cols() {
                let x = raw.get(r, c);
                if !x.is_finite() {
                    return Err(Error::NonFiniteInput { row: r, col: c });
                }
                let span = self.max[c] - self.min[c];
                let v = if span > 0.0 {
                    ((log1p_signed(x) - self.min[c]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                out.set(r, c, v);
            }
        }
        Ok(out)
    }
}

pub fn normalize_features(raw: &Matrix) -> Result<(Matrix, NormalizationParams)> {
    let cols = raw.cols();
    let mut params = NormalizationParams {
        min: vec![f64::INFINITY; cols],
        max: vec![f64::NEG_INFINITY; cols],
    };
    for r in 0..raw.rows() {
        for c in 0..cols {
            let x = raw.get(r, c);
            if !x.is_finite() {
                return Err(Error::NonFiniteInput { row: r, col: c });
            }
            let l = log1p_signed(x);
            params.min[c] = params.min[c].min(l);
            params.max[c] = params.max[c].max(l);
        }
    }
    if raw.rows() == 0 {
        params.min.iter_mut().for_each(|v| *v = 0.0);
        params.max.iter_mut().for_each(|v| *v = 0.0);
    }
    let normalized = params.apply(raw)?;
    Ok((normalized, params))
}

/// Which feature blocks are kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureMask {
    #[default]
    All,
    /// Call block only; trans block zeroed.
    CallOnly,
    /// Trans block only; call block zeroed.
    TransOnly,
}

impl FeatureMask {
    pub fn apply(self, features: &mut Matrix) {
        let zeroed = match self {
            FeatureMask::All => return,
            FeatureMask::CallOnly => 7..14,
            FeatureMask::TransOnly => 0..7,
        };
        for r in 0..features.rows() {
            features.row_mut(r)[zeroed.clone()].fill(0.0);
        }
    }
}

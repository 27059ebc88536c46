//! Coarse-grained interaction feature contrast.
//!
//! For every account and view the `r²` encoding is the anchor, `r³` (the
//! other transfer) the positive and `r¹` (the call) the negative:
//! `max{0, ‖a − p‖² − ‖a − n‖² + α}`. Terms are averaged over views, then
//! over the accounts of each type.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::icvae::SLOTS;
use crate::linalg::{squared_distance, Matrix};
use crate::record::AccountType;
use crate::tape::{Tape, Var};

pub const DEFAULT_MARGIN: f64 = 0.3;

pub const NEGATIVE_SLOT: usize = 1;
pub const ANCHOR_SLOT: usize = 2;
pub const POSITIVE_SLOT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContrastConfig {
    pub alpha: f64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_MARGIN,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("contrast margin must be finite and non-negative".into()));
        }
        Ok(())
    }
}

pub fn triplet_term(anchor: &[f64], positive: &[f64], negative: &[f64], alpha: f64) -> f64 {
    (squared_distance(anchor, positive) - squared_distance(anchor, negative) + alpha).max(0.0)
}

/// `‖a − n‖² − ‖a − p‖²`; the loss is zero once this reaches `α`.
pub fn margin(anchor: &[f64], positive: &[f64], negative: &[f64]) -> f64 {
    squared_distance(anchor, negative) - squared_distance(anchor, positive)
}

/// Loss of one account: `h_hat` is its `(views · 4) × d′` encoding.
pub fn account_loss(h_hat: &Matrix, alpha: f64) -> f64 {
    let views = h_hat.rows() / SLOTS;
    let total: f64 = (0..views)
        .map(|m| {
            let row = |s| h_hat.row(m * SLOTS + s);
            triplet_term(row(ANCHOR_SLOT), row(POSITIVE_SLOT), row(NEGATIVE_SLOT), alpha)
        })
        .sum();
    total / views.max(1) as f64
}

/// Per-view margins of one account's encoding.
pub fn account_margins(h_hat: &Matrix) -> Vec<f64> {
    (0..h_hat.rows() / SLOTS)
        .map(|m| {
            let row = |s| h_hat.row(m * SLOTS + s);
            margin(row(ANCHOR_SLOT), row(POSITIVE_SLOT), row(NEGATIVE_SLOT))
        })
        .collect()
}

/// Contrast loss split by type. A type with no accounts contributes 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContrastLoss {
    pub eoa: f64,
    pub ca: f64,
}

impl ContrastLoss {
    pub fn get(&self, ty: AccountType) -> f64 {
        match ty {
            AccountType::Eoa => self.eoa,
            AccountType::Ca => self.ca,
        }
    }

    pub fn total(&self) -> f64 {
        self.eoa + self.ca
    }
}

pub fn contrast_loss(h_hat: &[Matrix], types: &[AccountType], alpha: f64) -> ContrastLoss {
    assert_eq!(h_hat.len(), types.len());
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (h, ty) in h_hat.iter().zip(types) {
        sums[ty.index()] += account_loss(h, alpha);
        counts[ty.index()] += 1;
    }
    let mean = |i: usize| {
        if counts[i] == 0 {
            0.0
        } else {
            sums[i] / counts[i] as f64
        }
    };
    ContrastLoss {
        eoa: mean(AccountType::Eoa.index()),
        ca: mean(AccountType::Ca.index()),
    }
}

/// Scalar node for one type group. `h_hat` holds `(n · views · 4)` rows in
/// account, view, slot order.
pub fn contrast_on_tape(tape: &mut Tape, h_hat: Var, views: usize, alpha: f64) -> Var {
    let rows = tape.value(h_hat).rows();
    let pairs = rows / SLOTS;
    let pick = |slot: usize| -> Vec<usize> { (0..pairs).map(|i| i * SLOTS + slot).collect() };
    let anchor = tape.select_rows(h_hat, &pick(ANCHOR_SLOT));
    let positive = tape.select_rows(h_hat, &pick(POSITIVE_SLOT));
    let negative = tape.select_rows(h_hat, &pick(NEGATIVE_SLOT));
    let dp = tape.sub(anchor, positive);
    let dp = tape.square(dp);
    let dp = tape.row_sum(dp);
    let dn = tape.sub(anchor, negative);
    let dn = tape.square(dn);
    let dn = tape.row_sum(dn);
    let diff = tape.sub(dp, dn);
    let shifted = tape.add_scalar(diff, alpha);
    let term = tape.relu(shifted);
    let per_account = tape.group_mean(term, views);
    tape.mean(per_account)
}

//! Stratified train/validation/test splits.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::record::Label;
use crate::rng::{rng_for, stream};

pub const MIN_PER_CLASS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || libm::fabs(fractions.iter().sum::<f64>() - 1.0) > 1e-9
    {
        return Err(Error::Config(alloc::format!(
            "split fractions must be in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    Ok(())
}

/// Shuffles each class separately, then cuts it at the rounded fractions.
/// Every returned list is sorted.
pub fn split_dataset(labeled: &BTreeMap<usize, Label>, fractions: [f64; 3], seed: u64) -> Result<Split> {
    validate_fractions(fractions)?;
    let mut split = Split::default();
    for label in [Label::Normal, Label::Fraud] {
        let mut ids: Vec<usize> = labeled
            .iter()
            .filter(|(_, &l)| l == label)
            .map(|(&i, _)| i)
            .collect();
        if ids.len() < MIN_PER_CLASS {
            return Err(Error::InsufficientLabels {
                class: label.class() as u8,
                found: ids.len(),
                required: MIN_PER_CLASS,
            });
        }
        ids.shuffle(&mut rng_for(seed, &[stream::SPLIT, label.class() as u64]));
        let n = ids.len();
        let n_train = libm::round(fractions[0] * n as f64) as usize;
        let n_val = (libm::round(fractions[1] * n as f64) as usize).min(n - n_train);
        split.train.extend_from_slice(&ids[..n_train]);
        split.val.extend_from_slice(&ids[n_train..n_train + n_val]);
        split.test.extend_from_slice(&ids[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(n: usize, fraud: usize) -> BTreeMap<usize, Label> {
        (0..n)
            .map(|i| (i, if i < fraud { Label::Fraud } else { Label::Normal }))
            .collect()
    }

    #[test]
    fn stratified_counts() {
        let l = labeled(100, 20);
        let s = split_dataset(&l, [0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        let fraud = |v: &[usize]| v.iter().filter(|&&i| i < 20).count();
        assert_eq!((fraud(&s.train), fraud(&s.val), fraud(&s.test)), (12, 4, 4));
        assert_eq!(s, split_dataset(&l, [0.6, 0.2, 0.2], 1).unwrap());
    }

    #[test]
    fn bad_fractions() {
        assert!(matches!(
            split_dataset(&labeled(100, 20), [0.5, 0.2, 0.2], 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn too_few_labels() {
        assert_eq!(
            split_dataset(&labeled(100, 4), [0.6, 0.2, 0.2], 1),
            Err(Error::InsufficientLabels {
                class: 1,
                found: 4,
                required: 5
            })
        );
    }
}

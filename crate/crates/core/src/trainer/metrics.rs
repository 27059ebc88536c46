//! Binary classification metrics with fraud as the positive class.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_predictions(predictions: &[usize], labels: &[usize]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "predictions and labels",
                expected: labels.len(),
                found: predictions.len(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same matrix with the roles of the two classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 of one class given its true positives, false positives and false negatives.
fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub binary_f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

pub const METRIC_NAMES: [&str; 5] = ["precision", "recall", "binary_f1", "micro_f1", "macro_f1"];

impl Metrics {
    pub fn from_confusion(c: &Confusion) -> Self {
        let binary_f1 = f1(c.tp, c.fp, c.fn_);
        let normal_f1 = f1(c.tn, c.fn_, c.fp);
        Self {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            binary_f1,
            micro_f1: ratio(c.tp + c.tn, c.total()),
            macro_f1: (binary_f1 + normal_f1) / 2.0,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.precision,
            self.recall,
            self.binary_f1,
            self.micro_f1,
            self.macro_f1,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            precision: v[0],
            recall: v[1],
            binary_f1: v[2],
            micro_f1: v[3],
            macro_f1: v[4],
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn evaluate(predictions: &[usize], labels: &[usize]) -> Result<Metrics> {
    Ok(Metrics::from_confusion(&Confusion::from_predictions(
        predictions,
        labels,
    )?))
}

/// Mean and sample standard deviation of each metric across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSummary {
    pub mean: Metrics,
    pub std: Metrics,
    pub runs: usize,
}

pub fn summarize(runs: &[Metrics]) -> MetricSummary {
    let n = runs.len();
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    if n > 0 {
        let arrays: Vec<[f64; 5]> = runs.iter().map(Metrics::as_array).collect();
        for k in 0..5 {
            mean[k] = arrays.iter().map(|a| a[k]).sum::<f64>() / n as f64;
            if n > 1 {
                let ss: f64 = arrays.iter().map(|a| (a[k] - mean[k]) * (a[k] - mean[k])).sum();
                std[k] = libm::sqrt(ss / (n - 1) as f64);
            }
        }
    }
    MetricSummary {
        mean: Metrics::from_array(mean),
        std: Metrics::from_array(std),
        runs: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_confusion() {
        let c = Confusion {
            tp: 3,
            fp: 1,
            fn_: 1,
            tn: 5,
        };
        let m = Metrics::from_confusion(&c);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.75);
        assert_eq!(m.binary_f1, 0.75);
        assert_eq!(m.micro_f1, 0.8);
        assert!((m.macro_f1 - (0.75 + 10.0 / 12.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn all_correct() {
        let m = evaluate(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap();
        assert_eq!(m.as_array(), [1.0; 5]);
    }

    #[test]
    fn no_positive_predictions_gives_zero_precision() {
        let m = evaluate(&[0, 0], &[1, 0]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.binary_f1, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(evaluate(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn summary_statistics() {
        let a = Metrics::from_array([0.5; 5]);
        let b = Metrics::from_array([1.0; 5]);
        let s = summarize(&[a, b]);
        assert_eq!(s.mean.macro_f1, 0.75);
        assert!((s.std.macro_f1 - libm::sqrt(0.125)).abs() < 1e-15);
    }
}

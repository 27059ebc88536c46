//! Tables behind the degree-distribution, degree-statistics and margin plots.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::heig::{Heig, MetaInteraction};
use crate::record::{AccountType, Label};

/// Which accounts a row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Group {
    Fraud,
    Normal,
    Unlabeled,
}

impl Group {
    pub fn of(label: Option<Label>) -> Self {
        match label {
            Some(Label::Fraud) => Group::Fraud,
            Some(Label::Normal) => Group::Normal,
            None => Group::Unlabeled,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Fraud => "fraud",
            Group::Normal => "normal",
            Group::Unlabeled => "unlabeled",
        }
    }
}

/// Number of accounts of a group and type with a given total degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeBin {
    pub group: Group,
    pub account_type: AccountType,
    pub degree: usize,
    pub count: usize,
}

/// Five-number summary of per-account degree restricted to one
/// meta-interaction, for labeled accounts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeQuartiles {
    pub group: Group,
    pub meta: MetaInteraction,
    pub accounts: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaCount {
    pub meta: MetaInteraction,
    pub edges: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistributionReport {
    pub degree_histogram: Vec<DegreeBin>,
    pub meta_quartiles: Vec<DegreeQuartiles>,
    pub meta_counts: Vec<MetaCount>,
}

/// Linear-interpolation quantile of sorted data (position `p · (n − 1)`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `[min, q1, median, q3, max]`.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some([0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile(&v, p)))
}

pub fn distribution_report(heig: &Heig) -> DistributionReport {
    let degrees = heig.degrees();
    let mut hist: BTreeMap<(Group, usize, usize), usize> = BTreeMap::new();
    for (i, &d) in degrees.iter().enumerate() {
        let key = (Group::of(heig.label(i)), heig.account_type(i).index(), d);
        *hist.entry(key).or_default() += 1;
    }
    let degree_histogram = hist
        .into_iter()
        .map(|((group, ty, degree), count)| DegreeBin {
            group,
            account_type: AccountType::ALL[ty],
            degree,
            count,
        })
        .collect();

    let mut per_meta = [0usize; 6];
    for e in heig.edges() {
        per_meta[e.meta.index()] += 1;
    }
    let meta_counts = MetaInteraction::ALL
        .iter()
        .map(|&meta| MetaCount {
            meta,
            edges: per_meta[meta.index()],
        })
        .collect();

    let mut meta_quartiles = Vec::new();
    for group in [Group::Fraud, Group::Normal] {
        let accounts: Vec<usize> = heig
            .labels()
            .iter()
            .filter(|(_, &l)| Group::of(Some(l)) == group)
            .map(|(&i, _)| i)
            .collect();
        for meta in MetaInteraction::ALL {
            let values: Vec<f64> = accounts
                .iter()
                .map(|&i| {
                    let count = |ids: &[usize]| ids.iter().filter(|&&e| heig.edge(e).meta == meta).count();
                    (count(heig.out_edges(i)) + count(heig.in_edges(i))) as f64
                })
                .collect();
            if let Some([min, q1, median, q3, max]) = five_numbers(&values) {
                meta_quartiles.push(DegreeQuartiles {
                    group,
                    meta,
                    accounts: values.len(),
                    min,
                    q1,
                    median,
                    q3,
                    max,
                });
            }
        }
    }

    DistributionReport {
        degree_histogram,
        meta_quartiles,
        meta_counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[lo, hi]`; values outside are clamped into the
/// edge bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = alloc::vec![0usize; bins];
    for &v in values {
        let k = libm::floor((v - lo) / width);
        let k = if k.is_nan() { 0 } else { (k.max(0.0) as usize).min(bins - 1) };
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Address, InteractionKind, InteractionRecord};

    #[test]
    fn quartiles_of_one_to_five() {
        let q = five_numbers(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(q, [1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn empty_graph_gives_empty_tables() {
        let g = Heig::build(&[], None, None).unwrap();
        let r = distribution_report(&g);
        assert!(r.degree_histogram.is_empty());
        assert!(r.meta_quartiles.is_empty());
        assert!(r.meta_counts.iter().all(|c| c.edges == 0));
    }

    #[test]
    fn star_degrees() {
        let recs: Vec<_> = (1..=5)
            .map(|i| InteractionRecord {
                initiator: Address::synthetic(0),
                recipient: Address::synthetic(i),
                value: 1,
                kind: InteractionKind::Trans,
                timestamp: 0,
            })
            .collect();
        let g = Heig::build(&recs, None, None).unwrap();
        let r = distribution_report(&g);
        let find = |d| r.degree_histogram.iter().find(|b| b.degree == d).map(|b| b.count);
        assert_eq!(find(5), Some(1));
        assert_eq!(find(1), Some(5));
    }

    #[test]
    fn histogram_clamps() {
        let h = histogram(&[-1.0, 0.1, 0.6, 2.0], 2, 0.0, 1.0);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), [2, 2]);
    }
}

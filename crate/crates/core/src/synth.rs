//! Seeded synthetic interaction graphs with planted fraud motifs.
//!
//! Background out-degrees follow a discretized Pareto law whose
//! complementary CDF decays as `k^-γ`, with `γ = powerlaw_exponent`.
//! Recipients are drawn with heavy-tailed popularity weights, so in-degrees
//! are long-tailed as well.
//!
//! Ponzi motif: one CA collects transfers and calls from many EOAs, then
//! pays some of the earliest investors back. Phishing motif: one EOA
//! receives one-shot transfers from many distinct EOAs and later forwards
//! the proceeds in a few bulk transfers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{LogNormal, Pareto, StandardNormal};

use crate::error::{Error, Result};
use crate::heig::MetaInteraction;
use crate::icvae::TrainingTriple;
use crate::FEATURE_DIM;
use crate::record::{
    AccountType, AccountTypeTable, Address, FraudKind, InteractionKind, InteractionRecord, Label,
    LabelTable,
};
use crate::rng::{rng_for, stream, Rng};

pub const BASE_TIMESTAMP: u64 = 1_600_000_000;
pub const TIME_SPAN: u64 = 30 * 24 * 3600;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub n_accounts: usize,
    pub ca_fraction: f64,
    /// Tail index of the out-degree distribution.
    pub powerlaw_exponent: f64,
    /// Mean background out-degree.
    pub edges_per_account: f64,
    pub fraud_count: usize,
    pub fraud_kind: FraudKind,
    pub seed: u64,
    /// Fraction of labels flipped after planting.
    pub label_noise: f64,
    /// Background accounts labeled normal, drawn first from the fraud type.
    pub labeled_normals: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_accounts: 1000,
            ca_fraction: 0.2,
            powerlaw_exponent: 2.5,
            edges_per_account: 4.0,
            fraud_count: 50,
            fraud_kind: FraudKind::Ponzi,
            seed: 0,
            label_noise: 0.0,
            labeled_normals: 250,
        }
    }
}

impl SynthConfig {
    fn n_ca(&self) -> usize {
        libm::round(self.ca_fraction * self.n_accounts as f64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("synth: {msg}")));
        if self.n_accounts < 2 {
            return bad("n_accounts must be at least 2");
        }
        if !(self.ca_fraction > 0.0 && self.ca_fraction < 1.0) {
            return bad("ca_fraction must lie in (0, 1)");
        }
        if !(self.powerlaw_exponent > 1.0 && self.powerlaw_exponent.is_finite()) {
            return bad("powerlaw_exponent must exceed 1");
        }
        if !(self.edges_per_account > 0.0 && self.edges_per_account.is_finite()) {
            return bad("edges_per_account must be positive");
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1]");
        }
        if self.fraud_count == 0 || self.fraud_count >= self.n_accounts {
            return bad("fraud_count must be positive and below n_accounts");
        }
        let n_ca = self.n_ca();
        let n_eoa = self.n_accounts - n_ca;
        if n_ca == 0 || n_eoa < 2 {
            return bad("need at least one CA and two EOAs");
        }
        let pool = match self.fraud_kind {
            FraudKind::Ponzi => n_ca,
            FraudKind::Phish => n_eoa,
        };
        if self.fraud_count >= pool {
            return bad("fraud_count must be below the number of accounts of the fraud type");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Records in timestamp order.
    pub records: Vec<InteractionRecord>,
    pub account_types: AccountTypeTable,
    pub labels: LabelTable,
    /// Planted fraud accounts (before label noise).
    pub fraud: Vec<Address>,
    /// Background out-degree drawn for every account, by synthetic index.
    pub background_out_degrees: Vec<usize>,
}

struct Builder {
    rng: Rng,
    records: Vec<(u64, InteractionRecord)>,
    trans_value: LogNormal<f64>,
    call_value: LogNormal<f64>,
}

impl Builder {
    fn push(&mut self, src: usize, dst: usize, kind: InteractionKind, value: u128, ts: u64) {
        self.records.push((
            ts,
            InteractionRecord {
                initiator: Address::synthetic(src as u64),
                recipient: Address::synthetic(dst as u64),
                value,
                kind,
                timestamp: ts,
            },
        ));
    }

    fn value(&mut self, kind: InteractionKind) -> u128 {
        match kind {
            InteractionKind::Trans => self.trans_value.sample(&mut self.rng).max(1.0) as u128,
            InteractionKind::Call => {
                if self.rng.random_bool(0.6) {
                    0
                } else {
                    self.call_value.sample(&mut self.rng) as u128
                }
            }
        }
    }

    fn timestamp(&mut self, lo: u64, hi: u64) -> u64 {
        self.rng.random_range(lo..hi.max(lo + 1))
    }
}

/// 95th percentile (nearest rank) of `values`; 0 for an empty slice.
fn p95(values: &mut [usize]) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let rank = libm::ceil(0.95 * values.len() as f64) as usize;
    values[rank.clamp(1, values.len()) - 1]
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let n = config.n_accounts;
    let gamma = config.powerlaw_exponent;
    let mut b = Builder {
        rng: rng_for(config.seed, &[stream::SYNTH]),
        records: Vec::new(),
        trans_value: LogNormal::new(libm::log(1e17), 1.5).expect("valid lognormal"),
        call_value: LogNormal::new(libm::log(1e16), 1.0).expect("valid lognormal"),
    };

    // account types
    let n_ca = config.n_ca();
    let ca_idx = index::sample(&mut b.rng, n, n_ca).into_vec();
    let mut types = alloc::vec![AccountType::Eoa; n];
    for &i in &ca_idx {
        types[i] = AccountType::Ca;
    }
    let eoas: Vec<usize> = (0..n).filter(|&i| types[i] == AccountType::Eoa).collect();
    let cas: Vec<usize> = (0..n).filter(|&i| types[i] == AccountType::Ca).collect();

    // recipient popularity
    let popularity = Pareto::new(1.0, 1.5).expect("valid pareto");
    let weights: Vec<f64> = (0..n).map(|_| popularity.sample(&mut b.rng)).collect();
    let pick_eoa = WeightedIndex::new(eoas.iter().map(|&i| weights[i])).expect("positive weights");
    let pick_ca = WeightedIndex::new(cas.iter().map(|&i| weights[i])).expect("positive weights");

    // background out-degrees: floor of a Pareto draw, so P(K ≥ k) = (k/x_min)^-γ
    let x_min = ((config.edges_per_account + 0.5) * (gamma - 1.0) / gamma).max(1.0);
    let degree = Pareto::new(x_min, gamma).expect("valid pareto");
    let out_degrees: Vec<usize> = (0..n)
        .map(|_| (libm::floor(degree.sample(&mut b.rng)) as usize).clamp(1, n - 1))
        .collect();

    for src in 0..n {
        for _ in 0..out_degrees[src] {
            let to_ca = match types[src] {
                AccountType::Eoa => b.rng.random_bool(0.5),
                AccountType::Ca => b.rng.random_bool(0.6),
            };
            let mut dst = src;
            while dst == src {
                dst = if to_ca {
                    cas[pick_ca.sample(&mut b.rng)]
                } else {
                    eoas[pick_eoa.sample(&mut b.rng)]
                };
                if (to_ca && cas.len() == 1) || (!to_ca && eoas.len() == 1) {
                    break;
                }
            }
            if dst == src {
                continue;
            }
            let kind = if to_ca && b.rng.random_bool(0.7) {
                InteractionKind::Call
            } else {
                InteractionKind::Trans
            };
            let value = b.value(kind);
            let ts = b.timestamp(BASE_TIMESTAMP, BASE_TIMESTAMP + TIME_SPAN);
            b.push(src, dst, kind, value, ts);
        }
    }

    // the motif size must clear the 95th percentile of background in-degree
    let mut in_deg = alloc::vec![0usize; n];
    for (_, r) in &b.records {
        in_deg[r.recipient.synthetic_index().expect("synthetic address") as usize] += 1;
    }
    let (pool, same_type) = match config.fraud_kind {
        FraudKind::Ponzi => (&cas, AccountType::Ca),
        FraudKind::Phish => (&eoas, AccountType::Eoa),
    };
    let mut pool_in: Vec<usize> = pool.iter().map(|&i| in_deg[i]).collect();
    let threshold = p95(&mut pool_in);
    let fraud: Vec<usize> = {
        let mut f: Vec<usize> = index::sample(&mut b.rng, pool.len(), config.fraud_count)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        f.sort_unstable();
        f
    };

    for &f in &fraud {
        let extra = b.rng.random_range(10..=30);
        let victims_n = (threshold + extra).min(eoas.len() - 1);
        let victims: Vec<usize> = index::sample(&mut b.rng, eoas.len(), victims_n + 1)
            .into_iter()
            .map(|k| eoas[k])
            .filter(|&v| v != f)
            .take(victims_n)
            .collect();
        let start = b.timestamp(BASE_TIMESTAMP, BASE_TIMESTAMP + TIME_SPAN / 2);
        let inflow_end = start + TIME_SPAN / 4;
        let mut inflows: Vec<(u64, usize)> = victims
            .iter()
            .map(|&v| (b.timestamp(start, inflow_end), v))
            .collect();
        inflows.sort_unstable();
        match config.fraud_kind {
            FraudKind::Ponzi => {
                let mut paid = Vec::new();
                for &(ts, v) in &inflows {
                    let kind = if b.rng.random_bool(0.5) {
                        InteractionKind::Trans
                    } else {
                        InteractionKind::Call
                    };
                    let value = b.trans_value.sample(&mut b.rng).max(1.0) as u128 * 5;
                    b.push(v, f, kind, value, ts);
                    paid.push(value);
                }
                let last = inflows.last().map_or(start, |x| x.0);
                for (k, &(_, v)) in inflows.iter().take(inflows.len() / 2).enumerate() {
                    let ts = b.timestamp(last + 1, last + TIME_SPAN / 4);
                    b.push(f, v, InteractionKind::Trans, paid[k] + paid[k] / 2, ts);
                }
            }
            FraudKind::Phish => {
                let mut total: u128 = 0;
                for &(ts, v) in &inflows {
                    let value = b.trans_value.sample(&mut b.rng).max(1.0) as u128;
                    total = total.saturating_add(value);
                    b.push(v, f, InteractionKind::Trans, value, ts);
                }
                let last = inflows.last().map_or(start, |x| x.0);
                let bulk = b.rng.random_range(1..=3usize);
                for _ in 0..bulk {
                    let mut dst = f;
                    while dst == f {
                        dst = eoas[b.rng.random_range(0..eoas.len())];
                    }
                    let ts = b.timestamp(last + 1, last + TIME_SPAN / 8);
                    b.push(f, dst, InteractionKind::Trans, total / bulk as u128, ts);
                }
            }
        }
    }

    // labels: planted fraud plus background normals, fraud-type accounts first
    let fraud_set: alloc::collections::BTreeSet<usize> = fraud.iter().copied().collect();
    let mut first: Vec<usize> = (0..n)
        .filter(|&i| types[i] == same_type && !fraud_set.contains(&i))
        .collect();
    let mut rest: Vec<usize> = (0..n)
        .filter(|&i| types[i] != same_type && !fraud_set.contains(&i))
        .collect();
    first.shuffle(&mut b.rng);
    rest.shuffle(&mut b.rng);
    let normals: Vec<usize> = first
        .into_iter()
        .chain(rest)
        .take(config.labeled_normals)
        .collect();
    let mut labels: BTreeMap<usize, Label> = fraud.iter().map(|&i| (i, Label::Fraud)).collect();
    labels.extend(normals.iter().map(|&i| (i, Label::Normal)));
    let flips = libm::round(config.label_noise * labels.len() as f64) as usize;
    if flips > 0 {
        let keys: Vec<usize> = labels.keys().copied().collect();
        for k in index::sample(&mut b.rng, keys.len(), flips) {
            let l = labels.get_mut(&keys[k]).expect("labeled key");
            *l = Label::from_class(1 - l.class());
        }
    }

    let mut records = b.records;
    records.sort_by_key(|(ts, _)| *ts);
    Ok(SynthOutput {
        records: records.into_iter().map(|(_, r)| r).collect(),
        account_types: (0..n)
            .map(|i| (Address::synthetic(i as u64), types[i]))
            .collect(),
        labels: LabelTable {
            fraud_kind: config.fraud_kind,
            labels: labels
                .into_iter()
                .map(|(i, l)| (Address::synthetic(i as u64), l))
                .collect(),
        },
        fraud: fraud.iter().map(|&i| Address::synthetic(i as u64)).collect(),
        background_out_degrees: out_degrees,
    })
}

/// Triples from a known conditional process: `x_i` uniform on the unit cube,
/// a uniform meta-interaction `r`, and
/// `x_j = 0.5 + 0.2·tanh(W_r x_i) + 0.15·u·v_r` with scalar `u ~ N(0, 1)`.
/// `W_r` and `v_r` are fixed by `seed`.
pub fn conditional_triples(count: usize, seed: u64) -> Vec<TrainingTriple> {
    const D: usize = FEATURE_DIM;
    let mut rng = rng_for(seed, &[stream::SYNTH, 1]);
    let weights: Vec<f64> = (0..6 * D * D).map(|_| rng.random_range(-0.5..0.5)).collect();
    let offsets: Vec<f64> = (0..6 * D).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..count)
        .map(|_| {
            let r = rng.random_range(0..6usize);
            let target: Vec<f64> = (0..D).map(|_| rng.random::<f64>()).collect();
            let u: f64 = StandardNormal.sample(&mut rng);
            let neighbor = (0..D)
                .map(|a| {
                    let row = &weights[(r * D + a) * D..(r * D + a + 1) * D];
                    let s: f64 = row.iter().zip(&target).map(|(w, x)| w * x).sum();
                    0.5 + 0.2 * libm::tanh(s) + 0.15 * u * offsets[r * D + a]
                })
                .collect();
            TrainingTriple {
                target,
                neighbor,
                relation: MetaInteraction::ALL[r],
            }
        })
        .collect()
}

/// Least-squares slope of `ln P(K ≥ k)` against `ln k`, over the distinct
/// values `k ≥ k_min` whose tail still holds at least `min_tail` samples.
pub fn ccdf_slope(degrees: &[usize], k_min: usize, min_tail: usize) -> Option<f64> {
    let mut sorted: Vec<usize> = degrees.iter().copied().filter(|&d| d > 0).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let k = sorted[i];
        let tail = n - i;
        if k >= k_min && tail >= min_tail {
            points.push((libm::log(k as f64), libm::log(tail as f64 / n as f64)));
        }
        while i < n && sorted[i] == k {
            i += 1;
        }
    }
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_accounts: 200,
            fraud_count: 5,
            labeled_normals: 40,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn conditional_triples_are_seeded() {
        let a = conditional_triples(50, 3);
        assert_eq!(a, conditional_triples(50, 3));
        assert_ne!(a, conditional_triples(50, 4));
        assert!(a.iter().all(|t| t.target.len() == FEATURE_DIM && t.neighbor.len() == FEATURE_DIM));
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SynthConfig { seed: 1, ..small() };
        assert_ne!(generate(&small()).unwrap().records, generate(&other).unwrap().records);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig { fraud_count: 0, ..small() },
            SynthConfig { fraud_count: 200, ..small() },
            SynthConfig { ca_fraction: 1.0, ..small() },
            SynthConfig { powerlaw_exponent: 1.0, ..small() },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn calls_only_reach_contracts() {
        let out = generate(&small()).unwrap();
        for r in &out.records {
            if r.kind == InteractionKind::Call {
                assert_eq!(out.account_types[&r.recipient], AccountType::Ca);
            }
            assert_ne!(r.initiator, r.recipient);
        }
    }

    #[test]
    fn phish_fraud_are_eoas() {
        let cfg = SynthConfig {
            fraud_kind: FraudKind::Phish,
            ..small()
        };
        let out = generate(&cfg).unwrap();
        for f in &out.fraud {
            assert_eq!(out.account_types[f], AccountType::Eoa);
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        // P(K ≥ k) = 1/k² over k = 1..=10: 100 draws with that tail
        let mut d = Vec::new();
        for k in 1..=10usize {
            let here = 100 / (k * k) - 100 / ((k + 1) * (k + 1));
            d.extend(core::iter::repeat(k).take(here));
        }
        let s = ccdf_slope(&d, 1, 1).unwrap();
        assert!(s < -1.5 && s > -2.5, "{s}");
    }
}

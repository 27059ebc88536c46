//! The heterogeneous Ethereum interaction graph (HEIG).
//!
//! Accounts are indexed in sorted address order. Every record becomes one
//! directed, typed edge; duplicates are kept as parallel edges and
//! self-interactions as loops.

mod features;
mod meta;
mod sampling;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

pub use features::{
    extract_features, log1p_signed, normalize_features, AccountStats, Average, FeatureMask,
    KindStats, NormalizationParams, RawFeatures, FEATURE_NAMES,
};
pub use meta::{MetaInteraction, META_DIM};
pub use sampling::{sample_subgraph, Subgraph, DEFAULT_FANOUT, DEFAULT_LAYERS};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::record::{
    resolve_types, AccountType, AccountTypeTable, Address, FraudKind, InteractionKind,
    InteractionRecord, Label, LabelTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: InteractionKind,
    pub meta: MetaInteraction,
    pub value: u128,
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct Heig {
    addresses: Vec<Address>,
    types: Vec<AccountType>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    raw: RawFeatures,
    features: Matrix,
    normalization: NormalizationParams,
    labels: BTreeMap<usize, Label>,
    fraud_kind: Option<FraudKind>,
}

impl Heig {
    /// Builds the graph, resolving account types and computing normalized
    /// features.
    pub fn build(
        records: &[InteractionRecord],
        declared: Option<&AccountTypeTable>,
        labels: Option<&LabelTable>,
    ) -> Result<Self> {
        let table = resolve_types(records, declared)?;
        if let Some(labels) = labels {
            // labels must refer to known accounts; declared types may add isolated ones
            for addr in labels.labels.keys() {
                if !table.contains_key(addr) {
                    return Err(Error::UnknownAccount(*addr));
                }
            }
        }
        let addresses: Vec<Address> = table.keys().copied().collect();
        let types: Vec<AccountType> = table.values().copied().collect();
        let index = |a: &Address| addresses.binary_search(a).expect("resolved address");

        let mut edges = Vec::with_capacity(records.len());
        let mut out_edges = vec![Vec::new(); addresses.len()];
        let mut in_edges = vec![Vec::new(); addresses.len()];
        for r in records {
            let (src, dst) = (index(&r.initiator), index(&r.recipient));
            let meta = MetaInteraction::of(types[src], r.kind, types[dst]).map_err(|_| {
                Error::TypeConflict(r.recipient)
            })?;
            out_edges[src].push(edges.len());
            in_edges[dst].push(edges.len());
            edges.push(Edge {
                src,
                dst,
                kind: r.kind,
                meta,
                value: r.value,
                timestamp: r.timestamp,
            });
        }

        let label_map = labels
            .map(|l| {
                l.labels
                    .iter()
                    .map(|(a, lab)| (index(a), *lab))
                    .collect::<BTreeMap<_, _>>()
            })
            .unwrap_or_default();

        let mut heig = Self {
            addresses,
            types,
            edges,
            out_edges,
            in_edges,
            raw: RawFeatures::default(),
            features: Matrix::zeros(0, crate::FEATURE_DIM),
            normalization: NormalizationParams::default(),
            labels: label_map,
            fraud_kind: labels.map(|l| l.fraud_kind),
        };
        heig.raw = extract_features(&heig);
        let (features, normalization) = normalize_features(&heig.raw.to_matrix())?;
        heig.features = features;
        heig.normalization = normalization;
        Ok(heig)
    }

    pub fn num_accounts(&self) -> usize {
        self.addresses.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn addresses(&self) -> &[Address] {
        &self.addresses
    }

    pub fn address(&self, idx: usize) -> Address {
        self.addresses[idx]
    }

    pub fn index_of(&self, addr: &Address) -> Option<usize> {
        self.addresses.binary_search(addr).ok()
    }

    pub fn account_type(&self, idx: usize) -> AccountType {
        self.types[idx]
    }

    pub fn types(&self) -> &[AccountType] {
        &self.types
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Edge ids initiated by `idx`, in record order.
    pub fn out_edges(&self, idx: usize) -> &[usize] {
        &self.out_edges[idx]
    }

    /// Edge ids received by `idx`, in record order.
    pub fn in_edges(&self, idx: usize) -> &[usize] {
        &self.in_edges[idx]
    }

    pub fn raw_features(&self) -> &RawFeatures {
        &self.raw
    }

    /// Normalized `|V| × 14` feature matrix.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_row(&self, idx: usize) -> &[f64] {
        self.features.row(idx)
    }

    pub fn normalization(&self) -> &NormalizationParams {
        &self.normalization
    }

    /// Zeroes the masked feature block. Used by the single-kind feature
    /// ablations.
    pub fn apply_feature_mask(&mut self, mask: FeatureMask) {
        mask.apply(&mut self.features);
    }

    pub fn labels(&self) -> &BTreeMap<usize, Label> {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> Option<Label> {
        self.labels.get(&idx).copied()
    }

    pub fn fraud_kind(&self) -> Option<FraudKind> {
        self.fraud_kind
    }

    /// Total (in + out) degree per account, counting multi-edges.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_accounts())
            .map(|i| self.out_edges[i].len() + self.in_edges[i].len())
            .collect()
    }

    /// The records this graph was built from, in edge order.
    pub fn to_records(&self) -> Vec<InteractionRecord> {
        self.edges
            .iter()
            .map(|e| InteractionRecord {
                initiator: self.addresses[e.src],
                recipient: self.addresses[e.dst],
                value: e.value,
                kind: e.kind,
                timestamp: e.timestamp,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Address;

    fn rec(a: u64, b: u64, kind: InteractionKind, value: u128) -> InteractionRecord {
        InteractionRecord {
            initiator: Address::synthetic(a),
            recipient: Address::synthetic(b),
            value,
            kind,
            timestamp: 1_600_000_000,
        }
    }

    #[test]
    fn single_edge_graph() {
        let g = Heig::build(&[rec(1, 2, InteractionKind::Trans, 5)], None, None).unwrap();
        assert_eq!(g.num_accounts(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edge(0).meta, MetaInteraction::R3Eoa);
    }

    #[test]
    fn empty_graph() {
        let g = Heig::build(&[], None, None).unwrap();
        assert_eq!(g.num_accounts(), 0);
        assert_eq!(g.features().shape(), (0, 14));
    }

    #[test]
    fn adjacency_matches_brute_force() {
        // accounts 1..=5; 2 and 4 receive calls
        let records = [
            rec(1, 2, InteractionKind::Call, 0),
            rec(3, 2, InteractionKind::Trans, 7),
            rec(2, 5, InteractionKind::Trans, 3),
            rec(5, 4, InteractionKind::Call, 1),
            rec(1, 2, InteractionKind::Call, 2),
            rec(4, 4, InteractionKind::Trans, 9),
            rec(3, 1, InteractionKind::Trans, 4),
        ];
        let g = Heig::build(&records, None, None).unwrap();
        assert_eq!(g.num_accounts(), 5);
        for v in 0..5 {
            let expected_out: Vec<usize> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| g.index_of(&r.initiator) == Some(v))
                .map(|(i, _)| i)
                .collect();
            let expected_in: Vec<usize> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| g.index_of(&r.recipient) == Some(v))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(g.out_edges(v), expected_out.as_slice());
            assert_eq!(g.in_edges(v), expected_in.as_slice());
        }
        assert_eq!(g.to_records(), records.to_vec());
    }

    #[test]
    fn unknown_labeled_account_is_rejected() {
        let mut labels = LabelTable::new(FraudKind::Ponzi);
        labels.labels.insert(Address::synthetic(9), Label::Fraud);
        let err = Heig::build(&[rec(1, 2, InteractionKind::Trans, 1)], None, Some(&labels));
        assert_eq!(err.unwrap_err(), Error::UnknownAccount(Address::synthetic(9)));
    }
}

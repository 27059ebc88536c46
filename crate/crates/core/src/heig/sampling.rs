//! Seeded two-hop neighbor sampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::index;

use super::Heig;
use crate::rng::{rng_for, stream};
use crate::tape::Csr;

pub const DEFAULT_FANOUT: usize = 100;
pub const DEFAULT_LAYERS: usize = 2;

/// A sampled subgraph. Indices refer to the parent [`Heig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    /// Targets first (deduplicated, in the given order), then accounts in
    /// order of discovery.
    pub nodes: Vec<usize>,
    pub num_targets: usize,
    /// Sampled edge ids, ascending.
    pub edges: Vec<usize>,
}

impl Subgraph {
    /// Every account and every edge.
    pub fn full(heig: &Heig) -> Self {
        Self {
            nodes: (0..heig.num_accounts()).collect(),
            num_targets: heig.num_accounts(),
            edges: (0..heig.num_edges()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn targets(&self) -> &[usize] {
        &self.nodes[..self.num_targets]
    }

    /// Global account index → position in [`Subgraph::nodes`].
    pub fn local_index(&self) -> BTreeMap<usize, usize> {
        self.nodes.iter().enumerate().map(|(i, &g)| (g, i)).collect()
    }

    /// Undirected neighbor-count matrix over local indices. Each sampled
    /// edge adds one to both endpoints' entries; a loop adds one.
    pub fn adjacency(&self, heig: &Heig) -> Csr {
        let local = self.local_index();
        let mut triples = Vec::with_capacity(self.edges.len() * 2);
        for &e in &self.edges {
            let edge = heig.edge(e);
            let (s, d) = (local[&edge.src], local[&edge.dst]);
            triples.push((s, d, 1.0));
            if s != d {
                triples.push((d, s, 1.0));
            }
        }
        triples.sort_by_key(|t| (t.0, t.1));
        Csr::from_triples(self.nodes.len(), self.nodes.len(), &triples)
    }
}

/// Expands `targets` for `layers` hops. Each frontier account's incident
/// edges are grouped by direction and meta-interaction; from every group up
/// to `fanout` edges are drawn uniformly without replacement. The random
/// stream for a group is keyed by `(seed, layer, account, group)`.
pub fn sample_subgraph(
    heig: &Heig,
    targets: &[usize],
    fanout: usize,
    layers: usize,
    seed: u64,
) -> Subgraph {
    let mut nodes = Vec::new();
    let mut seen = BTreeSet::new();
    for &t in targets {
        if seen.insert(t) {
            nodes.push(t);
        }
    }
    let num_targets = nodes.len();
    let mut edges = BTreeSet::new();
    let mut frontier = nodes.clone();
    let mut groups: [Vec<usize>; 12] = Default::default();

    for layer in 0..layers {
        let mut next = Vec::new();
        for &v in &frontier {
            groups.iter_mut().for_each(Vec::clear);
            for &e in heig.out_edges(v) {
                groups[heig.edge(e).meta.index()].push(e);
            }
            for &e in heig.in_edges(v) {
                groups[6 + heig.edge(e).meta.index()].push(e);
            }
            for (gid, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                let mut chosen: Vec<usize> = if group.len() <= fanout {
                    group.clone()
                } else {
                    let mut rng =
                        rng_for(seed, &[stream::SAMPLE, layer as u64, v as u64, gid as u64]);
                    let mut picks = index::sample(&mut rng, group.len(), fanout).into_vec();
                    picks.sort_unstable();
                    picks.into_iter().map(|i| group[i]).collect()
                };
                for e in chosen.drain(..) {
                    edges.insert(e);
                    let edge = heig.edge(e);
                    let other = if edge.src == v { edge.dst } else { edge.src };
                    if seen.insert(other) {
                        nodes.push(other);
                        next.push(other);
                    }
                }
            }
        }
        frontier = next;
    }

    Subgraph {
        nodes,
        num_targets,
        edges: edges.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Address, InteractionKind, InteractionRecord};

    fn trans(a: u64, b: u64) -> InteractionRecord {
        InteractionRecord {
            initiator: Address::synthetic(a),
            recipient: Address::synthetic(b),
            value: 1,
            kind: InteractionKind::Trans,
            timestamp: 0,
        }
    }

    #[test]
    fn star_is_returned_whole() {
        let g = Heig::build(&[trans(0, 1), trans(0, 2), trans(0, 3)], None, None).unwrap();
        let s = sample_subgraph(&g, &[0], 100, 2, 9);
        assert_eq!(s.nodes, [0, 1, 2, 3]);
        assert_eq!(s.edges, [0, 1, 2]);
    }

    #[test]
    fn fanout_caps_each_group() {
        let records: Vec<_> = (1..=150).map(|i| trans(i, 0)).collect();
        let g = Heig::build(&records, None, None).unwrap();
        let s = sample_subgraph(&g, &[0], 100, 1, 3);
        assert_eq!(s.edges.len(), 100);
        assert_eq!(s.nodes.len(), 101);
        assert_eq!(s, sample_subgraph(&g, &[0], 100, 1, 3));
        assert_ne!(s.edges, sample_subgraph(&g, &[0], 100, 1, 4).edges);
    }

    #[test]
    fn adjacency_counts_multi_edges_and_loops() {
        let g = Heig::build(&[trans(0, 1), trans(0, 1), trans(1, 1)], None, None).unwrap();
        let s = Subgraph::full(&g);
        let a = s.adjacency(&g);
        let dense = a.mul_dense(&crate::Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(dense.row(0), &[0.0, 2.0]);
        assert_eq!(dense.row(1), &[2.0, 1.0]);
    }
}

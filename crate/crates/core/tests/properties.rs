use std::collections::BTreeMap;

use metaifd_core::contrast::{account_loss, contrast_loss, DEFAULT_MARGIN};
use metaifd_core::heig::{sample_subgraph, FeatureMask};
use metaifd_core::icvae::{kl_divergence, AugmentedFeatureSet, SLOTS};
use metaifd_core::multiview::{MultiViewConfig, MultiViewEncoder, ViewAggregation};
use metaifd_core::propagation::{Propagation, PropagationConfig};
use metaifd_core::record::Label;
use metaifd_core::tape::Csr;
use metaifd_core::trainer::{evaluate, joint_loss, split_dataset, Confusion, Metrics};
use metaifd_core::{AccountType, Address, Heig, InteractionKind, InteractionRecord, Matrix};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d))
}

fn encoder(views: usize, seed: u64) -> MultiViewEncoder {
    MultiViewEncoder::new(
        MultiViewConfig {
            feature_dim: 5,
            hidden: 8,
            heads: 4,
            views,
            aggregation: ViewAggregation::SelfAttention,
            share_weights: false,
        },
        seed,
    )
    .unwrap()
}

fn records(edges: &[(u64, u64, bool, u32)]) -> Vec<InteractionRecord> {
    edges
        .iter()
        .enumerate()
        .map(|(t, &(s, d, call, v))| InteractionRecord {
            initiator: Address::synthetic(s),
            recipient: Address::synthetic(d),
            value: v as u128,
            kind: if call { InteractionKind::Call } else { InteractionKind::Trans },
            timestamp: t as u64,
        })
        .collect()
}

fn edge_list(accounts: u64, max: usize) -> impl Strategy<Value = Vec<(u64, u64, bool, u32)>> {
    prop::collection::vec((0..accounts, 0..accounts, any::<bool>(), 0u32..1000), 1..max)
}

/// Rotation built from Givens rotations on consecutive coordinate pairs.
fn rotate(m: &Matrix, angles: &[f64]) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (k, &a) in angles.iter().enumerate() {
            let (i, j) = (k % row.len(), (k + 1) % row.len());
            let (c, s) = (a.cos(), a.sin());
            let (x, y) = (row[i], row[j]);
            row[i] = c * x - s * y;
            row[j] = s * x + c * y;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_non_negative(
        params in prop::collection::vec((-5.0f64..5.0, 1e-3f64..5.0), 1..30),
    ) {
        let (mu, sigma): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
        prop_assert!(kl_divergence(&mu, &sigma) >= 0.0);
    }

    #[test]
    fn attention_rows_are_distributions(h in matrix(3, 8), seed in 0u64..1000) {
        let enc = encoder(3, seed);
        let (_, _, weights) = enc.inter_view_attention(&h, AccountType::Eoa).unwrap();
        prop_assert_eq!(weights.len(), 4 * 3 * 3);
        for row in weights.chunks(3) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn fused_vector_ignores_view_order(
        data in matrix(3 * SLOTS, 5),
        seed in 0u64..1000,
        perm in Just([0usize, 1, 2]).prop_shuffle(),
    ) {
        let enc = encoder(3, seed);
        let mut permuted = Matrix::zeros(3 * SLOTS, 5);
        for (to, &from) in perm.iter().enumerate() {
            for s in 0..SLOTS {
                permuted.row_mut(to * SLOTS + s).copy_from_slice(data.row(from * SLOTS + s));
            }
        }
        let a = AugmentedFeatureSet { views: 3, data };
        let b = AugmentedFeatureSet { views: 3, data: permuted };
        for ty in AccountType::ALL {
            let fa = enc.fuse(&[&a], &[ty]).unwrap();
            let fb = enc.fuse(&[&b], &[ty]).unwrap();
            prop_assert!(fa.max_abs_diff(&fb) < 1e-9);
        }
    }

    #[test]
    fn contrast_is_monotone_in_margin(h in matrix(2 * SLOTS, 6), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(account_loss(&h, lo) <= account_loss(&h, hi));
    }

    #[test]
    fn contrast_ignores_rotation(
        h in matrix(2 * SLOTS, 6),
        angles in prop::collection::vec(-3.2f64..3.2, 1..10),
    ) {
        let a = account_loss(&h, DEFAULT_MARGIN);
        let b = account_loss(&rotate(&h, &angles), DEFAULT_MARGIN);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn contrast_totals_split_by_type(hs in prop::collection::vec(matrix(SLOTS, 3), 1..8)) {
        let types: Vec<AccountType> = (0..hs.len())
            .map(|i| if i % 3 == 0 { AccountType::Ca } else { AccountType::Eoa })
            .collect();
        let all = contrast_loss(&hs, &types, DEFAULT_MARGIN);
        for ty in AccountType::ALL {
            let members: Vec<f64> = hs
                .iter()
                .zip(&types)
                .filter(|(_, &t)| t == ty)
                .map(|(h, _)| account_loss(h, DEFAULT_MARGIN))
                .collect();
            let mean = members.iter().sum::<f64>() / members.len().max(1) as f64;
            prop_assert!((all.get(ty) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn propagation_commutes_with_relabeling(
        edges in prop::collection::vec((0usize..6, 0usize..6), 0..15),
        h0 in matrix(6, 4),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        seed in 0u64..100,
    ) {
        let prop = Propagation::new(
            PropagationConfig { input_dim: 4, hidden: 5, share_weights: false },
            seed,
        )
        .unwrap();
        let types: Vec<AccountType> = (0..6)
            .map(|i| if i % 2 == 0 { AccountType::Eoa } else { AccountType::Ca })
            .collect();
        let adjacency = |map: &dyn Fn(usize) -> usize| {
            let mut t = Vec::new();
            for &(s, d) in &edges {
                t.push((map(s), map(d), 1.0));
                if s != d {
                    t.push((map(d), map(s), 1.0));
                }
            }
            t.sort_by_key(|e| (e.0, e.1));
            Csr::from_triples(6, 6, &t)
        };
        let out = prop.message_pass(&h0, &adjacency(&|i| i), &types).unwrap();

        let mut h1 = Matrix::zeros(6, 4);
        let mut t1 = vec![AccountType::Eoa; 6];
        for i in 0..6 {
            h1.row_mut(perm[i]).copy_from_slice(h0.row(i));
            t1[perm[i]] = types[i];
        }
        let out1 = prop.message_pass(&h1, &adjacency(&|i| perm[i]), &t1).unwrap();
        for i in 0..6 {
            for (a, b) in out.row(i).iter().zip(out1.row(perm[i])) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn macro_f1_ignores_class_naming(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..60)) {
        let (pred, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let flip = |v: &[usize]| v.iter().map(|c| 1 - c).collect::<Vec<_>>();
        let a = evaluate(&pred, &labels).unwrap();
        let b = evaluate(&flip(&pred), &flip(&labels)).unwrap();
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        prop_assert!((a.micro_f1 - b.micro_f1).abs() < 1e-12);
        let c = Confusion::from_predictions(&pred, &labels).unwrap();
        prop_assert_eq!(Metrics::from_confusion(&c.swapped()).macro_f1, b.macro_f1);
    }

    #[test]
    fn joint_loss_is_affine(
        p in 0.0f64..5.0, e in 0.0f64..5.0, c in 0.0f64..5.0,
        l1 in 0.0f64..3.0, l2 in 0.0f64..3.0, t in 0.0f64..1.0,
    ) {
        let mix = joint_loss(p, e, c, t * l1 + (1.0 - t) * l2);
        let lin = t * joint_loss(p, e, c, l1) + (1.0 - t) * joint_loss(p, e, c, l2);
        prop_assert!((mix - lin).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_each_class(
        normals in 5usize..60, frauds in 5usize..30, seed in any::<u64>(),
    ) {
        let labeled: BTreeMap<usize, Label> = (0..normals + frauds)
            .map(|i| (i * 3, if i < normals { Label::Normal } else { Label::Fraud }))
            .collect();
        let s = split_dataset(&labeled, [0.6, 0.2, 0.2], seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, labeled.keys().copied().collect::<Vec<_>>());
        for part in [&s.train, &s.val, &s.test] {
            prop_assert!(part.iter().any(|a| labeled[a] == Label::Fraud));
        }
        prop_assert_eq!(s, split_dataset(&labeled, [0.6, 0.2, 0.2], seed).unwrap());
    }

    #[test]
    fn normalized_features_lie_in_unit_interval(edges in edge_list(12, 60)) {
        let mut g = Heig::build(&records(&edges), None, None).unwrap();
        prop_assert!(g.features().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        g.apply_feature_mask(FeatureMask::TransOnly);
        for r in 0..g.num_accounts() {
            prop_assert!(g.feature_row(r)[..7].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sampling_respects_fanout(edges in edge_list(10, 80), fanout in 1usize..4, seed in 0u64..50) {
        let g = Heig::build(&records(&edges), None, None).unwrap();
        let sub = sample_subgraph(&g, &[0], fanout, 1, seed);
        prop_assert_eq!(&sub, &sample_subgraph(&g, &[0], fanout, 1, seed));
        for meta in 0..6 {
            let out = sub.edges.iter().filter(|&&e| {
                let edge = g.edge(e);
                edge.src == 0 && edge.dst != 0 && edge.meta.index() == meta
            });
            prop_assert!(out.count() <= fanout);
        }
        // every sampled edge touches a target at one hop
        for &e in &sub.edges {
            let edge = g.edge(e);
            prop_assert!(sub.targets().contains(&edge.src) || sub.targets().contains(&edge.dst));
        }
    }
}

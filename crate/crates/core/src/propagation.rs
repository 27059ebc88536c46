//! Two rounds of interaction feature passing and the prediction head.
//!
//! Each round replaces every account's vector with
//! `tanh((Σ_{j∈N(i)} h_j ‖ h_i) Θ_*)`, where `N(i)` is the undirected,
//! multiplicity-counting neighborhood in the sampled subgraph and `*` is the
//! account's own type.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{softmax_in_place, Matrix};
use crate::params::{fan_in_uniform, ParamId, ParamStore};
use crate::record::AccountType;
use crate::rng::{rng_for, stream};
use crate::tape::{Csr, Tape, Var};

pub const LAYERS: usize = 2;
pub const CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropagationConfig {
    /// Width of `H⁽⁰⁾`.
    pub input_dim: usize,
    pub hidden: usize,
    pub share_weights: bool,
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("propagation widths must be positive".into()));
        }
        Ok(())
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}

/// Where the propagation weights live inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationLayout {
    pub config: PropagationConfig,
    /// `layers[l][set]` is `Θ⁽ˡ⁾` for one weight set.
    layers: Vec<Vec<ParamId>>,
    pub psi: ParamId,
    pub psi_bias: ParamId,
}

fn set_names(config: &PropagationConfig) -> &'static [&'static str] {
    if config.share_weights {
        &["shared"]
    } else {
        &["eoa", "ca"]
    }
}

impl PropagationLayout {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        config: PropagationConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, &[stream::INIT, 0x9a55]);
        let h = config.hidden;
        let layers = (0..LAYERS)
            .map(|l| {
                set_names(&config)
                    .iter()
                    .map(|set| {
                        let rows = 2 * config.layer_input(l);
                        store.push(
                            &format!("{prefix}{set}.theta{l}"),
                            fan_in_uniform(&mut rng, rows, h),
                        )
                    })
                    .collect()
            })
            .collect();
        let psi = store.push(&format!("{prefix}psi"), fan_in_uniform(&mut rng, h, CLASSES));
        let psi_bias = store.push(&format!("{prefix}psi_bias"), Matrix::zeros(1, CLASSES));
        Ok(Self {
            config,
            layers,
            psi,
            psi_bias,
        })
    }

    pub fn locate(store: &ParamStore, prefix: &str, config: PropagationConfig) -> Result<Self> {
        config.validate()?;
        let find = |name: &str, rows: usize, cols: usize| {
            let full = format!("{prefix}{name}");
            let id = store
                .index_of(&full)
                .ok_or_else(|| Error::Config(format!("missing parameter {full}")))?;
            if store.get(id).shape() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    what: "propagation weight",
                    expected: rows * cols,
                    found: store.get(id).data().len(),
                });
            }
            Ok(id)
        };
        let h = config.hidden;
        let mut layers = Vec::new();
        for l in 0..LAYERS {
            let mut sets = Vec::new();
            for set in set_names(&config) {
                sets.push(find(&format!("{set}.theta{l}"), 2 * config.layer_input(l), h)?);
            }
            layers.push(sets);
        }
        Ok(Self {
            config,
            layers,
            psi: find("psi", h, CLASSES)?,
            psi_bias: find("psi_bias", 1, CLASSES)?,
        })
    }

    pub fn theta(&self, layer: usize, ty: AccountType) -> ParamId {
        if self.config.share_weights {
            self.layers[layer][0]
        } else {
            self.layers[layer][ty.index()]
        }
    }

    /// `H⁽²⁾` for every row of `h0`. `adjacency` and `types` are indexed like
    /// the rows of `h0`.
    pub fn message_pass(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        h0: Var,
        adjacency: &Csr,
        types: &[AccountType],
    ) -> Result<Var> {
        let (n, width) = tape.value(h0).shape();
        if width != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                what: "propagation input width",
                expected: self.config.input_dim,
                found: width,
            });
        }
        if adjacency.rows != n || adjacency.cols != n || types.len() != n {
            return Err(Error::DimensionMismatch {
                what: "propagation rows",
                expected: n,
                found: adjacency.rows,
            });
        }
        let groups: Vec<(AccountType, Vec<usize>)> = AccountType::ALL
            .into_iter()
            .map(|ty| (ty, (0..n).filter(|&i| types[i] == ty).collect::<Vec<_>>()))
            .filter(|(_, rows)| !rows.is_empty())
            .collect();
        let mut h = h0;
        for layer in 0..LAYERS {
            let neighbors = tape.spmm(adjacency.clone(), h);
            let joined = tape.concat_cols(&[neighbors, h]);
            h = if self.config.share_weights || groups.len() == 1 {
                let ty = groups.first().map_or(AccountType::Eoa, |g| g.0);
                let z = tape.matmul(joined, vars[self.theta(layer, ty).0]);
                tape.tanh(z)
            } else {
                let mut parts = Vec::with_capacity(groups.len());
                for (ty, rows) in &groups {
                    let sel = tape.select_rows(joined, rows);
                    let z = tape.matmul(sel, vars[self.theta(layer, *ty).0]);
                    parts.push(tape.tanh(z));
                }
                let parts: Vec<(Var, &[usize])> = parts
                    .iter()
                    .zip(&groups)
                    .map(|(&v, (_, rows))| (v, &rows[..]))
                    .collect();
                tape.merge_rows(n, &parts)
            };
        }
        Ok(h)
    }

    /// Class logits `HΨ + b`.
    pub fn logits(&self, tape: &mut Tape, vars: &[Var], h: Var) -> Var {
        let z = tape.matmul(h, vars[self.psi.0]);
        tape.add_row(z, vars[self.psi_bias.0])
    }
}

/// Softmax of `h Ψ + b` for one account vector.
pub fn predict(h: &[f64], psi: &Matrix, bias: &[f64]) -> [f64; CLASSES] {
    let mut out = [0.0; CLASSES];
    for (c, o) in out.iter_mut().enumerate() {
        *o = bias[c] + h.iter().enumerate().map(|(k, &v)| v * psi.get(k, c)).sum::<f64>();
    }
    softmax_in_place(&mut out);
    out
}

/// Stand-alone propagation block with its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub store: ParamStore,
    pub layout: PropagationLayout,
}

impl Propagation {
    pub fn new(config: PropagationConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let layout = PropagationLayout::register(&mut store, "", config, seed)?;
        Ok(Self { store, layout })
    }

    pub fn message_pass(&self, h0: &Matrix, adjacency: &Csr, types: &[AccountType]) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let h = tape.constant(h0.clone());
        let out = self.layout.message_pass(&mut tape, &vars, h, adjacency, types)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict(&self, h: &[f64]) -> [f64; CLASSES] {
        predict(
            h,
            self.store.get(self.layout.psi),
            self.store.get(self.layout.psi_bias).data(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize) -> PropagationConfig {
        PropagationConfig {
            input_dim: d,
            hidden: d,
            share_weights: false,
        }
    }

    #[test]
    fn zero_weights_give_zero() {
        let mut p = Propagation::new(cfg(3), 1).unwrap();
        p.store.values_mut().iter_mut().for_each(|m| *m = Matrix::zeros(m.rows(), m.cols()));
        let h0 = Matrix::filled(2, 3, 0.5);
        let adj = Csr::from_triples(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let out = p.message_pass(&h0, &adj, &[AccountType::Eoa, AccountType::Ca]).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.predict(&[0.3, 0.1, 0.2]), [0.5, 0.5]);
    }

    #[test]
    fn softmax_closed_form() {
        let psi = Matrix::zeros(1, 2);
        let p = predict(&[0.0], &psi, &[0.0, libm::log(3.0)]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_uses_only_itself() {
        let p = Propagation::new(cfg(2), 3).unwrap();
        let h0 = Matrix::row_vector(&[0.4, -0.7]);
        let adj = Csr::from_triples(1, 1, &[]);
        let out = p.message_pass(&h0, &adj, &[AccountType::Ca]).unwrap();
        let mut h = h0.clone();
        for l in 0..LAYERS {
            let joined = Matrix::row_vector(&[0.0, 0.0, h.get(0, 0), h.get(0, 1)]);
            h = joined.matmul(p.store.get(p.layout.theta(l, AccountType::Ca))).map(libm::tanh);
        }
        assert!(out.max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn path_graph_by_hand() {
        // 0 - 1 - 2; node 1 is a CA, the ends are EOAs
        let mut p = Propagation::new(cfg(2), 0).unwrap();
        let eoa = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.0], &[0.0, 0.5]]);
        let ca = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0], &[0.0, -0.5], &[0.5, 0.0]]);
        for l in 0..LAYERS {
            *p.store.get_mut(p.layout.theta(l, AccountType::Eoa)) = eoa.clone();
            *p.store.get_mut(p.layout.theta(l, AccountType::Ca)) = ca.clone();
        }
        let h0 = Matrix::from_rows(&[&[0.2, 0.4], &[-0.6, 0.1], &[0.3, 0.3]]);
        let adj = Csr::from_triples(
            3,
            3,
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        );
        let types = [AccountType::Eoa, AccountType::Ca, AccountType::Eoa];
        let out = p.message_pass(&h0, &adj, &types).unwrap();

        let step = |h: [[f64; 2]; 3]| {
            let nb = [h[1], [h[0][0] + h[2][0], h[0][1] + h[2][1]], h[1]];
            let mut next = [[0.0; 2]; 3];
            for i in 0..3 {
                let x = [nb[i][0], nb[i][1], h[i][0], h[i][1]];
                let w = if i == 1 { &ca } else { &eoa };
                for c in 0..2 {
                    let z: f64 = (0..4).map(|k| x[k] * w.get(k, c)).sum();
                    next[i][c] = libm::tanh(z);
                }
            }
            next
        };
        let h2 = step(step([[0.2, 0.4], [-0.6, 0.1], [0.3, 0.3]]));
        for i in 0..3 {
            for c in 0..2 {
                assert!((out.get(i, c) - h2[i][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn duplicate_edge_adds_one_neighbor_term() {
        let h0 = Matrix::from_rows(&[&[0.4], &[0.8]]);
        let one = Csr::from_triples(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let two = Csr::from_triples(2, 2, &[(0, 1, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 0, 1.0)]);
        let d = two.mul_dense(&h0).get(0, 0) - one.mul_dense(&h0).get(0, 0);
        assert_eq!(d, 0.8);
    }
}

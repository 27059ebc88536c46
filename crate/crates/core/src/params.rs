//! Named parameter collections and their initialization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::tape::{Gradients, Tape, Var};

/// Ordered list of named matrices. The order is the serialization order.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamId(pub usize);

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, value: Matrix) -> ParamId {
        debug_assert!(self.index_of(name).is_none(), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn index_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|id| self.get(id))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// `(name, rows, cols)` for every entry.
    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        self.iter()
            .map(|(n, m)| (n.to_string(), m.rows(), m.cols()))
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }

    /// Registers every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|m| tape.param(m.clone())).collect()
    }

    /// Gradients for `vars` (from [`ParamStore::bind`]); missing entries are zero.
    pub fn collect_grads(&self, grads: &mut Gradients, vars: &[Var]) -> Vec<Matrix> {
        self.values
            .iter()
            .zip(vars)
            .map(|(m, &v)| grads.take(v).unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
            .collect()
    }
}

/// Uniform `(-1/√fan_in, 1/√fan_in)` initialization for a `fan_in × fan_out` weight.
pub fn fan_in_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = fan_in_uniform(&mut rng_for(1, &[]), 16, 4);
        let b = fan_in_uniform(&mut rng_for(1, &[]), 16, 4);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| v.abs() < 0.25));
    }

    #[test]
    fn store_lookup() {
        let mut s = ParamStore::new();
        let id = s.push("w", Matrix::zeros(2, 3));
        assert_eq!(s.index_of("w"), Some(id));
        assert_eq!(s.shapes(), [("w".into(), 2, 3)]);
        assert_eq!(s.num_scalars(), 6);
    }
}

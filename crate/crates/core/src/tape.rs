//! A small reverse-mode differentiation tape over [`Matrix`] values.
//!
//! Every model in the crate builds its forward pass on a [`Tape`]; calling
//! [`Tape::backward`] on a scalar node returns the gradient of that scalar
//! with respect to every node that was created with `requires_grad`.
//!
//! Nodes are evaluated eagerly, so the tape doubles as the inference path.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{softmax_in_place, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse row-compressed matrix used for neighbor sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    /// `offsets[r]..offsets[r + 1]` indexes `indices`/`weights` for row `r`.
    pub offsets: Vec<usize>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, weight)` triples; duplicates are summed.
    pub fn from_triples(rows: usize, cols: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for &(r, _, _) in triples {
            counts[r + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0usize; triples.len()];
        let mut weights = vec![0.0; triples.len()];
        for &(r, c, w) in triples {
            let slot = cursor[r];
            indices[slot] = c;
            weights[slot] = w;
            cursor[r] += 1;
        }
        Self {
            rows,
            cols,
            offsets,
            indices,
            weights,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `self · dense`.
    pub fn mul_dense(&self, dense: &Matrix) -> Matrix {
        assert_eq!(self.cols, dense.rows());
        let mut out = Matrix::zeros(self.rows, dense.cols());
        for r in 0..self.rows {
            let out_row = out.row_mut(r);
            for k in self.offsets[r]..self.offsets[r + 1] {
                let w = self.weights[k];
                for (o, &v) in out_row.iter_mut().zip(dense.row(self.indices[k])) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// `selfᵀ · dense`.
    pub fn tmul_dense(&self, dense: &Matrix) -> Matrix {
        assert_eq!(self.rows, dense.rows());
        let mut out = Matrix::zeros(self.cols, dense.cols());
        for r in 0..self.rows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                let w = self.weights[k];
                let src = dense.row(r);
                for (o, &v) in out.row_mut(self.indices[k]).iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Relu(Var),
    Clamp(Var, f64, f64),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    MergeRows(Vec<(Var, Vec<usize>)>),
    GroupMean(Var, usize),
    GroupSum(Var, usize),
    Reshape(Var),
    RowSum(Var),
    Sum(Var),
    Mean(Var),
    SpMM(Csr, Var),
    ViewAttention {
        q: Var,
        k: Var,
        v: Var,
        views: usize,
        heads: usize,
        weights: Vec<f64>,
    },
    GroupSoftmax(Var, usize),
    MulRowsByCol(Var, Var),
    SoftmaxXent {
        logits: Var,
        labels: Vec<usize>,
        probs: Matrix,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Probability floor applied inside [`Tape::softmax_cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients returned by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads[var.0].as_ref()
    }

    pub fn take(&mut self, var: Var) -> Option<Matrix> {
        self.grads[var.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Trainable input.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub(a, b), rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul(a, b), rg)
    }

    /// Adds the `1 × cols` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (rows, cols) = self.value(a).shape();
        assert_eq!(self.value(bias).shape(), (1, cols), "bias shape");
        let mut value = self.value(a).clone();
        let b = self.value(bias).data().to_vec();
        for r in 0..rows {
            for (v, bb) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bb;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        self.push(value, Op::AddRow(a, bias), rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(value, Op::AddScalar(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(libm::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(libm::exp);
        let rg = self.rg(a);
        self.push(value, Op::Exp(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(value, Op::Square(a), rg)
    }

    /// `max(0, x)`; the derivative at 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    /// Clamps into `[lo, hi]`; gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        let rg = self.rg(a);
        self.push(value, Op::Clamp(a, lo, hi), rg)
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let src = self.value(a);
        assert!(start + len <= src.cols());
        let mut value = Matrix::zeros(src.rows(), len);
        for r in 0..src.rows() {
            value
                .row_mut(r)
                .copy_from_slice(&src.row(r)[start..start + len]);
        }
        let rg = self.rg(a);
        self.push(value, Op::SliceCols(a, start), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p);
                assert_eq!(src.rows(), rows, "concat_cols row count");
                value.row_mut(r)[offset..offset + src.cols()].copy_from_slice(src.row(r));
                offset += src.cols();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let src = self.value(a);
        let mut value = Matrix::zeros(rows.len(), src.cols());
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).copy_from_slice(src.row(r));
        }
        let rg = self.rg(a);
        self.push(value, Op::SelectRows(a, rows.to_vec()), rg)
    }

    /// Builds a `rows × cols` matrix where row `targets[i]` of part `p` is
    /// row `i` of `p`. Rows not covered by any part stay zero.
    pub fn merge_rows(&mut self, rows: usize, parts: &[(Var, &[usize])]) -> Var {
        let cols = self.value(parts[0].0).cols();
        let mut value = Matrix::zeros(rows, cols);
        for &(p, targets) in parts {
            let src = self.value(p);
            assert_eq!(src.rows(), targets.len(), "merge_rows index count");
            for (i, &t) in targets.iter().enumerate() {
                value.row_mut(t).copy_from_slice(src.row(i));
            }
        }
        let rg = parts.iter().any(|&(p, _)| self.rg(p));
        let op = Op::MergeRows(parts.iter().map(|&(p, t)| (p, t.to_vec())).collect());
        self.push(value, op, rg)
    }

    /// Mean over consecutive groups of `group` rows.
    pub fn group_mean(&mut self, a: Var, group: usize) -> Var {
        let value = group_reduce(self.value(a), group, 1.0 / group as f64);
        let rg = self.rg(a);
        self.push(value, Op::GroupMean(a, group), rg)
    }

    /// Sum over consecutive groups of `group` rows.
    pub fn group_sum(&mut self, a: Var, group: usize) -> Var {
        let value = group_reduce(self.value(a), group, 1.0);
        let rg = self.rg(a);
        self.push(value, Op::GroupSum(a, group), rg)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let value = self.value(a).clone().reshaped(rows, cols);
        let rg = self.rg(a);
        self.push(value, Op::Reshape(a), rg)
    }

    /// Per-row sum, giving a column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let data = (0..src.rows()).map(|r| src.row(r).iter().sum()).collect();
        let value = Matrix::from_vec(src.rows(), 1, data);
        let rg = self.rg(a);
        self.push(value, Op::RowSum(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    /// Mean of all entries; 0 for an empty matrix.
    pub fn mean(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let n = src.data().len();
        let value = Matrix::scalar(if n == 0 { 0.0 } else { src.sum() / n as f64 });
        let rg = self.rg(a);
        self.push(value, Op::Mean(a), rg)
    }

    /// `sparse · a`.
    pub fn spmm(&mut self, sparse: Csr, a: Var) -> Var {
        let value = sparse.mul_dense(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::SpMM(sparse, a), rg)
    }

    /// Multi-head self-attention within consecutive blocks of `views` rows.
    ///
    /// `q`, `k`, `v` are `(n·views) × d`. For each block and head the head's
    /// column slice gives scores `QKᵀ` (unscaled), a row softmax, and output
    /// rows `A·V`. Head outputs are written back into their column slices.
    pub fn view_attention(&mut self, q: Var, k: Var, v: Var, views: usize, heads: usize) -> Var {
        let (rows, dim) = self.value(q).shape();
        assert_eq!(self.value(k).shape(), (rows, dim));
        assert_eq!(self.value(v).shape(), (rows, dim));
        assert!(views > 0 && rows % views == 0 && dim % heads == 0);
        let head_dim = dim / heads;
        let blocks = rows / views;
        let (qm, km, vm) = (self.value(q), self.value(k), self.value(v));
        let mut out = Matrix::zeros(rows, dim);
        let mut weights = vec![0.0; blocks * heads * views * views];
        let mut scores = vec![0.0; views];
        for b in 0..blocks {
            let base = b * views;
            for h in 0..heads {
                let cols = h * head_dim..(h + 1) * head_dim;
                for a in 0..views {
                    let qa = &qm.row(base + a)[cols.clone()];
                    for (c, s) in scores.iter_mut().enumerate() {
                        *s = crate::linalg::dot(qa, &km.row(base + c)[cols.clone()]);
                    }
                    softmax_in_place(&mut scores);
                    let w_off = ((b * heads + h) * views + a) * views;
                    weights[w_off..w_off + views].copy_from_slice(&scores);
                    let out_row = &mut out.row_mut(base + a)[cols.clone()];
                    for (c, &w) in scores.iter().enumerate() {
                        for (o, &val) in out_row.iter_mut().zip(&vm.row(base + c)[cols.clone()]) {
                            *o += w * val;
                        }
                    }
                }
            }
        }
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        self.push(
            out,
            Op::ViewAttention {
                q,
                k,
                v,
                views,
                heads,
                weights,
            },
            rg,
        )
    }

    /// Attention weights recorded by a [`Tape::view_attention`] node, laid
    /// out as `[block][head][query view][key view]`.
    pub fn attention_weights(&self, var: Var) -> Option<&[f64]> {
        match &self.nodes[var.0].op {
            Op::ViewAttention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Softmax over consecutive groups of `group` rows, independently per column.
    pub fn group_softmax(&mut self, a: Var, group: usize) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.shape();
        assert!(group > 0 && rows % group == 0);
        let mut value = src.clone();
        let mut buf = vec![0.0; group];
        for g in 0..rows / group {
            for c in 0..cols {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = src.get(g * group + i, c);
                }
                softmax_in_place(&mut buf);
                for (i, &b) in buf.iter().enumerate() {
                    value.set(g * group + i, c, b);
                }
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::GroupSoftmax(a, group), rg)
    }

    /// Scales row `i` of `a` by `col[i]`.
    pub fn mul_rows_by_col(&mut self, a: Var, col: Var) -> Var {
        let (rows, _) = self.value(a).shape();
        assert_eq!(self.value(col).shape(), (rows, 1));
        let mut value = self.value(a).clone();
        for r in 0..rows {
            let w = self.value(col).get(r, 0);
            for v in value.row_mut(r) {
                *v *= w;
            }
        }
        let rg = self.rg(a) || self.rg(col);
        self.push(value, Op::MulRowsByCol(a, col), rg)
    }

    /// Mean over rows of `-ln max(softmax(logits)[label], PROB_FLOOR)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let src = self.value(logits);
        assert_eq!(src.rows(), labels.len());
        let mut probs = src.clone();
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            softmax_in_place(probs.row_mut(r));
            total -= libm::log(probs.get(r, y).max(PROB_FLOOR));
        }
        let n = labels.len().max(1) as f64;
        let rg = self.rg(logits);
        self.push(
            Matrix::scalar(total / n),
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        )
    }

    /// Reverse pass from the scalar node `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], var: Var, delta: Matrix) {
        if !self.rg(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let d = g.matmul_nt(self.value(*b));
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = self.value(*a).matmul_tn(g);
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let d = g.zip_map(self.value(*b), |x, y| x * y);
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = g.zip_map(self.value(*a), |x, y| x * y);
                    self.accumulate(grads, *b, d);
                }
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                if self.rg(*bias) {
                    let mut d = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in d.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    self.accumulate(grads, *bias, d);
                }
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, g.map(|x| x * f)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Tanh(a) => {
                let d = g.zip_map(&node.value, |x, t| x * (1.0 - t * t));
                self.accumulate(grads, *a, d);
            }
            Op::Exp(a) => {
                let d = g.zip_map(&node.value, |x, e| x * e);
                self.accumulate(grads, *a, d);
            }
            Op::Square(a) => {
                let d = g.zip_map(self.value(*a), |x, v| 2.0 * x * v);
                self.accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let d = g.zip_map(self.value(*a), |x, v| if v > 0.0 { x } else { 0.0 });
                self.accumulate(grads, *a, d);
            }
            Op::Clamp(a, lo, hi) => {
                let d = g.zip_map(self.value(*a), |x, v| {
                    if v >= *lo && v <= *hi {
                        x
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *a, d);
            }
            Op::SliceCols(a, start) => {
                let src = self.value(*a);
                let mut d = Matrix::zeros(src.rows(), src.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.accumulate(grads, *a, d);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    if self.rg(p) {
                        let mut d = Matrix::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        self.accumulate(grads, p, d);
                    }
                    offset += cols;
                }
            }
            Op::SelectRows(a, rows) => {
                let src = self.value(*a);
                let mut d = Matrix::zeros(src.rows(), src.cols());
                for (i, &r) in rows.iter().enumerate() {
                    for (o, &v) in d.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::MergeRows(parts) => {
                for (p, targets) in parts {
                    if !self.rg(*p) {
                        continue;
                    }
                    let mut d = Matrix::zeros(targets.len(), g.cols());
                    for (i, &t) in targets.iter().enumerate() {
                        d.row_mut(i).copy_from_slice(g.row(t));
                    }
                    self.accumulate(grads, *p, d);
                }
            }
            Op::GroupMean(a, group) | Op::GroupSum(a, group) => {
                let factor = match node.op {
                    Op::GroupMean(..) => 1.0 / *group as f64,
                    _ => 1.0,
                };
                let src = self.value(*a);
                let mut d = Matrix::zeros(src.rows(), src.cols());
                for r in 0..src.rows() {
                    for (o, &v) in d.row_mut(r).iter_mut().zip(g.row(r / group)) {
                        *o = v * factor;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Reshape(a) => {
                let (rows, cols) = self.value(*a).shape();
                self.accumulate(grads, *a, g.clone().reshaped(rows, cols));
            }
            Op::RowSum(a) => {
                let src = self.value(*a);
                let mut d = Matrix::zeros(src.rows(), src.cols());
                for r in 0..src.rows() {
                    let gr = g.get(r, 0);
                    d.row_mut(r).iter_mut().for_each(|o| *o = gr);
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sum(a) => {
                let (rows, cols) = self.value(*a).shape();
                self.accumulate(grads, *a, Matrix::filled(rows, cols, g.item()));
            }
            Op::Mean(a) => {
                let (rows, cols) = self.value(*a).shape();
                let n = (rows * cols).max(1) as f64;
                self.accumulate(grads, *a, Matrix::filled(rows, cols, g.item() / n));
            }
            Op::SpMM(sparse, a) => {
                self.accumulate(grads, *a, sparse.tmul_dense(g));
            }
            Op::ViewAttention {
                q,
                k,
                v,
                views,
                heads,
                weights,
            } => {
                let (dq, dk, dv) =
                    self.attention_backward(*q, *k, *v, *views, *heads, weights, g);
                self.accumulate(grads, *q, dq);
                self.accumulate(grads, *k, dk);
                self.accumulate(grads, *v, dv);
            }
            Op::GroupSoftmax(a, group) => {
                let s = &node.value;
                let mut d = Matrix::zeros(s.rows(), s.cols());
                for grp in 0..s.rows() / group {
                    for c in 0..s.cols() {
                        let rows = grp * group..(grp + 1) * group;
                        let inner: f64 = rows.clone().map(|r| g.get(r, c) * s.get(r, c)).sum();
                        for r in rows {
                            d.set(r, c, s.get(r, c) * (g.get(r, c) - inner));
                        }
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::MulRowsByCol(a, col) => {
                let x = self.value(*a);
                let w = self.value(*col);
                if self.rg(*a) {
                    let mut d = g.clone();
                    for r in 0..d.rows() {
                        let wr = w.get(r, 0);
                        d.row_mut(r).iter_mut().for_each(|o| *o *= wr);
                    }
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*col) {
                    let data = (0..x.rows())
                        .map(|r| crate::linalg::dot(g.row(r), x.row(r)))
                        .collect();
                    self.accumulate(grads, *col, Matrix::from_vec(x.rows(), 1, data));
                }
            }
            Op::SoftmaxXent {
                logits,
                labels,
                probs,
            } => {
                let n = labels.len().max(1) as f64;
                let scale = g.item() / n;
                let mut d = Matrix::zeros(probs.rows(), probs.cols());
                for (r, &y) in labels.iter().enumerate() {
                    if probs.get(r, y) < PROB_FLOOR {
                        continue;
                    }
                    for c in 0..probs.cols() {
                        let onehot = if c == y { 1.0 } else { 0.0 };
                        d.set(r, c, scale * (probs.get(r, c) - onehot));
                    }
                }
                self.accumulate(grads, *logits, d);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        q: Var,
        k: Var,
        v: Var,
        views: usize,
        heads: usize,
        weights: &[f64],
        g: &Matrix,
    ) -> (Matrix, Matrix, Matrix) {
        let (qm, km, vm) = (self.value(q), self.value(k), self.value(v));
        let (rows, dim) = qm.shape();
        let head_dim = dim / heads;
        let mut dq = Matrix::zeros(rows, dim);
        let mut dk = Matrix::zeros(rows, dim);
        let mut dv = Matrix::zeros(rows, dim);
        let mut d_weights = vec![0.0; views];
        for b in 0..rows / views {
            let base = b * views;
            for h in 0..heads {
                let cols = h * head_dim..(h + 1) * head_dim;
                for a in 0..views {
                    let w_off = ((b * heads + h) * views + a) * views;
                    let w = &weights[w_off..w_off + views];
                    let g_row = &g.row(base + a)[cols.clone()];
                    for c in 0..views {
                        d_weights[c] = crate::linalg::dot(g_row, &vm.row(base + c)[cols.clone()]);
                        for (o, &gv) in dv.row_mut(base + c)[cols.clone()].iter_mut().zip(g_row) {
                            *o += w[c] * gv;
                        }
                    }
                    let inner: f64 = w.iter().zip(&d_weights).map(|(x, y)| x * y).sum();
                    for c in 0..views {
                        let ds = w[c] * (d_weights[c] - inner);
                        if ds == 0.0 {
                            continue;
                        }
                        let k_row = &km.row(base + c)[cols.clone()];
                        for (o, &kv) in dq.row_mut(base + a)[cols.clone()].iter_mut().zip(k_row) {
                            *o += ds * kv;
                        }
                        let q_row = &qm.row(base + a)[cols.clone()];
                        for (o, &qv) in dk.row_mut(base + c)[cols.clone()].iter_mut().zip(q_row) {
                            *o += ds * qv;
                        }
                    }
                }
            }
        }
        (dq, dk, dv)
    }
}

fn group_reduce(src: &Matrix, group: usize, factor: f64) -> Matrix {
    let (rows, cols) = src.shape();
    assert!(group > 0 && rows % group == 0, "rows not divisible by group");
    let mut out = Matrix::zeros(rows / group, cols);
    for r in 0..rows {
        for (o, &v) in out.row_mut(r / group).iter_mut().zip(src.row(r)) {
            *o += v;
        }
    }
    if factor != 1.0 {
        out.data_mut().iter_mut().for_each(|v| *v *= factor);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    }

    /// Central-difference check of `build` w.r.t. its single parameter.
    fn check(param: Matrix, build: impl Fn(&mut Tape, Var) -> Var) {
        let mut tape = Tape::new();
        let p = tape.param(param.clone());
        let out = build(&mut tape, p);
        let grads = tape.backward(out);
        let analytic = grads.get(p).cloned().unwrap_or(Matrix::zeros(param.rows(), param.cols()));
        let h = 1e-6;
        for i in 0..param.data().len() {
            let eval = |delta: f64| {
                let mut m = param.clone();
                m.data_mut()[i] += delta;
                let mut t = Tape::new();
                let p = t.param(m);
                let o = build(&mut t, p);
                t.value(o).item()
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / numeric.abs().max(a.abs()).max(1e-6);
            assert!(err < 1e-5, "entry {i}: analytic {a} numeric {numeric}");
        }
    }

    #[test]
    fn elementwise_and_matmul_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random(&mut rng, 3, 4);
        let x = random(&mut rng, 5, 3);
        let bias = random(&mut rng, 1, 4);
        check(w, |t, p| {
            let xv = t.constant(x.clone());
            let b = t.constant(bias.clone());
            let h = t.matmul(xv, p);
            let h = t.add_row(h, b);
            let h = t.tanh(h);
            let e = t.exp(h);
            let s = t.square(e);
            let c = t.clamp(s, 0.2, 5.0);
            let r = t.add_scalar(c, -1.0);
            let r = t.relu(r);
            let r = t.scale(r, 0.7);
            t.mean(r)
        });
    }

    #[test]
    fn structural_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 8, 3);
        check(a, |t, p| {
            let s = t.slice_cols(p, 1, 2);
            let c = t.concat_cols(&[p, s]);
            let sel = t.select_rows(c, &[0, 3, 3, 7]);
            let other = t.select_rows(c, &[1, 2, 4, 5]);
            let merged = t.merge_rows(8, &[(sel, &[0, 1, 2, 3]), (other, &[4, 5, 6, 7])]);
            let gm = t.group_mean(merged, 2);
            let gs = t.group_sum(gm, 2);
            let rs = t.reshape(gs, 1, 10);
            let sq = t.square(rs);
            let rsum = t.row_sum(sq);
            t.sum(rsum)
        });
    }

    #[test]
    fn sparse_softmax_and_xent_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 6, 2);
        let csr = Csr::from_triples(6, 6, &[(0, 1, 1.0), (1, 0, 1.0), (2, 5, 2.0), (5, 2, 2.0), (3, 3, 1.0)]);
        check(a, |t, p| {
            let n = t.spmm(csr.clone(), p);
            let gsm = t.group_softmax(n, 3);
            let col = t.slice_cols(gsm, 0, 1);
            let scaled = t.mul_rows_by_col(p, col);
            t.softmax_cross_entropy(scaled, &[0, 1, 1, 0, 1, 0])
        });
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random(&mut rng, 6, 4);
        let wq = random(&mut rng, 4, 4);
        let wk = random(&mut rng, 4, 4);
        let wv = random(&mut rng, 4, 4);
        check(h, |t, p| {
            let (a, b, c) = (t.constant(wq.clone()), t.constant(wk.clone()), t.constant(wv.clone()));
            let q = t.matmul(p, a);
            let k = t.matmul(p, b);
            let v = t.matmul(p, c);
            let out = t.view_attention(q, k, v, 3, 2);
            let out = t.tanh(out);
            t.sum(out)
        });
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Matrix::scalar(2.0));
        let p = t.param(Matrix::scalar(3.0));
        let m = t.mul(c, p);
        let g = t.backward(m);
        assert!(g.get(c).is_none());
        assert_eq!(g.get(p).unwrap().item(), 2.0);
    }
}

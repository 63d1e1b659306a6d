//! Define-by-run reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] is built fresh for every forward pass. Leaves created with
//! [`Tape::param`] receive gradients; leaves created with [`Tape::constant`]
//! do not, and nothing downstream of constants alone is differentiated.
//!
//! ```
//! use collusion_gnn::tensor::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::from_rows(&[[-1.0, 2.0], [3.0, -4.0]]).unwrap());
//! let r = tape.relu(w);
//! let loss = tape.sum(r);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[0.0, 1.0, 1.0, 0.0]);
//! ```

use std::sync::Arc;

use rand::Rng;

use super::matrix::gemm;
use super::ops::{self, LOG_EPS};
use super::{CsrMatrix, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `m×n + 1×n`, broadcast over rows.
    AddRow(Var, Var),
    Mul(Var, Var),
    /// `m×n ⊙ 1×n`, broadcast over rows.
    MulRow(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    Log(Var),
    Scale(Var, f64),
    Sum(Var),
    Dropout(Var, Matrix),
    /// Constant sparse matrix times a variable.
    SpMM(Arc<CsrMatrix>, Var),
    /// Coefficient row `1×B` expanded to the `(B·n)×n` stacked block `[a₁I; …; a_BI]`.
    ExpandBasis(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    /// `[A₁X | … | A_RX]`.
    SpmmStack(Vec<Arc<CsrMatrix>>, Var),
    /// `Σ_r A_r Y_r` over the equal-width column blocks `Y = [Y₁ | … | Y_R]`.
    SpmmBlocks(Vec<Arc<CsrMatrix>>, Var),
}

/// Kind of operation recorded at a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddRow,
    Mul,
    MulRow,
    Relu,
    SoftmaxRows,
    Log,
    Scale,
    Sum,
    DropoutApply,
    SparseMatMul,
    ExpandBasis,
    Concat,
    SparseStack,
    SparseBlockSum,
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
    needs_grad: bool,
}

/// Recorded computation. Nodes are appended in evaluation order, so the
/// graph is acyclic by construction.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every differentiable node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn op_kind(&self, v: Var) -> OpKind {
        match self.nodes[v.0].op {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Mul(..) => OpKind::Mul,
            Op::MulRow(..) => OpKind::MulRow,
            Op::Relu(_) => OpKind::Relu,
            Op::SoftmaxRows(_) => OpKind::SoftmaxRows,
            Op::Log(_) => OpKind::Log,
            Op::Scale(..) => OpKind::Scale,
            Op::Sum(_) => OpKind::Sum,
            Op::Dropout(..) => OpKind::DropoutApply,
            Op::SpMM(..) => OpKind::SparseMatMul,
            Op::ExpandBasis(..) => OpKind::ExpandBasis,
            Op::ConcatCols(_) | Op::ConcatRows(_) => OpKind::Concat,
            Op::SpmmStack(..) => OpKind::SparseStack,
            Op::SpmmBlocks(..) => OpKind::SparseBlockSum,
        }
    }

    fn push(&mut self, op: Op, value: Matrix, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).checked_add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, ng))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(Error::Dimension {
                op: "add_row",
                left: av.shape(),
                right: rv.shape(),
            });
        }
        let mut value = av.clone();
        let r = rv.row(0).to_vec();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(Op::AddRow(a, row), value, ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Dimension {
                op: "mul",
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Matrix::from_vec(av.rows(), av.cols(), data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), value, ng))
    }

    /// Multiplies every row of an `m×n` matrix elementwise by a `1×n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(Error::Dimension {
                op: "mul_row",
                left: av.shape(),
                right: rv.shape(),
            });
        }
        let mut value = av.clone();
        let r = rv.row(0).to_vec();
        for i in 0..value.rows() {
            for (v, w) in value.row_mut(i).iter_mut().zip(&r) {
                *v *= w;
            }
        }
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(Op::MulRow(a, row), value, ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = ops::relu(self.value(a));
        let ng = self.needs(a);
        self.push(Op::Relu(a), value, ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = ops::softmax_rows(self.value(a));
        let ng = self.needs(a);
        self.push(Op::SoftmaxRows(a), value, ng)
    }

    /// Natural log with inputs clamped below at [`LOG_EPS`].
    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(LOG_EPS).ln());
        let ng = self.needs(a);
        self.push(Op::Log(a), value, ng)
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let value = self.value(a).scaled(alpha);
        let ng = self.needs(a);
        self.push(Op::Scale(a, alpha), value, ng)
    }

    /// Sum of all entries, as a `1×1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push(Op::Sum(a), value, ng)
    }

    /// Inverted dropout; returns `a` untouched in eval mode or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R, training: bool) -> Result<Var> {
        ops::check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let (r, c) = self.value(a).shape();
        let mask = ops::dropout_mask(r, c, rate, rng)?;
        Ok(self.apply_mask(a, mask))
    }

    /// Multiplies by a fixed mask; the mask is not differentiated.
    pub fn apply_mask(&mut self, a: Var, mask: Matrix) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), mask.shape(), "dropout mask shape");
        let data = av.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect();
        let value = Matrix::from_vec(av.rows(), av.cols(), data).expect("shape checked");
        let ng = self.needs(a);
        self.push(Op::Dropout(a, mask), value, ng)
    }

    /// Constant sparse matrix times `a`.
    pub fn spmm(&mut self, adj: &Arc<CsrMatrix>, a: Var) -> Result<Var> {
        let av = self.value(a);
        if adj.cols() != av.rows() {
            return Err(Error::Dimension {
                op: "spmm",
                left: (adj.rows(), adj.cols()),
                right: av.shape(),
            });
        }
        let value = adj.mul_dense(av);
        let ng = self.needs(a);
        Ok(self.push(Op::SpMM(Arc::clone(adj), a), value, ng))
    }

    /// `[a₁ | … | a_k]`; all parts need the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.check_parts("concat_cols", parts, |m| m.rows())?;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            for r in 0..rows {
                value.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
            }
            off += pv.cols();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value, ng))
    }

    /// `[a₁; …; a_k]`; all parts need the same column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.check_parts("concat_rows", parts, |m| m.cols())?;
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let value = Matrix::from_vec(data.len() / cols.max(1), cols, data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value, ng))
    }

    fn check_parts(&self, op: &'static str, parts: &[Var], dim: impl Fn(&Matrix) -> usize) -> Result<usize> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract(format!("{op} needs at least one part")))?;
        let want = dim(self.value(*first));
        for &p in parts {
            if dim(self.value(p)) != want {
                return Err(Error::Dimension {
                    op,
                    left: self.value(*first).shape(),
                    right: self.value(p).shape(),
                });
            }
        }
        Ok(want)
    }

    fn check_adjacency(&self, op: &'static str, adjs: &[Arc<CsrMatrix>], a: Var) -> Result<()> {
        let av = self.value(a);
        if adjs.is_empty() {
            return Err(Error::Contract(format!("{op} needs at least one matrix")));
        }
        for adj in adjs {
            if adj.cols() != av.rows() || adj.rows() != adjs[0].rows() {
                return Err(Error::Dimension {
                    op,
                    left: (adj.rows(), adj.cols()),
                    right: av.shape(),
                });
            }
        }
        Ok(())
    }

    /// `[A₁a | … | A_Ra]`, one column block per sparse matrix.
    pub fn spmm_stack(&mut self, adjs: &[Arc<CsrMatrix>], a: Var) -> Result<Var> {
        self.check_adjacency("spmm_stack", adjs, a)?;
        let av = self.value(a);
        let w = av.cols();
        let mut value = Matrix::zeros(adjs[0].rows(), w * adjs.len());
        for (r, adj) in adjs.iter().enumerate() {
            adj.mul_block_into(av, 0, &mut value, r * w, w);
        }
        let ng = self.needs(a);
        Ok(self.push(Op::SpmmStack(adjs.to_vec(), a), value, ng))
    }

    /// `Σ_r A_r a_r` where `a = [a₁ | … | a_R]` splits into equal column blocks.
    pub fn spmm_blocks(&mut self, adjs: &[Arc<CsrMatrix>], a: Var) -> Result<Var> {
        self.check_adjacency("spmm_blocks", adjs, a)?;
        let av = self.value(a);
        if !av.cols().is_multiple_of(adjs.len()) {
            return Err(Error::Dimension {
                op: "spmm_blocks",
                left: (adjs.len(), adjs[0].cols()),
                right: av.shape(),
            });
        }
        let w = av.cols() / adjs.len();
        let mut value = Matrix::zeros(adjs[0].rows(), w);
        for (r, adj) in adjs.iter().enumerate() {
            adj.mul_block_into(av, r * w, &mut value, 0, w);
        }
        let ng = self.needs(a);
        Ok(self.push(Op::SpmmBlocks(adjs.to_vec(), a), value, ng))
    }

    /// Expands coefficients `a` (`1×B`) into the `(B·n)×n` block column
    /// `[a₁·I; …; a_B·I]`, so that `U · expand(a)` equals `Σ_b a_b U_b`
    /// when `U = [U₁ | … | U_B]`.
    pub fn expand_basis(&mut self, coeffs: Var, n: usize) -> Result<Var> {
        let cv = self.value(coeffs);
        if cv.rows() != 1 {
            return Err(Error::Dimension {
                op: "expand_basis",
                left: cv.shape(),
                right: (1, cv.cols()),
            });
        }
        let b = cv.cols();
        let mut value = Matrix::zeros(b * n, n);
        for k in 0..b {
            let a = cv.get(0, k);
            for j in 0..n {
                value.set(k * n + j, j, a);
            }
        }
        let ng = self.needs(coeffs);
        Ok(self.push(Op::ExpandBasis(coeffs, n), value, ng))
    }

    /// Reverse sweep from a `1×1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 seed, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, f: impl FnOnce(&mut Matrix)) {
        if !self.needs(v) {
            return;
        }
        let slot = &mut grads[v.0];
        let acc = slot.get_or_insert_with(|| {
            let (r, c) = self.nodes[v.0].value.shape();
            Matrix::zeros(r, c)
        });
        f(acc);
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                // dA = G Bᵀ, dB = Aᵀ G
                self.accumulate(grads, *a, |acc| gemm(g, false, bv, true, acc, 1.0));
                self.accumulate(grads, *b, |acc| gemm(av, true, g, false, acc, 1.0));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |acc| acc.add_scaled(g, 1.0));
                self.accumulate(grads, *b, |acc| acc.add_scaled(g, 1.0));
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, |acc| acc.add_scaled(g, 1.0));
                self.accumulate(grads, *row, |acc| {
                    let d = acc.row_mut(0);
                    for r in 0..g.rows() {
                        for (x, y) in d.iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |acc| {
                    for ((x, gg), y) in acc.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *x += gg * y;
                    }
                });
                self.accumulate(grads, *b, |acc| {
                    for ((x, gg), y) in acc.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *x += gg * y;
                    }
                });
            }
            Op::MulRow(a, row) => {
                let (av, rv) = (self.value(*a), self.value(*row));
                self.accumulate(grads, *a, |acc| {
                    for r in 0..g.rows() {
                        for ((x, gg), w) in acc.row_mut(r).iter_mut().zip(g.row(r)).zip(rv.row(0)) {
                            *x += gg * w;
                        }
                    }
                });
                self.accumulate(grads, *row, |acc| {
                    let d = acc.row_mut(0);
                    for r in 0..g.rows() {
                        for ((x, gg), h) in d.iter_mut().zip(g.row(r)).zip(av.row(r)) {
                            *x += gg * h;
                        }
                    }
                });
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, |acc| {
                    for ((x, gg), v) in acc.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        if *v > 0.0 {
                            *x += gg;
                        }
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                self.accumulate(grads, *a, |acc| {
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((x, p), q) in acc.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *x += p * (q - dot);
                        }
                    }
                });
            }
            Op::Log(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, |acc| {
                    for ((x, gg), v) in acc.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        if *v > LOG_EPS {
                            *x += gg / v;
                        }
                    }
                });
            }
            Op::Scale(a, alpha) => {
                self.accumulate(grads, *a, |acc| acc.add_scaled(g, *alpha));
            }
            Op::Sum(a) => {
                let s = g.get(0, 0);
                self.accumulate(grads, *a, |acc| {
                    for x in acc.data_mut() {
                        *x += s;
                    }
                });
            }
            Op::Dropout(a, mask) => {
                self.accumulate(grads, *a, |acc| {
                    for ((x, gg), m) in acc.data_mut().iter_mut().zip(g.data()).zip(mask.data()) {
                        *x += gg * m;
                    }
                });
            }
            Op::SpMM(adj, a) => {
                self.accumulate(grads, *a, |acc| adj.mul_transpose_dense_into(g, acc));
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    self.accumulate(grads, p, |acc| {
                        for r in 0..g.rows() {
                            for (x, y) in acc.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                                *x += y;
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).data().len();
                    self.accumulate(grads, p, |acc| {
                        for (x, y) in acc.data_mut().iter_mut().zip(&g.data()[off..off + len]) {
                            *x += y;
                        }
                    });
                    off += len;
                }
            }
            Op::SpmmStack(adjs, a) => {
                let w = g.cols() / adjs.len();
                self.accumulate(grads, *a, |acc| {
                    for (r, adj) in adjs.iter().enumerate() {
                        adj.mul_transpose_block_into(g, r * w, acc, 0, w);
                    }
                });
            }
            Op::SpmmBlocks(adjs, a) => {
                let w = g.cols();
                self.accumulate(grads, *a, |acc| {
                    for (r, adj) in adjs.iter().enumerate() {
                        adj.mul_transpose_block_into(g, 0, acc, r * w, w);
                    }
                });
            }
            Op::ExpandBasis(coeffs, n) => {
                let n = *n;
                self.accumulate(grads, *coeffs, |acc| {
                    let d = acc.row_mut(0);
                    for (k, x) in d.iter_mut().enumerate() {
                        for j in 0..n {
                            *x += g.get(k * n + j, j);
                        }
                    }
                });
            }
        }
    }
}

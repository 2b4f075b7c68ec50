use std::collections::BTreeMap;

use crate::error::{AutodiffError, Result};
use crate::float::Float;
use crate::kernels::{add_into, matmul_acc, matmul_at_acc, matmul_bt_acc};
use crate::tensor::Tensor;

/// Handle to a node of one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// tanh approximation of GELU
    Gelu,
    Tanh,
    Sigmoid,
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    AddRow(NodeId, NodeId),
    Act(NodeId, Activation),
    MaskedSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    GatherRows {
        table: NodeId,
        ids: Vec<usize>,
    },
    ConcatRows(Vec<NodeId>),
    SliceRows {
        x: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    MeanRows(NodeId),
    SumAll(NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        probs: Vec<T>,
    },
    Reshape(NodeId),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A computation graph recorded during the forward pass.
///
/// Nodes are appended in evaluation order, so the node list is itself a
/// topological order: every input precedes the nodes that consume it.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: BTreeMap<NodeId, Tensor<T>>,
    generation: usize,
    visited: usize,
}

impl<T: Float> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor<T>)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    /// Number of nodes whose gradient was propagated.
    pub fn visited(&self) -> usize {
        self.visited
    }

    /// Node count of the graph at the time of the backward pass.
    pub fn generation(&self) -> usize {
        self.generation
    }
}

impl<T: Float> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node<T>> {
        self.nodes.get(id.0).ok_or(AutodiffError::UnknownNode {
            node: id.0,
            len: self.nodes.len(),
        })
    }

    fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.node(a)?.value.dims2("matmul")?;
        let (k2, n) = self.node(b)?.value.dims2("matmul")?;
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` for `a: [m,k]`, `b: [n,k]`.
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.node(a)?.value.dims2("matmul_bt")?;
        let (n, k2) = self.node(b)?.value.dims2("matmul_bt")?;
        if k != k2 {
            return Err(self.mismatch("matmul_bt", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        matmul_bt_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulBt(a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let shape = self.value(a).shape().to_vec();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b), rg))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let shape = self.value(a).shape().to_vec();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> Result<NodeId> {
        let src = &self.node(a)?.value;
        let data = src.data().iter().map(|&x| x * factor).collect();
        let shape = src.shape().to_vec();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Scale(a, factor), rg))
    }

    /// Adds a bias vector of length `cols` to every row of `a: [rows, cols]`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.node(a)?.value.dims2("add_row")?;
        if self.node(bias)?.value.len() != n {
            return Err(self.mismatch("add_row", a, bias));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n) {
            add_into(row, b);
        }
        let rg = self.any_grad(&[a, bias]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddRow(a, bias), rg))
    }

    pub fn activation(&mut self, a: NodeId, act: Activation) -> Result<NodeId> {
        let src = &self.node(a)?.value;
        let data = src.data().iter().map(|&x| act_forward(act, x)).collect();
        let shape = src.shape().to_vec();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Act(a, act), rg))
    }

    /// Row-wise softmax of `logits + mask`.
    ///
    /// `mask` is an additive matrix of the same shape whose entries are `0`
    /// (visible) or [`Float::MASK_SENTINEL`] (blocked). Blocked entries come
    /// out as exactly zero. `None` means every entry is visible.
    pub fn masked_softmax(&mut self, logits: NodeId, mask: Option<&Tensor<T>>) -> Result<NodeId> {
        let (m, n) = self.node(logits)?.value.dims2("masked_softmax")?;
        if let Some(mask) = mask {
            if mask.shape() != [m, n] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "masked_softmax",
                    lhs: vec![m, n],
                    rhs: mask.shape().to_vec(),
                });
            }
            for r in 0..m {
                if mask.row(r).iter().all(|v| v.is_blocked()) {
                    return Err(AutodiffError::FullyMaskedRow { row: r });
                }
            }
        }
        let x = self.value(logits).data();
        let mut out = vec![T::zero(); m * n];
        for r in 0..m {
            let row = &mut out[r * n..(r + 1) * n];
            for (c, o) in row.iter_mut().enumerate() {
                let add = mask.map_or(T::zero(), |mk| mk.data()[r * n + c]);
                *o = x[r * n + c] + add;
            }
            softmax_in_place(row);
        }
        let rg = self.any_grad(&[logits]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MaskedSoftmax(logits), rg))
    }

    /// Per-row layer normalization with affine parameters of length `cols`.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let (m, n) = self.node(x)?.value.dims2("layer_norm")?;
        if self.node(gamma)?.value.len() != n {
            return Err(self.mismatch("layer_norm", x, gamma));
        }
        if self.node(beta)?.value.len() != n {
            return Err(self.mismatch("layer_norm", x, beta));
        }
        let eps = T::from_f64(LN_EPS);
        let nf = T::from_usize(n);
        let xs = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut out = vec![T::zero(); m * n];
        let mut xhat = vec![T::zero(); m * n];
        let mut rstd = vec![T::zero(); m];
        for r in 0..m {
            let row = &xs[r * n..(r + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for c in 0..n {
                let h = (row[c] - mean) * rs;
                xhat[r * n + c] = h;
                out[r * n + c] = h * g[c] + b[c];
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            rstd,
        };
        Ok(self.push(Tensor::new(vec![m, n], out)?, op, rg))
    }

    /// Embedding lookup: row `ids[i]` of `table` becomes row `i` of the output.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (v, d) = self.node(table)?.value.dims2("gather_rows")?;
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "gather_rows",
                    index: id,
                    extent: v,
                });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let rg = self.any_grad(&[table]);
        let op = Op::GatherRows {
            table,
            ids: ids.to_vec(),
        };
        Ok(self.push(Tensor::new(vec![ids.len(), d], out)?, op, rg))
    }

    /// Stacks rank-2 tensors of equal width along the row axis.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(AutodiffError::Rank {
            op: "concat_rows",
            expected: 2,
            shape: vec![],
        })?;
        let (_, n) = self.node(first)?.value.dims2("concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.node(p)?.value.dims2("concat_rows")?;
            if c != n {
                return Err(self.mismatch("concat_rows", first, p));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.any_grad(parts);
        Ok(self.push(
            Tensor::new(vec![rows, n], out)?,
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (m, n) = self.node(x)?.value.dims2("slice_rows")?;
        if start + len > m {
            return Err(AutodiffError::IndexOutOfRange {
                op: "slice_rows",
                index: start + len,
                extent: m,
            });
        }
        let out = self.value(x).data()[start * n..(start + len) * n].to_vec();
        let rg = self.any_grad(&[x]);
        Ok(self.push(
            Tensor::new(vec![len, n], out)?,
            Op::SliceRows { x, start },
            rg,
        ))
    }

    /// Joins rank-2 tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(AutodiffError::Rank {
            op: "concat_cols",
            expected: 2,
            shape: vec![],
        })?;
        let (m, _) = self.node(first)?.value.dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.node(p)?.value.dims2("concat_cols")?;
            if r != m {
                return Err(self.mismatch("concat_cols", first, p));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = self.any_grad(parts);
        Ok(self.push(
            Tensor::new(vec![m, total], out)?,
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (m, n) = self.node(x)?.value.dims2("slice_cols")?;
        if start + len > n {
            return Err(AutodiffError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                extent: n,
            });
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(m * len);
        for r in 0..m {
            out.extend_from_slice(&src[r * n + start..r * n + start + len]);
        }
        let rg = self.any_grad(&[x]);
        Ok(self.push(
            Tensor::new(vec![m, len], out)?,
            Op::SliceCols { x, start },
            rg,
        ))
    }

    /// Mean over rows: `[m, n] -> [1, n]`.
    pub fn mean_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let (m, n) = self.node(x)?.value.dims2("mean_rows")?;
        if m == 0 {
            return Err(AutodiffError::Rank {
                op: "mean_rows",
                expected: 2,
                shape: vec![m, n],
            });
        }
        let src = self.value(x).data();
        let mut out = vec![T::zero(); n];
        for row in src.chunks(n) {
            add_into(&mut out, row);
        }
        let inv = T::one() / T::from_usize(m);
        out.iter_mut().for_each(|v| *v *= inv);
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor::new(vec![1, n], out)?, Op::MeanRows(x), rg))
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.node(x)?.value.data().iter().copied().sum::<T>();
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::SumAll(x), rg))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits: [steps, vocab]`. `None` targets (padding) are skipped.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[Option<usize>]) -> Result<NodeId> {
        let (s, v) = self.node(logits)?.value.dims2("cross_entropy")?;
        if targets.len() != s {
            return Err(AutodiffError::ShapeMismatch {
                op: "cross_entropy",
                lhs: vec![s, v],
                rhs: vec![targets.len()],
            });
        }
        let count = targets.iter().filter(|t| t.is_some()).count();
        if count == 0 {
            return Err(AutodiffError::EmptyTargets);
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = T::zero();
        for (r, target) in targets.iter().enumerate() {
            let row = &mut probs[r * v..(r + 1) * v];
            let lse = log_sum_exp(row);
            let logit_t = match target {
                Some(t) if *t >= v => {
                    return Err(AutodiffError::IndexOutOfRange {
                        op: "cross_entropy",
                        index: *t,
                        extent: v,
                    })
                }
                Some(t) => Some(row[*t]),
                None => None,
            };
            for p in row.iter_mut() {
                *p = (*p - lse).exp();
            }
            if let Some(lt) = logit_t {
                loss += lse - lt;
            }
        }
        loss /= T::from_usize(count);
        let rg = self.any_grad(&[logits]);
        let op = Op::CrossEntropy {
            logits,
            targets: targets.to_vec(),
            probs,
        };
        Ok(self.push(Tensor::scalar(loss), op, rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let value = self.node(x)?.value.clone().reshaped(shape)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Reverse-mode sweep from a scalar `output`.
    ///
    /// Returns gradients for every leaf created with `requires_grad` that the
    /// output depends on. Intermediate gradients are dropped as soon as they
    /// have been propagated.
    pub fn backward(&self, output: NodeId) -> Result<Gradients<T>> {
        let out = self.node(output)?;
        if out.value.len() != 1 {
            return Err(AutodiffError::NonScalarOutput {
                shape: out.value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; output.0 + 1];
        let mut leaves = BTreeMap::new();
        let mut visited = 0;
        if out.requires_grad {
            grads[output.0] = Some(vec![T::one()]);
        }
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            visited += 1;
            let node = &self.nodes[i];
            if let Op::Leaf = node.op {
                leaves.insert(NodeId(i), Tensor::new(node.value.shape().to_vec(), g)?);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(Gradients {
            grads: leaves,
            generation: self.nodes.len(),
            visited,
        })
    }

    /// Gradient of `id` from a backward pass over this graph, failing if
    /// nodes were appended after that pass.
    pub fn gradient<'g>(
        &self,
        grads: &'g Gradients<T>,
        id: NodeId,
    ) -> Result<Option<&'g Tensor<T>>> {
        if grads.generation != self.nodes.len() {
            return Err(AutodiffError::GraphMutated {
                recorded: grads.generation,
                current: self.nodes.len(),
            });
        }
        Ok(grads.get(id))
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims(&self.nodes[a.0].value);
                let n = node.value.shape()[1];
                if let Some(da) = self.slot(grads, *a) {
                    matmul_bt_acc(g, self.value(*b).data(), da, m, n, k);
                }
                if let Some(db) = self.slot(grads, *b) {
                    matmul_at_acc(self.value(*a).data(), g, db, m, k, n);
                }
            }
            Op::MatMulBt(a, b) => {
                let (m, k) = dims(&self.nodes[a.0].value);
                let n = node.value.shape()[1];
                if let Some(da) = self.slot(grads, *a) {
                    matmul_acc(g, self.value(*b).data(), da, m, n, k);
                }
                if let Some(db) = self.slot(grads, *b) {
                    matmul_at_acc(g, self.value(*a).data(), db, m, n, k);
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = self.slot(grads, *a) {
                    add_into(da, g);
                }
                if let Some(db) = self.slot(grads, *b) {
                    add_into(db, g);
                }
            }
            Op::Mul(a, b) => {
                if let Some(da) = self.slot(grads, *a) {
                    for ((d, &gv), &bv) in da.iter_mut().zip(g).zip(self.value(*b).data()) {
                        *d += gv * bv;
                    }
                }
                if let Some(db) = self.slot(grads, *b) {
                    for ((d, &gv), &av) in db.iter_mut().zip(g).zip(self.value(*a).data()) {
                        *d += gv * av;
                    }
                }
            }
            Op::Scale(a, f) => {
                if let Some(da) = self.slot(grads, *a) {
                    for (d, &gv) in da.iter_mut().zip(g) {
                        *d += gv * *f;
                    }
                }
            }
            Op::AddRow(a, bias) => {
                let n = node.value.shape()[1];
                if let Some(da) = self.slot(grads, *a) {
                    add_into(da, g);
                }
                if let Some(db) = self.slot(grads, *bias) {
                    for row in g.chunks(n) {
                        add_into(db, row);
                    }
                }
            }
            Op::Act(a, act) => {
                if let Some(da) = self.slot(grads, *a) {
                    let x = self.value(*a).data();
                    let y = node.value.data();
                    for (((d, &gv), &xv), &yv) in da.iter_mut().zip(g).zip(x).zip(y) {
                        *d += gv * act_derivative(*act, xv, yv);
                    }
                }
            }
            Op::MaskedSoftmax(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    let n = node.value.shape()[1];
                    let p = node.value.data();
                    for ((drow, grow), prow) in da.chunks_mut(n).zip(g.chunks(n)).zip(p.chunks(n)) {
                        let s: T = grow.iter().zip(prow).map(|(&gv, &pv)| gv * pv).sum();
                        for ((d, &gv), &pv) in drow.iter_mut().zip(grow).zip(prow) {
                            *d += pv * (gv - s);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let n = node.value.shape()[1];
                let gam = self.value(*gamma).data();
                if let Some(dg) = self.slot(grads, *gamma) {
                    for (grow, hrow) in g.chunks(n).zip(xhat.chunks(n)) {
                        for ((d, &gv), &hv) in dg.iter_mut().zip(grow).zip(hrow) {
                            *d += gv * hv;
                        }
                    }
                }
                if let Some(db) = self.slot(grads, *beta) {
                    for grow in g.chunks(n) {
                        add_into(db, grow);
                    }
                }
                if let Some(dx) = self.slot(grads, *x) {
                    let nf = T::from_usize(n);
                    for (r, ((dxrow, grow), hrow)) in dx
                        .chunks_mut(n)
                        .zip(g.chunks(n))
                        .zip(xhat.chunks(n))
                        .enumerate()
                    {
                        let mut mean_dh = T::zero();
                        let mut mean_dh_h = T::zero();
                        for c in 0..n {
                            let dh = grow[c] * gam[c];
                            mean_dh += dh;
                            mean_dh_h += dh * hrow[c];
                        }
                        mean_dh /= nf;
                        mean_dh_h /= nf;
                        for c in 0..n {
                            let dh = grow[c] * gam[c];
                            dxrow[c] += rstd[r] * (dh - mean_dh - hrow[c] * mean_dh_h);
                        }
                    }
                }
            }
            Op::GatherRows { table, ids } => {
                if let Some(dt) = self.slot(grads, *table) {
                    let d = node.value.shape()[1];
                    for (grow, &id) in g.chunks(d).zip(ids) {
                        add_into(&mut dt[id * d..(id + 1) * d], grow);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    if let Some(dp) = self.slot(grads, *p) {
                        add_into(dp, &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::SliceRows { x, start } => {
                if let Some(dx) = self.slot(grads, *x) {
                    let n = node.value.shape()[1];
                    add_into(&mut dx[start * n..start * n + g.len()], g);
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.shape()[1];
                let mut col = 0;
                for p in parts {
                    let (m, w) = dims(self.value(*p));
                    if let Some(dp) = self.slot(grads, *p) {
                        for r in 0..m {
                            add_into(
                                &mut dp[r * w..(r + 1) * w],
                                &g[r * total + col..r * total + col + w],
                            );
                        }
                    }
                    col += w;
                }
            }
            Op::SliceCols { x, start } => {
                if let Some(dx) = self.slot(grads, *x) {
                    let (m, n) = dims(self.value(*x));
                    let w = node.value.shape()[1];
                    for r in 0..m {
                        add_into(
                            &mut dx[r * n + start..r * n + start + w],
                            &g[r * w..(r + 1) * w],
                        );
                    }
                }
            }
            Op::MeanRows(x) => {
                if let Some(dx) = self.slot(grads, *x) {
                    let (m, n) = dims(self.value(*x));
                    let inv = T::one() / T::from_usize(m);
                    for row in dx.chunks_mut(n) {
                        for (d, &gv) in row.iter_mut().zip(g) {
                            *d += gv * inv;
                        }
                    }
                }
            }
            Op::SumAll(x) => {
                if let Some(dx) = self.slot(grads, *x) {
                    let gv = g[0];
                    dx.iter_mut().for_each(|d| *d += gv);
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                if let Some(dl) = self.slot(grads, *logits) {
                    let v = self.value(*logits).shape()[1];
                    let count = targets.iter().filter(|t| t.is_some()).count();
                    let scale = g[0] / T::from_usize(count);
                    for (r, target) in targets.iter().enumerate() {
                        let Some(t) = target else { continue };
                        let drow = &mut dl[r * v..(r + 1) * v];
                        for (d, &p) in drow.iter_mut().zip(&probs[r * v..(r + 1) * v]) {
                            *d += scale * p;
                        }
                        drow[*t] -= scale;
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(dx) = self.slot(grads, *x) {
                    add_into(dx, g);
                }
            }
        }
    }

    /// Gradient accumulator for `id`, or `None` when `id` needs no gradient.
    fn slot<'a>(&self, grads: &'a mut [Option<Vec<T>>], id: NodeId) -> Option<&'a mut [T]> {
        let node = &self.nodes[id.0];
        if !node.requires_grad {
            return None;
        }
        let len = node.value.len();
        Some(
            grads[id.0]
                .get_or_insert_with(|| vec![T::zero(); len])
                .as_mut_slice(),
        )
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.node(a)?.value.shape() != self.node(b)?.value.shape() {
            return Err(self.mismatch(op, a, b));
        }
        Ok(())
    }

    fn mismatch(&self, op: &'static str, a: NodeId, b: NodeId) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op,
            lhs: self.nodes[a.0].value.shape().to_vec(),
            rhs: self.nodes[b.0].value.shape().to_vec(),
        }
    }
}

fn dims<T: Float>(t: &Tensor<T>) -> (usize, usize) {
    let s = t.shape();
    (s[0], s[1])
}

fn zip_map<T: Float>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn softmax_in_place<T: Float>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = T::one() / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

fn log_sum_exp<T: Float>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn act_forward<T: Float>(act: Activation, x: T) -> T {
    match act {
        Activation::Relu => x.max(T::zero()),
        Activation::Gelu => {
            let c = T::from_f64(GELU_C);
            let a = T::from_f64(GELU_A);
            let half = T::from_f64(0.5);
            half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
        }
        Activation::Tanh => x.tanh(),
        Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
    }
}

fn act_derivative<T: Float>(act: Activation, x: T, y: T) -> T {
    match act {
        Activation::Relu => {
            if x > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Gelu => {
            let c = T::from_f64(GELU_C);
            let a = T::from_f64(GELU_A);
            let half = T::from_f64(0.5);
            let three = T::from_f64(3.0);
            let u = c * (x + a * x * x * x);
            let t = u.tanh();
            let du = c * (T::one() + three * a * x * x);
            half * (T::one() + t) + half * x * (T::one() - t * t) * du
        }
        Activation::Tanh => T::one() - y * y,
        Activation::Sigmoid => y * (T::one() - y),
    }
}

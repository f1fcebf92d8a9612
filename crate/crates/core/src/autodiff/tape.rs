//! Reverse-mode differentiation tape.
//!
//! Every operation appends a node holding its forward value and enough saved
//! state to run its backward rule. Nodes are only ever appended, so the tape
//! is topologically ordered by construction and the backward sweep is a
//! single reverse walk.

use std::sync::Arc;

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_raw, transpose_raw, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Constant,
    Variable,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Binary(Elementwise, Var, Var),
    Scale(Var, f64),
    Relu(Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    ConcatCols(Vec<Var>),
    ColMean(Var),
    BroadcastRows(Var),
    Rsqrt(Var),
    Dropout(Var, Vec<f64>),
    L1(Var, Var),
    GatherRows(Var, Arc<[u32]>),
    ScatterAddRows(Var, Arc<[u32]>),
    RowDot(Var, Var),
    MulRows(Var, Var),
    MinMax {
        x: Var,
        argmin: usize,
        argmax: usize,
        range: f64,
    },
    UpperTri(Var),
    Devectorize(Var),
    GatherFlat(Var, Arc<[u32]>),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Leaf whose gradient can be read back with [`Tape::grad`].
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Variable, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let value = store.get(id).tensor.clone();
        self.push(value, Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (p, q) = self.value(a).dims2("matmul")?;
        let (q2, r) = self.value(b).dims2("matmul")?;
        if q != q2 {
            return Err(Error::shape("matmul", self.shape(a), self.shape(b)));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), p, q, r);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(p, r, data)?, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (p, q) = self.value(a).dims2("transpose")?;
        let data = transpose_raw(self.value(a).data(), p, q);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(q, p, data)?, Op::Transpose(a), rg))
    }

    pub fn elementwise(&mut self, a: Var, b: Var, op: Elementwise) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("elementwise", self.shape(a), self.shape(b)));
        }
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let data: Vec<f64> = match op {
            Elementwise::Add => x.iter().zip(y).map(|(p, q)| p + q).collect(),
            Elementwise::Sub => x.iter().zip(y).map(|(p, q)| p - q).collect(),
            Elementwise::Mul => x.iter().zip(y).map(|(p, q)| p * q).collect(),
        };
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, Elementwise::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, Elementwise::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, Elementwise::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        let value = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * c).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let value = Tensor::new(
            x.shape().to_vec(),
            x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        )
        .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    /// Softmax within contiguous segments of a flat logit vector.
    ///
    /// Segment `k` spans `offsets[k]..offsets[k + 1]`; the last offset must
    /// equal the logit count.
    pub fn segment_softmax(&mut self, logits: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let x = self.value(logits);
        let len = x.len();
        if offsets.first() != Some(&0) || offsets.last() != Some(&len) {
            return Err(Error::Domain(format!(
                "segment offsets must span 0..{len}, got {:?}..{:?}",
                offsets.first(),
                offsets.last()
            )));
        }
        let mut out = vec![0.0; len];
        for (k, w) in offsets.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                return Err(Error::Domain(format!("segment {k} is empty")));
            }
            let seg = &x.data()[lo..hi];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (o, &v) in out[lo..hi].iter_mut().zip(seg) {
                *o = (v - max).exp();
                total += *o;
            }
            out[lo..hi].iter_mut().for_each(|o| *o /= total);
        }
        let value = Tensor::new(x.shape().to_vec(), out)?;
        let rg = self.rg(&[logits]);
        Ok(self.push(value, Op::SegmentSoftmax(logits, offsets), rg))
    }

    /// Column-wise concatenation of matrices sharing a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Domain("concat of zero parts".into()))?;
        let (n, _) = self.value(first).dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (rows, cols) = self.value(p).dims2("concat_cols")?;
            if rows != n {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(cols);
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; n * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for i in 0..n {
                data[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::matrix(n, total, data)?, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Mean over rows: `n x d -> 1 x d`.
    pub fn col_mean(&mut self, a: Var) -> Result<Var> {
        let (n, d) = self.value(a).dims2("col_mean")?;
        if n == 0 {
            return Err(Error::Domain("mean over zero rows".into()));
        }
        let x = self.value(a).data();
        let mut out = vec![0.0; d];
        for row in x.chunks(d) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(1, d, out)?, Op::ColMean(a), rg))
    }

    /// Repeats a `1 x d` row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (one, d) = self.value(a).dims2("broadcast_rows")?;
        if one != 1 {
            return Err(Error::shape("broadcast_rows", self.shape(a), &[1, d]));
        }
        let row = self.value(a).data();
        let data: Vec<f64> = (0..n).flat_map(|_| row.iter().copied()).collect();
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(n, d, data)?, Op::BroadcastRows(a), rg))
    }

    /// Elementwise `1 / sqrt(x)`; callers add any epsilon beforehand.
    pub fn rsqrt(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let value = Tensor::new(
            x.shape().to_vec(),
            x.data().iter().map(|v| 1.0 / v.sqrt()).collect(),
        )
        .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(value, Op::Rsqrt(a), rg)
    }

    /// Adds a constant to every entry.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let shape = self.shape(a).to_vec();
        let k = self.constant(Tensor::filled(&shape, c));
        self.add(a, k).expect("same shape")
    }

    /// Inverted dropout. Identity when `training` is false or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("dropout probability {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let x = self.value(a);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Dropout(a, mask), rg))
    }

    /// Mean absolute error, returned as a rank-0 scalar.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::shape("l1_loss", self.shape(pred), self.shape(target)));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let count = p.len().max(1) as f64;
        let loss = p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / count;
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Tensor::scalar(loss), Op::L1(pred, target), rg))
    }

    /// Selects rows `idx[e]` of an `n x d` matrix into an `E x d` matrix.
    pub fn gather_rows(&mut self, a: Var, idx: Arc<[u32]>) -> Result<Var> {
        let (n, d) = self.value(a).dims2("gather_rows")?;
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx.iter() {
            let i = i as usize;
            if i >= n {
                return Err(Error::Validation(format!("row index {i} out of range for {n} rows")));
            }
            data.extend_from_slice(&x[i * d..(i + 1) * d]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(idx.len(), d, data)?, Op::GatherRows(a, idx), rg))
    }

    /// Sums rows of an `E x d` matrix into `n` buckets given by `idx`.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Arc<[u32]>, n: usize) -> Result<Var> {
        let (e, d) = self.value(a).dims2("scatter_add_rows")?;
        if e != idx.len() {
            return Err(Error::shape("scatter_add_rows", self.shape(a), &[idx.len(), d]));
        }
        let x = self.value(a).data();
        let mut data = vec![0.0; n * d];
        for (row, &i) in x.chunks(d.max(1)).zip(idx.iter()) {
            let i = i as usize;
            if i >= n {
                return Err(Error::Validation(format!("row index {i} out of range for {n} rows")));
            }
            data[i * d..(i + 1) * d]
                .iter_mut()
                .zip(row)
                .for_each(|(o, v)| *o += v);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(n, d, data)?, Op::ScatterAddRows(a, idx), rg))
    }

    /// Row-wise inner product: `E x d, E x d -> E x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("row_dot", self.shape(a), self.shape(b)));
        }
        let (e, d) = self.value(a).dims2("row_dot")?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let data = (0..e)
            .map(|r| {
                x[r * d..(r + 1) * d]
                    .iter()
                    .zip(&y[r * d..(r + 1) * d])
                    .map(|(p, q)| p * q)
                    .sum()
            })
            .collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(e, 1, data)?, Op::RowDot(a, b), rg))
    }

    /// Scales row `e` of an `E x d` matrix by `s[e]` (`s` is `E x 1`).
    pub fn mul_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (e, d) = self.value(a).dims2("mul_rows")?;
        if self.shape(s) != [e, 1] {
            return Err(Error::shape("mul_rows", self.shape(a), self.shape(s)));
        }
        let (x, w) = (self.value(a).data(), self.value(s).data());
        let mut data = x.to_vec();
        for (row, &f) in data.chunks_mut(d.max(1)).zip(w) {
            row.iter_mut().for_each(|v| *v *= f);
        }
        let rg = self.rg(&[a, s]);
        Ok(self.push(Tensor::matrix(e, d, data)?, Op::MulRows(a, s), rg))
    }

    /// Affine rescale of all entries onto `[0, 1]`; a constant input maps to zeros.
    pub fn minmax_scale(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::Domain("min-max of empty tensor".into()));
        }
        let (mut argmin, mut argmax) = (0, 0);
        for (i, &v) in x.data().iter().enumerate() {
            if v < x.data()[argmin] {
                argmin = i;
            }
            if v > x.data()[argmax] {
                argmax = i;
            }
        }
        let (lo, hi) = (x.data()[argmin], x.data()[argmax]);
        let range = hi - lo;
        let data = if range > 0.0 {
            x.data().iter().map(|v| (v - lo) / range).collect()
        } else {
            vec![0.0; x.len()]
        };
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(
            value,
            Op::MinMax {
                x: a,
                argmin,
                argmax,
                range,
            },
            rg,
        ))
    }

    /// Strict upper triangle of an `n x n` matrix, row-major, as an `m x 1` column.
    pub fn upper_tri(&mut self, a: Var) -> Result<Var> {
        let (n, c) = self.value(a).dims2("upper_tri")?;
        if n != c {
            return Err(Error::shape("upper_tri", self.shape(a), &[n, n]));
        }
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            data.extend_from_slice(&x[i * n + i + 1..(i + 1) * n]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::column(data), Op::UpperTri(a), rg))
    }

    /// Inverse of [`Tape::upper_tri`]: symmetric `n x n` matrix with zero diagonal.
    pub fn devectorize(&mut self, v: Var, n: usize) -> Result<Var> {
        let m = n * n.saturating_sub(1) / 2;
        let x = self.value(v);
        if x.len() != m {
            return Err(Error::shape("devectorize", x.shape(), &[m, 1]));
        }
        let data = crate::graph::devectorize_raw(x.data(), n);
        let rg = self.rg(&[v]);
        Ok(self.push(Tensor::matrix(n, n, data)?, Op::Devectorize(v), rg))
    }

    /// Flat-index gather into an `E x 1` column.
    pub fn gather_flat(&mut self, a: Var, idx: Arc<[u32]>) -> Result<Var> {
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len());
        for &i in idx.iter() {
            let v = *x.get(i as usize).ok_or_else(|| {
                Error::Validation(format!("flat index {i} out of range for {}", x.len()))
            })?;
            data.push(v);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::column(data), Op::GatherFlat(a, idx), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    /// Per-feature mean and population variance over the row axis.
    pub fn feature_mean_var(&mut self, x: Var) -> Result<(Var, Var)> {
        let (n, _) = self.value(x).dims2("feature_mean_var")?;
        let mean = self.col_mean(x)?;
        let mean_b = self.broadcast_rows(mean, n)?;
        let centered = self.sub(x, mean_b)?;
        let sq = self.mul(centered, centered)?;
        let var = self.col_mean(sq)?;
        Ok((mean, var))
    }

    fn adjoints(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Domain(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            self.backward_node(node, &g, &mut adj);
            adj[id] = Some(g);
        }
        Ok(adj)
    }

    /// Accumulates `d loss / d param` into every parameter reached from `loss`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let adj = self.adjoints(loss)?;
        for (node, g) in self.nodes.iter().zip(&adj) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                let grad = &mut store.get_mut(*id).grad;
                if grad.len() != g.len() {
                    return Err(Error::shape("backward", grad.shape(), node.value.shape()));
                }
                grad.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
        Ok(())
    }

    /// Gradients of `loss` with respect to arbitrary nodes (zeros if unreached).
    pub fn grad(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let adj = self.adjoints(loss)?;
        Ok(wrt
            .iter()
            .map(|v| {
                let shape = self.shape(*v).to_vec();
                match adj.get(v.0).and_then(Option::as_ref) {
                    Some(g) => Tensor::new(shape, g.clone()).expect("adjoint shape"),
                    None => Tensor::zeros(&shape),
                }
            })
            .collect())
    }

    fn acc(&self, adj: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut adj[v.0] {
            Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(g.to_vec()),
        }
    }

    fn backward_node(&self, node: &Node, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Constant | Op::Variable | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (p, q) = dims(&self.nodes[a.0].value);
                let r = dims(&self.nodes[b.0].value).1;
                if rg(*a) {
                    // g (p x r) * b^T (r x q)
                    let bt = transpose_raw(val(*b), q, r);
                    self.acc(adj, *a, &matmul_raw(g, &bt, p, r, q));
                }
                if rg(*b) {
                    let at = transpose_raw(val(*a), p, q);
                    self.acc(adj, *b, &matmul_raw(&at, g, q, p, r));
                }
            }
            Op::Transpose(a) => {
                let (p, q) = dims(&self.nodes[a.0].value);
                // g is q x p
                self.acc(adj, *a, &transpose_raw(g, q, p));
            }
            Op::Binary(kind, a, b) => match kind {
                Elementwise::Add => {
                    self.acc(adj, *a, g);
                    self.acc(adj, *b, g);
                }
                Elementwise::Sub => {
                    self.acc(adj, *a, g);
                    if rg(*b) {
                        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                        self.acc(adj, *b, &neg);
                    }
                }
                Elementwise::Mul => {
                    if rg(*a) {
                        let ga: Vec<f64> = g.iter().zip(val(*b)).map(|(x, y)| x * y).collect();
                        self.acc(adj, *a, &ga);
                    }
                    if rg(*b) {
                        let gb: Vec<f64> = g.iter().zip(val(*a)).map(|(x, y)| x * y).collect();
                        self.acc(adj, *b, &gb);
                    }
                }
            },
            Op::Scale(a, c) => {
                let ga: Vec<f64> = g.iter().map(|v| v * c).collect();
                self.acc(adj, *a, &ga);
            }
            Op::Relu(a) => {
                let ga: Vec<f64> = g
                    .iter()
                    .zip(val(*a))
                    .map(|(gv, &x)| if x > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.acc(adj, *a, &ga);
            }
            Op::SegmentSoftmax(a, offsets) => {
                let y = node.value.data();
                let mut ga = vec![0.0; y.len()];
                for w in offsets.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let dot: f64 = (lo..hi).map(|k| g[k] * y[k]).sum();
                    for k in lo..hi {
                        ga[k] = y[k] * (g[k] - dot);
                    }
                }
                self.acc(adj, *a, &ga);
            }
            Op::ConcatCols(parts) => {
                let (n, total) = dims(&node.value);
                let mut offset = 0;
                for p in parts {
                    let w = dims(&self.nodes[p.0].value).1;
                    if rg(*p) {
                        let mut gp = vec![0.0; n * w];
                        for i in 0..n {
                            gp[i * w..(i + 1) * w]
                                .copy_from_slice(&g[i * total + offset..i * total + offset + w]);
                        }
                        self.acc(adj, *p, &gp);
                    }
                    offset += w;
                }
            }
            Op::ColMean(a) => {
                let (n, d) = dims(&self.nodes[a.0].value);
                let inv = 1.0 / n as f64;
                let ga: Vec<f64> = (0..n * d).map(|k| g[k % d] * inv).collect();
                self.acc(adj, *a, &ga);
            }
            Op::BroadcastRows(a) => {
                let d = dims(&node.value).1;
                let mut ga = vec![0.0; d];
                for row in g.chunks(d.max(1)) {
                    ga.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                }
                self.acc(adj, *a, &ga);
            }
            Op::Rsqrt(a) => {
                let y = node.value.data();
                let ga: Vec<f64> = g
                    .iter()
                    .zip(y)
                    .map(|(gv, yv)| -0.5 * gv * yv * yv * yv)
                    .collect();
                self.acc(adj, *a, &ga);
            }
            Op::Dropout(a, mask) => {
                let ga: Vec<f64> = g.iter().zip(mask).map(|(x, m)| x * m).collect();
                self.acc(adj, *a, &ga);
            }
            Op::L1(p, t) => {
                let (pv, tv) = (val(*p), val(*t));
                let count = pv.len().max(1) as f64;
                let sign: Vec<f64> = pv
                    .iter()
                    .zip(tv)
                    .map(|(a, b)| {
                        let d = a - b;
                        let s = if d > 0.0 {
                            1.0
                        } else if d < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        g[0] * s / count
                    })
                    .collect();
                if rg(*p) {
                    self.acc(adj, *p, &sign);
                }
                if rg(*t) {
                    let neg: Vec<f64> = sign.iter().map(|v| -v).collect();
                    self.acc(adj, *t, &neg);
                }
            }
            Op::GatherRows(a, idx) => {
                let (n, d) = dims(&self.nodes[a.0].value);
                let mut ga = vec![0.0; n * d];
                for (row, &i) in g.chunks(d.max(1)).zip(idx.iter()) {
                    let i = i as usize;
                    ga[i * d..(i + 1) * d]
                        .iter_mut()
                        .zip(row)
                        .for_each(|(o, v)| *o += v);
                }
                self.acc(adj, *a, &ga);
            }
            Op::ScatterAddRows(a, idx) => {
                let d = dims(&node.value).1;
                let mut ga = Vec::with_capacity(idx.len() * d);
                for &i in idx.iter() {
                    let i = i as usize;
                    ga.extend_from_slice(&g[i * d..(i + 1) * d]);
                }
                self.acc(adj, *a, &ga);
            }
            Op::RowDot(a, b) => {
                let d = dims(&self.nodes[a.0].value).1;
                let (x, y) = (val(*a), val(*b));
                if rg(*a) {
                    let ga: Vec<f64> = (0..x.len()).map(|k| g[k / d] * y[k]).collect();
                    self.acc(adj, *a, &ga);
                }
                if rg(*b) {
                    let gb: Vec<f64> = (0..x.len()).map(|k| g[k / d] * x[k]).collect();
                    self.acc(adj, *b, &gb);
                }
            }
            Op::MulRows(a, s) => {
                let (e, d) = dims(&self.nodes[a.0].value);
                let (x, w) = (val(*a), val(*s));
                if rg(*a) {
                    let ga: Vec<f64> = (0..e * d).map(|k| g[k] * w[k / d]).collect();
                    self.acc(adj, *a, &ga);
                }
                if rg(*s) {
                    let gs: Vec<f64> = (0..e)
                        .map(|r| (0..d).map(|c| g[r * d + c] * x[r * d + c]).sum())
                        .collect();
                    self.acc(adj, *s, &gs);
                }
            }
            Op::MinMax {
                x,
                argmin,
                argmax,
                range,
            } => {
                if *range <= 0.0 {
                    return;
                }
                let y = node.value.data();
                let mut gx: Vec<f64> = g.iter().map(|v| v / range).collect();
                let g_lo: f64 = g.iter().zip(y).map(|(gv, yv)| gv * (yv - 1.0)).sum::<f64>() / range;
                let g_hi: f64 = -g.iter().zip(y).map(|(gv, yv)| gv * yv).sum::<f64>() / range;
                gx[*argmin] += g_lo;
                gx[*argmax] += g_hi;
                self.acc(adj, *x, &gx);
            }
            Op::UpperTri(a) => {
                let n = dims(&self.nodes[a.0].value).0;
                let mut ga = vec![0.0; n * n];
                let mut r = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        ga[i * n + j] = g[r];
                        r += 1;
                    }
                }
                self.acc(adj, *a, &ga);
            }
            Op::Devectorize(v) => {
                let n = dims(&node.value).0;
                let mut gv = Vec::with_capacity(self.nodes[v.0].value.len());
                for i in 0..n {
                    for j in i + 1..n {
                        gv.push(g[i * n + j] + g[j * n + i]);
                    }
                }
                self.acc(adj, *v, &gv);
            }
            Op::GatherFlat(a, idx) => {
                let mut ga = vec![0.0; self.nodes[a.0].value.len()];
                for (gv, &i) in g.iter().zip(idx.iter()) {
                    ga[i as usize] += gv;
                }
                self.acc(adj, *a, &ga);
            }
            Op::Sum(a) => {
                let ga = vec![g[0]; self.nodes[a.0].value.len()];
                self.acc(adj, *a, &ga);
            }
        }
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [r, c] => (*r, *c),
        _ => (t.len(), 1),
    }
}


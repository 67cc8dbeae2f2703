//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! Every forward op appends a node holding its output; [`Tape::backward`] walks
//! the nodes in reverse recording order and accumulates gradients into the
//! [`ParamStore`] entries that were read through [`Tape::param`].

use std::sync::Arc;

use rand::Rng;

use super::matrix::gemm;
use super::{Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::graph::FlavorGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    OnePlusScale { eps: Var, x: Var },
    Aggregate { graph: &'a FlavorGraph, x: Var },
    Relu(Var),
    Dropout { x: Var, mask: Vec<f64> },
    GatherRows { x: Var, rows: Vec<usize> },
    SegmentMean { x: Var, segments: Vec<Vec<usize>> },
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Contrastive { scores: Var, probs: Matrix },
    SqDistRows { x: Var, target: Arc<Matrix>, scale: f64 },
}

struct Node<'a> {
    value: Matrix,
    op: Op<'a>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
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

    fn push(&mut self, value: Matrix, op: Op<'a>) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced on tape");
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::AddRow(a, b) | Op::Add(a, b) => self.rg(*a) || self.rg(*b),
            Op::OnePlusScale { eps, x } => self.rg(*eps) || self.rg(*x),
            Op::Aggregate { x, .. }
            | Op::Relu(x)
            | Op::Dropout { x, .. }
            | Op::GatherRows { x, .. }
            | Op::SegmentMean { x, .. }
            | Op::Reshape(x)
            | Op::SqDistRows { x, .. } => self.rg(*x),
            Op::ConcatCols(parts) => parts.iter().any(|p| self.rg(*p)),
            Op::Contrastive { scores, .. } => self.rg(*scores),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    /// Reads the current value of a parameter; its gradient flows back on `backward`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `x + 1 bias` where `bias` is a single row.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape(format!(
                "bias {:?} does not broadcast over {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(x, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// `(1 + eps) * x` for a 1x1 `eps`.
    pub fn one_plus_scale(&mut self, eps: Var, x: Var) -> Result<Var> {
        if self.value(eps).shape() != (1, 1) {
            return Err(Error::Shape("scale factor must be 1x1".into()));
        }
        let k = 1.0 + self.value(eps).item();
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= k);
        Ok(self.push(out, Op::OnePlusScale { eps, x }))
    }

    /// Weighted neighbour sum over `graph` (see [`FlavorGraph::aggregate`]).
    pub fn sparse_aggregate(&mut self, graph: &'a FlavorGraph, x: Var) -> Result<Var> {
        let out = graph.aggregate(self.value(x))?;
        Ok(self.push(out, Op::Aggregate { graph, x }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    /// Inverted dropout. Identity (no node recorded) outside training or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let xv = self.value(x);
        let mask = dropout_mask(xv.data().len(), rate, rng);
        let data = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Matrix::from_vec(xv.rows(), xv.cols(), data)?;
        Ok(self.push(out, Op::Dropout { x, mask }))
    }

    /// Row `i` of the output is row `rows[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, rows: Vec<usize>) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Matrix::zeros(rows.len(), xv.cols());
        for (i, &r) in rows.iter().enumerate() {
            if r >= xv.rows() {
                return Err(Error::Shape(format!(
                    "row {r} out of range for {} rows",
                    xv.rows()
                )));
            }
            out.row_mut(i).copy_from_slice(xv.row(r));
        }
        Ok(self.push(out, Op::GatherRows { x, rows }))
    }

    /// Row `k` of the output is the mean of the rows of `x` listed in `segments[k]`.
    pub fn segment_mean(&mut self, x: Var, segments: Vec<Vec<usize>>) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Matrix::zeros(segments.len(), xv.cols());
        for (k, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                return Err(Error::InvalidArgument("mean over an empty row set".into()));
            }
            let inv = 1.0 / seg.len() as f64;
            for &r in seg {
                if r >= xv.rows() {
                    return Err(Error::Shape(format!(
                        "row {r} out of range for {} rows",
                        xv.rows()
                    )));
                }
                for (o, v) in out.row_mut(k).iter_mut().zip(xv.row(r)) {
                    *o += v * inv;
                }
            }
        }
        Ok(self.push(out, Op::SegmentMean { x, segments }))
    }

    /// Mean of the selected rows as a single row.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        self.segment_mean(x, vec![rows.to_vec()])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|p| self.value(*p).rows())
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        if let Some(bad) = parts.iter().find(|p| self.value(**p).rows() != rows) {
            return Err(Error::Shape(format!(
                "concat row mismatch: {} vs {rows}",
                self.value(*bad).rows()
            )));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for p in parts {
                let src = self.value(*p).row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let data = self.value(x).data().to_vec();
        let out = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Mean over rows of `-log softmax(row)[0]`: column 0 holds the positive score,
    /// the remaining columns the negatives.
    pub fn contrastive_loss(&mut self, scores: Var) -> Result<Var> {
        let sv = self.value(scores);
        if sv.rows() == 0 || sv.cols() == 0 {
            return Err(Error::Shape("contrastive loss needs at least one score".into()));
        }
        let mut probs = Matrix::zeros(sv.rows(), sv.cols());
        let mut total = 0.0;
        for b in 0..sv.rows() {
            let row = sv.row(b);
            let lse = log_sum_exp(row);
            total += lse - row[0];
            for (p, s) in probs.row_mut(b).iter_mut().zip(row) {
                *p = (s - lse).exp();
            }
        }
        let loss = Matrix::scalar(total / sv.rows() as f64);
        Ok(self.push(loss, Op::Contrastive { scores, probs }))
    }

    /// `scale * sum over the first target.rows() rows of (x - target)^2`.
    pub fn sq_dist_rows(&mut self, x: Var, target: Arc<Matrix>, scale: f64) -> Result<Var> {
        let xv = self.value(x);
        if target.cols() != xv.cols() || target.rows() > xv.rows() {
            return Err(Error::Shape(format!(
                "target {:?} does not fit inside {:?}",
                target.shape(),
                xv.shape()
            )));
        }
        let sum: f64 = xv.data()[..target.data().len()]
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(self.push(Matrix::scalar(scale * sum), Op::SqDistRows { x, target, scale }))
    }

    /// Propagates d`loss`/d(node) back through the tape, adding parameter
    /// gradients into `store`. `loss` must be 1x1.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.get_mut(*id).gradient.add_assign(&dy),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let g = self.grad_slot(&mut grads, *a);
                        gemm(&dy, false, self.value(*b), true, g, 1.0);
                    }
                    if self.rg(*b) {
                        let g = self.grad_slot(&mut grads, *b);
                        gemm(self.value(*a), true, &dy, false, g, 1.0);
                    }
                }
                Op::AddRow(x, bias) => {
                    if self.rg(*bias) {
                        let g = self.grad_slot(&mut grads, *bias);
                        for r in 0..dy.rows() {
                            for (o, d) in g.data_mut().iter_mut().zip(dy.row(r)) {
                                *o += d;
                            }
                        }
                    }
                    self.accumulate(&mut grads, *x, &dy);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &dy);
                    self.accumulate(&mut grads, *b, &dy);
                }
                Op::OnePlusScale { eps, x } => {
                    if self.rg(*eps) {
                        let dot: f64 = self
                            .value(*x)
                            .data()
                            .iter()
                            .zip(dy.data())
                            .map(|(a, b)| a * b)
                            .sum();
                        self.grad_slot(&mut grads, *eps).data_mut()[0] += dot;
                    }
                    if self.rg(*x) {
                        let k = 1.0 + self.value(*eps).item();
                        let g = self.grad_slot(&mut grads, *x);
                        for (o, d) in g.data_mut().iter_mut().zip(dy.data()) {
                            *o += k * d;
                        }
                    }
                }
                Op::Aggregate { graph, x } => {
                    // The adjacency is symmetric, so the transpose product is the same aggregation.
                    let g = self.grad_slot(&mut grads, *x);
                    graph.aggregate_into(&dy, g);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let g = self.grad_slot(&mut grads, *x);
                    for ((o, d), v) in g.data_mut().iter_mut().zip(dy.data()).zip(xv.data()) {
                        if *v > 0.0 {
                            *o += d;
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    let g = self.grad_slot(&mut grads, *x);
                    for ((o, d), m) in g.data_mut().iter_mut().zip(dy.data()).zip(mask) {
                        *o += d * m;
                    }
                }
                Op::GatherRows { x, rows } => {
                    let g = self.grad_slot(&mut grads, *x);
                    for (i, &r) in rows.iter().enumerate() {
                        for (o, d) in g.row_mut(r).iter_mut().zip(dy.row(i)) {
                            *o += d;
                        }
                    }
                }
                Op::SegmentMean { x, segments } => {
                    let g = self.grad_slot(&mut grads, *x);
                    for (k, seg) in segments.iter().enumerate() {
                        let inv = 1.0 / seg.len() as f64;
                        for &r in seg {
                            for (o, d) in g.row_mut(r).iter_mut().zip(dy.row(k)) {
                                *o += d * inv;
                            }
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let width = self.value(*p).cols();
                        if self.rg(*p) {
                            let piece = dy.slice_cols(offset, offset + width);
                            self.accumulate(&mut grads, *p, &piece);
                        }
                        offset += width;
                    }
                }
                Op::Reshape(x) => {
                    let (r, c) = self.value(*x).shape();
                    let g = Matrix::from_vec(r, c, dy.data().to_vec())?;
                    self.accumulate(&mut grads, *x, &g);
                }
                Op::Contrastive { scores, probs } => {
                    let scale = dy.item() / probs.rows() as f64;
                    let g = self.grad_slot(&mut grads, *scores);
                    for b in 0..probs.rows() {
                        for (k, (o, p)) in g.row_mut(b).iter_mut().zip(probs.row(b)).enumerate() {
                            let onehot = if k == 0 { 1.0 } else { 0.0 };
                            *o += scale * (p - onehot);
                        }
                    }
                }
                Op::SqDistRows { x, target, scale } => {
                    let xv = self.value(*x);
                    let k = 2.0 * scale * dy.item();
                    let g = self.grad_slot(&mut grads, *x);
                    let n = target.data().len();
                    for ((o, a), b) in g.data_mut()[..n]
                        .iter_mut()
                        .zip(&xv.data()[..n])
                        .zip(target.data())
                    {
                        *o += k * (a - b);
                    }
                }
            }
        }
        Ok(())
    }

    fn grad_slot<'g>(&self, grads: &'g mut [Option<Matrix>], v: Var) -> &'g mut Matrix {
        let (r, c) = self.value(v).shape();
        grads[v.0].get_or_insert_with(|| Matrix::zeros(r, c))
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: &Matrix) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )))
    }
}

/// Inverted-dropout mask: `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Applies dropout outside of a tape.
pub fn dropout<R: Rng + ?Sized>(x: &Matrix, rate: f64, rng: &mut R, training: bool) -> Result<Matrix> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.data().len(), rate, rng);
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Max-shifted `ln(sum exp(x))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-log(e^pos / (e^pos + sum e^neg))`, stabilized.
pub fn contrastive_loss(pos: f64, negatives: &[f64]) -> f64 {
    let mut all = Vec::with_capacity(negatives.len() + 1);
    all.push(pos);
    all.extend_from_slice(negatives);
    log_sum_exp(&all) - pos
}

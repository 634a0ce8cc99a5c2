//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every forward op together with its inputs. Calling
//! [`Tape::gradients`] walks the record backwards and returns the gradient of
//! a scalar output with respect to every recorded node that requires one;
//! [`Tape::backward`] additionally accumulates parameter gradients into a
//! [`ParamStore`].

use std::rc::Rc;
use std::sync::Arc;

use super::{Mat, ParamId, ParamStore, TensorError};
use crate::graph::Adjacency;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Neighborhood reduction used by the message-passing ops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Weighted mean; the denominator is the (possibly soft) degree.
    #[default]
    Mean,
    /// Plain weighted sum, i.e. `F · A[:, v]`.
    Sum,
}

/// One supervised row of a cross-entropy loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTarget {
    pub row: usize,
    pub class: usize,
    pub weight: f64,
}

/// Synthetic-node interpolation: output row `i` is
/// `(1 - delta) * src[base] + delta * src[neighbor]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolation {
    pub base: usize,
    pub neighbor: usize,
    pub delta: f64,
}

enum Op {
    Constant,
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Scale(Var, f64),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    RowSoftmax(Var),
    SelectRows(Var, Rc<[usize]>),
    RowDot(Var, Var),
    Interpolate(Var, Rc<[Interpolation]>),
    Aggregate {
        adj: Arc<Adjacency>,
        synthetic: Option<Var>,
        h: Var,
        mean: bool,
        alpha: Vec<f64>,
    },
    SqDiff(Var, Rc<Mat>),
    CrossEntropy {
        p: Var,
        targets: Rc<[LossTarget]>,
        denom: f64,
    },
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by one reverse sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

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

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op_name: &'static str, value: Mat, op: Op, requires_grad: bool) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A free input whose gradient can be read back from [`Gradients`].
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push("matmul", value, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push("transpose", value, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(TensorError::Shape {
                op: "add",
                detail: format!("{:?} + {:?}", x.shape(), y.shape()),
            });
        }
        let mut value = x.clone();
        value.add_scaled(y, 1.0);
        let rg = self.rg(&[a, b]);
        self.push("add", value, Op::Add(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        let value = self.value(a).map(|v| v * factor);
        let rg = self.rg(&[a]);
        self.push("scale", value, Op::Scale(a, factor), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).hcat(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push("concat_cols", value, Op::ConcatCols(a, b), rg)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).vcat(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push("concat_rows", value, Op::ConcatRows(a, b), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let value = self.value(a).map(|v| v.max(0.0));
        let rg = self.rg(&[a]);
        self.push("relu", value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let value = self.value(a).map(logistic);
        let rg = self.rg(&[a]);
        self.push("sigmoid", value, Op::Sigmoid(a), rg)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let rg = self.rg(&[a]);
        self.push("row_softmax", value, Op::RowSoftmax(a), rg)
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var, TensorError> {
        let src = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= src.rows()) {
            return Err(TensorError::Shape {
                op: "select_rows",
                detail: format!("row {bad} of {}", src.rows()),
            });
        }
        let value = src.select_rows(rows);
        let rg = self.rg(&[a]);
        self.push("select_rows", value, Op::SelectRows(a, rows.into()), rg)
    }

    /// Row-wise inner product, giving a column vector.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(TensorError::Shape {
                op: "row_dot",
                detail: format!("{:?} . {:?}", x.shape(), y.shape()),
            });
        }
        let data = (0..x.rows())
            .map(|r| x.row(r).iter().zip(y.row(r)).map(|(p, q)| p * q).sum())
            .collect();
        let value = Mat::from_vec(x.rows(), 1, data)?;
        let rg = self.rg(&[a, b]);
        self.push("row_dot", value, Op::RowDot(a, b), rg)
    }

    pub fn interpolate_rows(&mut self, src: Var, plan: &[Interpolation]) -> Result<Var, TensorError> {
        let h = self.value(src);
        let mut value = Mat::zeros(plan.len(), h.cols());
        for (i, it) in plan.iter().enumerate() {
            if it.base >= h.rows() || it.neighbor >= h.rows() {
                return Err(TensorError::Shape {
                    op: "interpolate_rows",
                    detail: format!("pair ({}, {}) of {} rows", it.base, it.neighbor, h.rows()),
                });
            }
            let (a, b) = (h.row(it.base), h.row(it.neighbor));
            for ((o, x), y) in value.row_mut(i).iter_mut().zip(a).zip(b) {
                *o = (1.0 - it.delta) * x + it.delta * y;
            }
        }
        let rg = self.rg(&[src]);
        self.push("interpolate_rows", value, Op::Interpolate(src, plan.into()), rg)
    }

    /// Message passing over the augmented adjacency
    /// `[[A, Bᵀ], [B, 0]]`, where `A` is the real sparse block and the
    /// optional `synthetic` (s × n) holds edge weights from synthetic to real
    /// nodes. `h` must have `n + s` rows.
    pub fn aggregate(
        &mut self,
        adj: &Arc<Adjacency>,
        synthetic: Option<Var>,
        h: Var,
        mode: Aggregation,
    ) -> Result<Var, TensorError> {
        let n = adj.num_nodes();
        let hv = self.value(h);
        let s = synthetic.map_or(0, |b| self.value(b).rows());
        if hv.rows() != n + s {
            return Err(TensorError::Shape {
                op: "aggregate",
                detail: format!("{} feature rows for {n} real + {s} synthetic nodes", hv.rows()),
            });
        }
        if let Some(b) = synthetic {
            if self.value(b).cols() != n {
                return Err(TensorError::Shape {
                    op: "aggregate",
                    detail: format!("synthetic block {:?} against {n} real nodes", self.value(b).shape()),
                });
            }
        }
        let k = hv.cols();
        let mut out = Mat::zeros(n + s, k);
        let mut deg = vec![0.0; n + s];
        for (v, d) in deg.iter_mut().enumerate().take(n) {
            let row = out.row_mut(v);
            for &u in adj.neighbors(v) {
                axpy(row, 1.0, hv.row(u));
            }
            *d = adj.degree(v) as f64;
        }
        if let Some(b) = synthetic {
            let bv = self.value(b);
            for j in 0..s {
                let sj = n + j;
                for u in 0..n {
                    let w = bv.get(j, u);
                    if w == 0.0 {
                        continue;
                    }
                    axpy(out.row_mut(u), w, hv.row(sj));
                    axpy(out.row_mut(sj), w, hv.row(u));
                    deg[u] += w;
                    deg[sj] += w;
                }
            }
        }
        let mean = mode == Aggregation::Mean;
        let alpha: Vec<f64> = deg
            .iter()
            .map(|&d| match (mean, d > 0.0) {
                (false, _) => 1.0,
                (true, true) => 1.0 / d,
                (true, false) => 0.0,
            })
            .collect();
        for (v, &a) in alpha.iter().enumerate() {
            if a != 1.0 {
                out.row_mut(v).iter_mut().for_each(|x| *x *= a);
            }
        }
        let rg = self.rg(&[h]) || synthetic.is_some_and(|b| self.requires_grad(b));
        self.push(
            "aggregate",
            out,
            Op::Aggregate {
                adj: Arc::clone(adj),
                synthetic,
                h,
                mean,
                alpha,
            },
            rg,
        )
    }

    /// `‖x − target‖_F²` as a 1x1 value.
    pub fn frobenius_sq_diff(&mut self, x: Var, target: Rc<Mat>) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.shape() != target.shape() {
            return Err(TensorError::Shape {
                op: "frobenius_sq_diff",
                detail: format!("{:?} vs {:?}", xv.shape(), target.shape()),
            });
        }
        let loss: f64 = xv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let rg = self.rg(&[x]);
        self.push("frobenius_sq_diff", Mat::scalar(loss), Op::SqDiff(x, target), rg)
    }

    /// `−Σ w · ln p[row, class] / denom` over the listed targets, where `p`
    /// holds row-stochastic class probabilities.
    pub fn masked_cross_entropy(&mut self, p: Var, targets: &[LossTarget], denom: f64) -> Result<Var, TensorError> {
        let pv = self.value(p);
        let mut loss = 0.0;
        for t in targets {
            if t.row >= pv.rows() || t.class >= pv.cols() {
                return Err(TensorError::Shape {
                    op: "masked_cross_entropy",
                    detail: format!("target ({}, {}) in {:?}", t.row, t.class, pv.shape()),
                });
            }
            loss -= t.weight * pv.get(t.row, t.class).max(f64::MIN_POSITIVE).ln();
        }
        let value = Mat::scalar(if denom > 0.0 { loss / denom } else { 0.0 });
        let rg = self.rg(&[p]);
        self.push(
            "masked_cross_entropy",
            value,
            Op::CrossEntropy {
                p,
                targets: targets.into(),
                denom,
            },
            rg,
        )
    }

    /// Accumulates `∂loss/∂param` into the store's gradient slots. Calling it
    /// twice without zeroing doubles the stored gradients.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), TensorError> {
        let grads = self.gradients(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads.grads[i]) {
                store.grad_mut(*id).add_scaled(g, 1.0);
            }
        }
        Ok(())
    }

    /// Reverse sweep from a scalar output.
    pub fn gradients(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(TensorError::NotScalar {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Mat>], v: Var, delta: Mat) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => g.add_scaled(&delta, 1.0),
            slot @ None => *slot = Some(delta),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Mat, grads: &mut [Option<Mat>]) {
        use super::mat::gemm;
        match &node.op {
            Op::Constant | Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut da = Mat::zeros(av.rows(), av.cols());
                    gemm(g, false, bv, true, &mut da, 0.0);
                    self.accumulate(grads, *a, da);
                }
                if self.wants(*b) {
                    let mut db = Mat::zeros(bv.rows(), bv.cols());
                    gemm(av, true, g, false, &mut db, 0.0);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, g.map(|v| v * f)),
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let mut da = Mat::zeros(g.rows(), ca);
                let mut db = Mat::zeros(g.rows(), cb);
                for r in 0..g.rows() {
                    da.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    db.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::ConcatRows(a, b) => {
                let ra = self.value(*a).rows();
                let split = ra * g.cols();
                let data = g.as_slice();
                let da = Mat::from_vec(ra, g.cols(), data[..split].to_vec()).expect("shape");
                let db = Mat::from_vec(g.rows() - ra, g.cols(), data[split..].to_vec()).expect("shape");
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut d = g.clone();
                for (dv, xv) in d.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    if *xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                for (dv, y) in d.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                    *dv *= y * (1.0 - y);
                }
                self.accumulate(grads, *a, d);
            }
            Op::RowSoftmax(a) => {
                let p = &node.value;
                let mut d = Mat::zeros(p.rows(), p.cols());
                for r in 0..p.rows() {
                    let (pr, gr) = (p.row(r), g.row(r));
                    let dot: f64 = pr.iter().zip(gr).map(|(x, y)| x * y).sum();
                    for ((o, pv), gv) in d.row_mut(r).iter_mut().zip(pr).zip(gr) {
                        *o = pv * (gv - dot);
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::SelectRows(a, rows) => {
                let src = self.value(*a);
                let mut d = Mat::zeros(src.rows(), src.cols());
                for (i, &r) in rows.iter().enumerate() {
                    axpy(d.row_mut(r), 1.0, g.row(i));
                }
                self.accumulate(grads, *a, d);
            }
            Op::RowDot(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut d = Mat::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        axpy(d.row_mut(r), g.get(r, 0), y.row(r));
                    }
                    self.accumulate(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = Mat::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        axpy(d.row_mut(r), g.get(r, 0), x.row(r));
                    }
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Interpolate(src, plan) => {
                let h = self.value(*src);
                let mut d = Mat::zeros(h.rows(), h.cols());
                for (i, it) in plan.iter().enumerate() {
                    axpy(d.row_mut(it.base), 1.0 - it.delta, g.row(i));
                    axpy(d.row_mut(it.neighbor), it.delta, g.row(i));
                }
                self.accumulate(grads, *src, d);
            }
            Op::Aggregate {
                adj,
                synthetic,
                h,
                mean,
                alpha,
            } => self.aggregate_backward(node, g, grads, adj, *synthetic, *h, *mean, alpha),
            Op::SqDiff(x, target) => {
                let gs = g.get(0, 0);
                let xv = self.value(*x);
                let data = xv
                    .as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .map(|(a, b)| 2.0 * (a - b) * gs)
                    .collect();
                let d = Mat::from_vec(xv.rows(), xv.cols(), data).expect("shape");
                self.accumulate(grads, *x, d);
            }
            Op::CrossEntropy { p, targets, denom } => {
                if *denom <= 0.0 {
                    return;
                }
                let pv = self.value(*p);
                let gs = g.get(0, 0);
                let mut d = Mat::zeros(pv.rows(), pv.cols());
                for t in targets.iter() {
                    let prob = pv.get(t.row, t.class).max(f64::MIN_POSITIVE);
                    let cur = d.get(t.row, t.class);
                    d.set(t.row, t.class, cur - gs * t.weight / (denom * prob));
                }
                self.accumulate(grads, *p, d);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn aggregate_backward(
        &self,
        node: &Node,
        g: &Mat,
        grads: &mut [Option<Mat>],
        adj: &Adjacency,
        synthetic: Option<Var>,
        h: Var,
        mean: bool,
        alpha: &[f64],
    ) {
        let n = adj.num_nodes();
        let hv = self.value(h);
        let out = &node.value;
        // Incoming gradient with the per-row normalization folded in.
        let mut gs = g.clone();
        for (v, &a) in alpha.iter().enumerate() {
            if a != 1.0 {
                gs.row_mut(v).iter_mut().for_each(|x| *x *= a);
            }
        }
        let bv = synthetic.map(|b| self.value(b));
        let s = bv.map_or(0, |b| b.rows());

        if self.wants(h) {
            let mut dh = Mat::zeros(hv.rows(), hv.cols());
            for v in 0..n {
                for &u in adj.neighbors(v) {
                    axpy(dh.row_mut(u), 1.0, gs.row(v));
                }
            }
            if let Some(b) = bv {
                for j in 0..s {
                    let sj = n + j;
                    for u in 0..n {
                        let w = b.get(j, u);
                        if w == 0.0 {
                            continue;
                        }
                        axpy(dh.row_mut(sj), w, gs.row(u));
                        axpy(dh.row_mut(u), w, gs.row(sj));
                    }
                }
            }
            self.accumulate(grads, h, dh);
        }

        if let (Some(bvar), Some(b)) = (synthetic, bv) {
            if self.wants(bvar) {
                let mut db = Mat::zeros(b.rows(), b.cols());
                let centered = if mean { 1.0 } else { 0.0 };
                for j in 0..s {
                    let sj = n + j;
                    let (hs, os, gsj) = (hv.row(sj), out.row(sj), gs.row(sj));
                    for u in 0..n {
                        let (hu, ou, gu) = (hv.row(u), out.row(u), gs.row(u));
                        let mut acc = 0.0;
                        for c in 0..hv.cols() {
                            acc += gu[c] * (hs[c] - centered * ou[c]);
                            acc += gsj[c] * (hu[c] - centered * os[c]);
                        }
                        db.set(j, u, acc);
                    }
                }
                self.accumulate(grads, bvar, db);
            }
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;

    #[test]
    fn relu_clamps_negatives() {
        let mut t = Tape::new();
        let x = t.constant(Mat::from_rows(&[&[-1.0, 2.0]]));
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn softmax_of_zero_row_is_uniform() {
        let mut t = Tape::new();
        let x = t.constant(Mat::zeros(1, 4));
        let y = t.row_softmax(x).unwrap();
        assert!(t.value(y).as_slice().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn sq_diff_of_identical_is_zero() {
        let e = Mat::from_rows(&[&[0.2, 0.7], &[0.1, 0.9]]);
        let mut t = Tape::new();
        let x = t.constant(e.clone());
        let l = t.frobenius_sq_diff(x, Rc::new(e)).unwrap();
        assert_eq!(t.value(l).item(), Some(0.0));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.constant(Mat::zeros(2, 3));
        let b = t.constant(Mat::zeros(2, 3));
        let e = t.matmul(a, b).unwrap_err();
        assert!(e.to_string().contains("matmul"), "{e}");
        let row = t.constant(Mat::zeros(1, 3));
        let e = t.add(a, row).unwrap_err();
        assert!(e.to_string().contains("add"), "{e}");
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::zeros(2, 2));
        assert!(matches!(t.gradients(x), Err(TensorError::NotScalar { .. })));
    }

    #[test]
    fn non_finite_forward_trips() {
        let mut t = Tape::new();
        let x = t.constant(Mat::from_rows(&[&[1e308]]));
        let err = t.scale(x, 10.0).unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { op: "scale" }));
    }

    /// loss = sum(W x) with W 2x3, x 3x1: dL/dW[i, j] = x[j].
    #[test]
    fn linear_gradient_is_outer_product() {
        let mut store = ParamStore::new();
        let w = store.insert("W", Mat::from_rows(&[&[0.1, 0.2, 0.3], &[-0.4, 0.5, 0.6]]));
        let mut t = Tape::new();
        let wv = t.param(&store, w);
        let x = t.constant(Mat::from_rows(&[&[1.0], &[-2.0], &[3.0]]));
        let y = t.matmul(wv, x).unwrap();
        let ones = t.constant(Mat::filled(1, 2, 1.0));
        let loss = t.matmul(ones, y).unwrap();
        t.backward(loss, &mut store).unwrap();
        let g = store.grad(w);
        for i in 0..2 {
            assert_eq!(g.row(i), &[1.0, -2.0, 3.0]);
        }
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut store = ParamStore::new();
        let w = store.insert("W", Mat::from_rows(&[&[0.3, -0.7]]));
        let mut t = Tape::new();
        let wv = t.param(&store, w);
        let s = t.sigmoid(wv).unwrap();
        let tgt = Rc::new(Mat::from_rows(&[&[1.0, 0.0]]));
        let loss = t.frobenius_sq_diff(s, tgt).unwrap();
        t.backward(loss, &mut store).unwrap();
        let once = store.grad(w).clone();
        t.backward(loss, &mut store).unwrap();
        let twice = store.grad(w);
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn aggregate_mean_and_sum() {
        let adj = Arc::new(Adjacency::from_edges(3, &[(0, 1), (0, 2)], false));
        let mut t = Tape::new();
        let h = t.constant(Mat::from_rows(&[&[1.0], &[2.0], &[4.0]]));
        let m = t.aggregate(&adj, None, h, Aggregation::Mean).unwrap();
        assert_eq!(t.value(m).as_slice(), &[3.0, 1.0, 1.0]);
        let s = t.aggregate(&adj, None, h, Aggregation::Sum).unwrap();
        assert_eq!(t.value(s).as_slice(), &[6.0, 1.0, 1.0]);
    }

    #[test]
    fn aggregate_isolated_node_gets_zero() {
        let adj = Arc::new(Adjacency::from_edges(2, &[], false));
        let mut t = Tape::new();
        let h = t.constant(Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let m = t.aggregate(&adj, None, h, Aggregation::Mean).unwrap();
        assert!(t.value(m).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_with_synthetic_block() {
        // Two real nodes linked; one synthetic node with weights (0.5, 0.25).
        let adj = Arc::new(Adjacency::from_edges(2, &[(0, 1)], false));
        let mut t = Tape::new();
        let h = t.constant(Mat::from_rows(&[&[2.0], &[4.0], &[8.0]]));
        let b = t.constant(Mat::from_rows(&[&[0.5, 0.25]]));
        let m = t.aggregate(&adj, Some(b), h, Aggregation::Mean).unwrap();
        let got = t.value(m).as_slice().to_vec();
        // node 0: (4 + 0.5*8) / 1.5, node 1: (2 + 0.25*8) / 1.25, syn: (0.5*2 + 0.25*4) / 0.75
        let expect = [8.0 / 1.5, 4.0 / 1.25, 2.0 / 0.75];
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}

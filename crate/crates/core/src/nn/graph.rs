//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to [`Var`] handles. Calling
//! [`Graph::backward`] on a scalar walks the tape in reverse and produces
//! gradients for every node that depends on a trainable parameter.

use std::collections::{HashMap, HashSet};

use super::conv::{self, ConvGeom};
use super::params::{ParamKind, ParamStore, StoreId};
use super::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvTranspose { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, batch_stats: bool },
    Concat { inputs: Vec<Var>, axis: usize },
    IndexSelect { x: Var, indices: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    WeightedAbsDiff { x: Var, target: Tensor, weight: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Pending update of batch-norm running statistics produced by a training
/// forward pass.
#[derive(Clone, Debug)]
pub struct BufferUpdate {
    pub store: StoreId,
    pub index: usize,
    pub value: Tensor,
}

/// Per-node gradients returned by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<(StoreId, usize), Var>,
    frozen: HashSet<StoreId>,
    training: bool,
    buffer_updates: Vec<BufferUpdate>,
}

impl Graph {
    /// `training` selects batch statistics (true) or running statistics
    /// (false) in batch normalization.
    pub fn new(training: bool) -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            frozen: HashSet::new(),
            training,
            buffer_updates: Vec::new(),
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    /// Parameters of a frozen store enter the graph as constants.
    pub fn freeze(&mut self, store: &ParamStore) {
        self.frozen.insert(store.id());
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is tracked (used for input-sensitivity checks).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Binds a named parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Var {
        let idx = store
            .index_of(name)
            .unwrap_or_else(|| panic!("parameter {name} is not registered"));
        if let Some(&v) = self.params.get(&(store.id(), idx)) {
            return v;
        }
        let p = store.by_index(idx);
        let rg = p.kind == ParamKind::Trainable && !self.frozen.contains(&store.id());
        let v = self.push(p.value.clone(), Op::Leaf, rg);
        self.params.insert((store.id(), idx), v);
        v
    }

    /// Gradients of all trainable parameters of `store`, by parameter index.
    pub fn param_grads(&self, grads: &Gradients, store: &ParamStore) -> Vec<Option<Vec<f64>>> {
        let mut out = vec![None; store.len()];
        for (&(sid, idx), &v) in &self.params {
            if sid == store.id() {
                out[idx] = grads.wrt(v).map(|g| g.to_vec());
            }
        }
        out
    }

    /// Writes batch-norm running statistics accumulated during this pass.
    pub fn apply_buffer_updates(&mut self, store: &mut ParamStore) {
        let id = store.id();
        for u in self.buffer_updates.iter().filter(|u| u.store == id) {
            *store.value_mut(u.index) = u.value.clone();
        }
    }

    // ---- elementwise -------------------------------------------------------

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "elementwise shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data);
        let rg = self.rg(a) || self.rg(b);
        self.push(t, op, rg)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect());
        let rg = self.rg(a);
        self.push(t, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// `ln(1 + e^x)`, computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    // ---- dense / conv ------------------------------------------------------

    /// `x (n, in) * w^T (in, out) + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        assert_eq!(tx.ndim(), 2, "linear input must be 2-D, got {:?}", tx.shape());
        let (n, din) = (tx.dim(0), tx.dim(1));
        let dout = tw.dim(0);
        assert_eq!(tw.dim(1), din, "linear weight {:?} vs input {:?}", tw.shape(), tx.shape());
        let mut out = vec![0.0; n * dout];
        conv::matmul(n, din, dout, tx.data(), false, tw.data(), true, &mut out, 0.0);
        if let Some(b) = b {
            let tb = self.value(b).data();
            for row in out.chunks_mut(dout) {
                row.iter_mut().zip(tb).for_each(|(o, bb)| *o += bb);
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        self.push(Tensor::new(vec![n, dout], out), Op::Linear { x, w, b }, rg)
    }

    /// Strided convolution. `x` is `(n, c, h, w)`; `w` is `(c_out, c, kh, kw)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: (usize, usize), pad: (usize, usize)) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        assert_eq!(tx.ndim(), 4, "conv2d input must be NCHW, got {:?}", tx.shape());
        assert_eq!(tw.dim(1), tx.dim(1), "conv2d channel mismatch: weight {:?} input {:?}", tw.shape(), tx.shape());
        let geom = ConvGeom::forward(tx.dim(1), tx.dim(2), tx.dim(3), tw.dim(0), (tw.dim(2), tw.dim(3)), stride, pad)
            .unwrap_or_else(|| panic!("kernel {:?} does not fit input {:?}", tw.shape(), tx.shape()));
        let n = tx.dim(0);
        let out = conv::conv_forward(&geom, n, tx.data(), tw.data(), b.map(|b| self.value(b).data()));
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let t = Tensor::new(vec![n, geom.c_small, geom.h_small, geom.w_small], out);
        self.push(t, Op::Conv { x, w, b, geom }, rg)
    }

    /// Transposed convolution. `x` is `(n, c, h, w)`; `w` is `(c, c_out, kh, kw)`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: (usize, usize), pad: (usize, usize)) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        assert_eq!(tx.ndim(), 4, "conv_transpose2d input must be NCHW, got {:?}", tx.shape());
        assert_eq!(tw.dim(0), tx.dim(1), "conv_transpose2d channel mismatch: weight {:?} input {:?}", tw.shape(), tx.shape());
        let geom = ConvGeom::transposed(tx.dim(1), tx.dim(2), tx.dim(3), tw.dim(1), (tw.dim(2), tw.dim(3)), stride, pad)
            .unwrap_or_else(|| panic!("invalid transposed geometry for {:?}", tx.shape()));
        let n = tx.dim(0);
        let out = conv::conv_transpose_forward(&geom, n, tx.data(), tw.data(), b.map(|b| self.value(b).data()));
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let t = Tensor::new(vec![n, geom.c_large, geom.h_large, geom.w_large], out);
        self.push(t, Op::ConvTranspose { x, w, b, geom }, rg)
    }

    /// Batch normalization over every axis except 1. In training mode batch
    /// statistics are used and running statistics are scheduled for update.
    pub fn batch_norm(&mut self, x: Var, store: &ParamStore, prefix: &str) -> Var {
        let gamma = self.param(store, &format!("{prefix}.gamma"));
        let beta = self.param(store, &format!("{prefix}.beta"));
        let mean_idx = store.index_of(&format!("{prefix}.running_mean")).expect("running mean");
        let var_idx = store.index_of(&format!("{prefix}.running_var")).expect("running var");
        let tx = self.value(x);
        let shape = tx.shape().to_vec();
        let (n, c) = (shape[0], shape[1]);
        let s: usize = shape[2..].iter().product();
        let m = (n * s) as f64;
        let xd = tx.data();
        let (mean, var) = if self.training {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for b in 0..n {
                for ch in 0..c {
                    mean[ch] += xd[(b * c + ch) * s..][..s].iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|v| *v /= m);
            for b in 0..n {
                for ch in 0..c {
                    let mu = mean[ch];
                    var[ch] += xd[(b * c + ch) * s..][..s].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= m);
            (mean, var)
        } else {
            (
                store.by_index(mean_idx).value.data().to_vec(),
                store.by_index(var_idx).value.data().to_vec(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let g = self.value(gamma).data().to_vec();
        let bt = self.value(beta).data().to_vec();
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * s;
                for i in off..off + s {
                    xhat[i] = (xd[i] - mean[ch]) * inv_std[ch];
                    out[i] = g[ch] * xhat[i] + bt[ch];
                }
            }
        }
        if self.training {
            let rm = store.by_index(mean_idx).value.data();
            let rv = store.by_index(var_idx).value.data();
            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            let new_mean = rm.iter().zip(&mean).map(|(r, v)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * v).collect();
            let new_var = rv.iter().zip(&var).map(|(r, v)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * v * unbias).collect();
            self.buffer_updates.push(BufferUpdate { store: store.id(), index: mean_idx, value: Tensor::new(vec![c], new_mean) });
            self.buffer_updates.push(BufferUpdate { store: store.id(), index: var_idx, value: Tensor::new(vec![c], new_var) });
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let batch_stats = self.training;
        self.push(
            Tensor::new(shape, out),
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch_stats },
            rg,
        )
    }

    // ---- shape -------------------------------------------------------------

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Var {
        assert!(!inputs.is_empty());
        let first = self.shape(inputs[0]).to_vec();
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            assert_eq!(s.len(), first.len(), "concat rank mismatch");
            for (d, (&a, &b)) in s.iter().zip(&first).enumerate() {
                assert!(d == axis || a == b, "concat shape mismatch {s:?} vs {first:?}");
            }
            total += s[axis];
        }
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let len = t.dim(axis) * inner;
                out.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(Tensor::new(shape, out), Op::Concat { inputs: inputs.to_vec(), axis }, rg)
    }

    /// Gathers rows along axis 0; indices may repeat.
    pub fn index_select(&mut self, x: Var, indices: &[usize]) -> Var {
        let t = self.value(x);
        let inner: usize = t.shape()[1..].iter().product();
        let mut out = Vec::with_capacity(indices.len() * inner);
        for &i in indices {
            out.extend_from_slice(&t.data()[i * inner..(i + 1) * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[0] = indices.len();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, out), Op::IndexSelect { x, indices: indices.to_vec() }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let t = self.value(x).reshape(shape.to_vec());
        let rg = self.rg(x);
        self.push(t, Op::Reshape(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// `sum_i weight_i * |x_i - target_i|`; the weight is a constant mask.
    pub fn weighted_abs_diff(&mut self, x: Var, target: Tensor, weight: Tensor) -> Var {
        let t = self.value(x);
        assert_eq!(t.shape(), target.shape(), "target shape mismatch");
        assert_eq!(t.shape(), weight.shape(), "weight shape mismatch");
        let s = t
            .data()
            .iter()
            .zip(target.data())
            .zip(weight.data())
            .map(|((a, b), w)| w * (a - b).abs())
            .sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::WeightedAbsDiff { x, target, weight }, rg)
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).numel(), 1, "backward requires a scalar");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.rg(loss) {
            return Gradients { grads };
        }
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backward_node(node, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        Gradients { grads }
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, x)| *e += x),
            slot @ None => *slot = Some(g),
        }
    }

    fn acc_with(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce() -> Vec<f64>) {
        if self.rg(v) {
            let g = f();
            self.acc(grads, v, g);
        }
    }

    fn backward_node(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc_with(grads, *a, || gy.to_vec());
                self.acc_with(grads, *b, || gy.to_vec());
            }
            Op::Sub(a, b) => {
                self.acc_with(grads, *a, || gy.to_vec());
                self.acc_with(grads, *b, || gy.iter().map(|g| -g).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.acc_with(grads, *a, || gy.iter().zip(vb).map(|(g, x)| g * x).collect());
                self.acc_with(grads, *b, || gy.iter().zip(va).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, s) => self.acc_with(grads, *a, || gy.iter().map(|g| g * s).collect()),
            Op::Relu(a) => {
                let x = self.value(*a).data();
                self.acc_with(grads, *a, || gy.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }).collect());
            }
            Op::Tanh(a) => self.acc_with(grads, *a, || gy.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect()),
            Op::Sigmoid(a) => self.acc_with(grads, *a, || gy.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect()),
            Op::Softplus(a) => {
                let x = self.value(*a).data();
                self.acc_with(grads, *a, || gy.iter().zip(x).map(|(g, &x)| g * sigmoid(x)).collect());
            }
            Op::Linear { x, w, b } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (n, din, dout) = (tx.dim(0), tx.dim(1), tw.dim(0));
                self.acc_with(grads, *x, || {
                    let mut d = vec![0.0; n * din];
                    conv::matmul(n, dout, din, gy, false, tw.data(), false, &mut d, 0.0);
                    d
                });
                self.acc_with(grads, *w, || {
                    let mut d = vec![0.0; dout * din];
                    conv::matmul(dout, n, din, gy, true, tx.data(), false, &mut d, 0.0);
                    d
                });
                if let Some(b) = b {
                    self.acc_with(grads, *b, || {
                        let mut d = vec![0.0; dout];
                        for row in gy.chunks(dout) {
                            d.iter_mut().zip(row).for_each(|(a, g)| *a += g);
                        }
                        d
                    });
                }
            }
            Op::Conv { x, w, b, geom } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (dx, dw, db) = conv::conv_backward(
                    geom,
                    tx.dim(0),
                    tx.data(),
                    tw.data(),
                    gy,
                    self.rg(*x),
                    self.rg(*w),
                    b.is_some_and(|b| self.rg(b)),
                );
                if let Some(d) = dx {
                    self.acc(grads, *x, d);
                }
                if let Some(d) = dw {
                    self.acc(grads, *w, d);
                }
                if let (Some(b), Some(d)) = (b, db) {
                    self.acc(grads, *b, d);
                }
            }
            Op::ConvTranspose { x, w, b, geom } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (dx, dw, db) = conv::conv_transpose_backward(
                    geom,
                    tx.dim(0),
                    tx.data(),
                    tw.data(),
                    gy,
                    self.rg(*x),
                    self.rg(*w),
                    b.is_some_and(|b| self.rg(b)),
                );
                if let Some(d) = dx {
                    self.acc(grads, *x, d);
                }
                if let Some(d) = dw {
                    self.acc(grads, *w, d);
                }
                if let (Some(b), Some(d)) = (b, db) {
                    self.acc(grads, *b, d);
                }
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch_stats } => {
                let shape = node.value.shape();
                let (n, c) = (shape[0], shape[1]);
                let s: usize = shape[2..].iter().product();
                let m = (n * s) as f64;
                let g = self.value(*gamma).data();
                let mut sum_dy = vec![0.0; c];
                let mut sum_dy_xhat = vec![0.0; c];
                for b in 0..n {
                    for ch in 0..c {
                        let off = (b * c + ch) * s;
                        for i in off..off + s {
                            sum_dy[ch] += gy[i];
                            sum_dy_xhat[ch] += gy[i] * xhat[i];
                        }
                    }
                }
                self.acc_with(grads, *gamma, || sum_dy_xhat.clone());
                self.acc_with(grads, *beta, || sum_dy.clone());
                self.acc_with(grads, *x, || {
                    let mut dx = vec![0.0; gy.len()];
                    for b in 0..n {
                        for ch in 0..c {
                            let off = (b * c + ch) * s;
                            let k = g[ch] * inv_std[ch];
                            for i in off..off + s {
                                dx[i] = if *batch_stats {
                                    k * (gy[i] - sum_dy[ch] / m - xhat[i] * sum_dy_xhat[ch] / m)
                                } else {
                                    k * gy[i]
                                };
                            }
                        }
                    }
                    dx
                });
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let len = self.value(v).dim(*axis) * inner;
                    if self.rg(v) {
                        let mut d = Vec::with_capacity(outer * len);
                        for o in 0..outer {
                            d.extend_from_slice(&gy[o * total + offset..o * total + offset + len]);
                        }
                        self.acc(grads, v, d);
                    }
                    offset += len;
                }
            }
            Op::IndexSelect { x, indices } => {
                self.acc_with(grads, *x, || {
                    let tx = self.value(*x);
                    let inner: usize = tx.shape()[1..].iter().product();
                    let mut d = vec![0.0; tx.numel()];
                    for (r, &i) in indices.iter().enumerate() {
                        d[i * inner..(i + 1) * inner]
                            .iter_mut()
                            .zip(&gy[r * inner..(r + 1) * inner])
                            .for_each(|(a, g)| *a += g);
                    }
                    d
                });
            }
            Op::Reshape(x) => self.acc_with(grads, *x, || gy.to_vec()),
            Op::Sum(x) => self.acc_with(grads, *x, || vec![gy[0]; self.value(*x).numel()]),
            Op::WeightedAbsDiff { x, target, weight } => {
                let tx = self.value(*x).data();
                self.acc_with(grads, *x, || {
                    tx.iter()
                        .zip(target.data())
                        .zip(weight.data())
                        .map(|((a, b), w)| {
                            let d = a - b;
                            let sign = if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            gy[0] * w * sign
                        })
                        .collect()
                });
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

//! Parameterized building blocks. Each layer only knows its parameter names
//! and shapes; values live in a [`ParamStore`].

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamKind, ParamStore};
use super::tensor::Tensor;

fn bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub name: String,
    pub din: usize,
    pub dout: usize,
    pub bias: bool,
}

impl Linear {
    pub fn new(name: impl Into<String>, din: usize, dout: usize) -> Self {
        Self { name: name.into(), din, dout, bias: true }
    }

    /// No bias; for layers feeding a batch norm, which would cancel it.
    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let b = bound(self.din);
        store.insert_uniform(format!("{}.weight", self.name), &[self.dout, self.din], b, rng);
        if self.bias {
            store.insert_uniform(format!("{}.bias", self.name), &[self.dout], b, rng);
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, &format!("{}.weight", self.name));
        let b = self.bias.then(|| g.param(store, &format!("{}.bias", self.name)));
        g.linear(x, w, b)
    }
}

/// 2-D convolution; 1-D convolutions use a unit kernel height.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub bias: bool,
}

impl Conv2d {
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let b = bound(self.c_in * self.kernel.0 * self.kernel.1);
        store.insert_uniform(
            format!("{}.weight", self.name),
            &[self.c_out, self.c_in, self.kernel.0, self.kernel.1],
            b,
            rng,
        );
        if self.bias {
            store.insert_uniform(format!("{}.bias", self.name), &[self.c_out], b, rng);
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, &format!("{}.weight", self.name));
        let b = self.bias.then(|| g.param(store, &format!("{}.bias", self.name)));
        g.conv2d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub bias: bool,
}

impl ConvTranspose2d {
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let b = bound(self.c_in * self.kernel.0 * self.kernel.1 / (self.stride.0 * self.stride.1).max(1));
        store.insert_uniform(
            format!("{}.weight", self.name),
            &[self.c_in, self.c_out, self.kernel.0, self.kernel.1],
            b,
            rng,
        );
        if self.bias {
            store.insert_uniform(format!("{}.bias", self.name), &[self.c_out], b, rng);
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, &format!("{}.weight", self.name));
        let b = self.bias.then(|| g.param(store, &format!("{}.bias", self.name)));
        g.conv_transpose2d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub name: String,
    pub channels: usize,
}

impl BatchNorm {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        Self { name: name.into(), channels }
    }

    pub fn init(&self, store: &mut ParamStore) {
        let c = self.channels;
        store.insert(format!("{}.gamma", self.name), Tensor::full(vec![c], 1.0), ParamKind::Trainable);
        store.insert(format!("{}.beta", self.name), Tensor::zeros(vec![c]), ParamKind::Trainable);
        store.insert(format!("{}.running_mean", self.name), Tensor::zeros(vec![c]), ParamKind::Buffer);
        store.insert(format!("{}.running_var", self.name), Tensor::full(vec![c], 1.0), ParamKind::Buffer);
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        g.batch_norm(x, store, &self.name)
    }
}

/// Multi-layer GRU with the gate layout
/// `r = s(W_ir x + b_ir + W_hr h + b_hr)`, `z = s(W_iz x + b_iz + W_hz h + b_hz)`,
/// `n = tanh(W_in x + b_in + r * (W_hn h + b_hn))`, `h' = (1 - z) * n + z * h`.
#[derive(Clone, Debug)]
pub struct Gru {
    pub name: String,
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
}

const GATES: [&str; 3] = ["r", "z", "n"];

impl Gru {
    pub fn new(name: impl Into<String>, input: usize, hidden: usize, layers: usize) -> Self {
        Self { name: name.into(), input, hidden, layers }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let b = bound(self.hidden);
        for l in 0..self.layers {
            let din = if l == 0 { self.input } else { self.hidden };
            for gate in GATES {
                store.insert_uniform(format!("{}.l{l}.w_i{gate}", self.name), &[self.hidden, din], b, rng);
                store.insert_uniform(format!("{}.l{l}.w_h{gate}", self.name), &[self.hidden, self.hidden], b, rng);
                store.insert_uniform(format!("{}.l{l}.b_i{gate}", self.name), &[self.hidden], b, rng);
                store.insert_uniform(format!("{}.l{l}.b_h{gate}", self.name), &[self.hidden], b, rng);
            }
        }
    }

    /// Fresh all-zero state for a batch of `n` sequences.
    pub fn zero_state(&self, g: &mut Graph, n: usize) -> Vec<Var> {
        (0..self.layers).map(|_| g.constant(Tensor::zeros(vec![n, self.hidden]))).collect()
    }

    fn cell(&self, g: &mut Graph, store: &ParamStore, l: usize, x: Var, h: Var) -> Var {
        let lin = |g: &mut Graph, gate: &str| {
            let wi = g.param(store, &format!("{}.l{l}.w_i{gate}", self.name));
            let bi = g.param(store, &format!("{}.l{l}.b_i{gate}", self.name));
            let wh = g.param(store, &format!("{}.l{l}.w_h{gate}", self.name));
            let bh = g.param(store, &format!("{}.l{l}.b_h{gate}", self.name));
            (g.linear(x, wi, Some(bi)), g.linear(h, wh, Some(bh)))
        };
        let (ir, hr) = lin(g, "r");
        let (iz, hz) = lin(g, "z");
        let (inn, hn) = lin(g, "n");
        let r = g.add(ir, hr);
        let r = g.sigmoid(r);
        let z = g.add(iz, hz);
        let z = g.sigmoid(z);
        let rh = g.mul(r, hn);
        let n = g.add(inn, rh);
        let n = g.tanh(n);
        // h' = n + z * (h - n)
        let d = g.sub(h, n);
        let zd = g.mul(z, d);
        g.add(n, zd)
    }

    /// One timestep through every layer. `mask` (shape `(n, hidden)`, 0 or 1)
    /// freezes the state of finished sequences.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: Var, state: &[Var], mask: Option<Var>) -> Vec<Var> {
        let mut input = x;
        let mut next = Vec::with_capacity(self.layers);
        for (l, &h) in state.iter().enumerate() {
            let mut h_new = self.cell(g, store, l, input, h);
            if let Some(m) = mask {
                let d = g.sub(h_new, h);
                let md = g.mul(m, d);
                h_new = g.add(h, md);
            }
            next.push(h_new);
            input = h_new;
        }
        next
    }
}

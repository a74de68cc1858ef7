use rand::Rng;

use super::arch::ArchConfig;
use crate::nn::layers::{BatchNorm, Conv2d, Linear};
use crate::nn::{Graph, ParamStore, Var};

/// Stack of strided convolutions, each followed by optional batch norm and ReLU.
#[derive(Clone, Debug)]
pub struct ConvStack {
    pub layers: Vec<(Conv2d, Option<BatchNorm>)>,
}

impl ConvStack {
    /// `depth` layers of kernel 4, stride 2, padding 1 over an image.
    pub fn image(prefix: &str, c_in: usize, arch: &ArchConfig, bn_first: bool) -> Self {
        let mut layers = Vec::with_capacity(arch.depth);
        let mut c = c_in;
        for k in 0..arch.depth {
            let c_out = arch.channels(k);
            let bn = k > 0 || bn_first;
            layers.push((
                Conv2d {
                    name: format!("{prefix}.conv{k}"),
                    c_in: c,
                    c_out,
                    kernel: (4, 4),
                    stride: (2, 2),
                    pad: (1, 1),
                    bias: !bn,
                },
                bn.then(|| BatchNorm::new(format!("{prefix}.bn{k}"), c_out)),
            ));
            c = c_out;
        }
        Self { layers }
    }

    /// Large-kernel first layer followed by `audio_layers` stride-2 layers, all 1-D.
    pub fn audio(prefix: &str, arch: &ArchConfig) -> Self {
        let (k0, s0) = arch.audio_first_kernel();
        let mut layers = Vec::with_capacity(arch.audio_layers + 1);
        let mut c = 1;
        for k in 0..=arch.audio_layers {
            let c_out = arch.audio_channels(k);
            let (kernel, stride, pad) = if k == 0 { ((1, k0), (1, s0), (0, 0)) } else { ((1, 4), (1, 2), (0, 1)) };
            layers.push((
                Conv2d { name: format!("{prefix}.conv{k}"), c_in: c, c_out, kernel, stride, pad, bias: false },
                Some(BatchNorm::new(format!("{prefix}.bn{k}"), c_out)),
            ));
            c = c_out;
        }
        Self { layers }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        for (conv, bn) in &self.layers {
            conv.init(store, rng);
            if let Some(bn) = bn {
                bn.init(store);
            }
        }
    }

    /// Every layer's activation, shallow to deep.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Vec<Var> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (conv, bn) in &self.layers {
            h = conv.forward(g, store, h);
            if let Some(bn) = bn {
                h = bn.forward(g, store, h);
            }
            h = g.relu(h);
            out.push(h);
        }
        out
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |(c, _)| c.c_out)
    }
}

/// Flattens `x (n, ...)` to `(n, rest)`.
pub fn flatten(g: &mut Graph, x: Var) -> Var {
    let s = g.shape(x).to_vec();
    let rest = s[1..].iter().product();
    g.reshape(x, &[s[0], rest])
}

/// Conv stack, flatten, linear projection and tanh.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub stack: ConvStack,
    pub proj: Linear,
}

impl Encoder {
    pub fn new(stack: ConvStack, flat: usize, prefix: &str, dim: usize) -> Self {
        Self { stack, proj: Linear::new(format!("{prefix}.proj"), flat, dim) }
    }

    pub fn image(prefix: &str, c_in: usize, arch: &ArchConfig, dim: usize) -> Self {
        let stack = ConvStack::image(prefix, c_in, arch, true);
        let (h, w) = arch.spatial(arch.depth - 1);
        let flat = stack.out_channels() * h * w;
        Self::new(stack, flat, prefix, dim)
    }

    pub fn audio(prefix: &str, arch: &ArchConfig, dim: usize) -> Self {
        let stack = ConvStack::audio(prefix, arch);
        let l = arch.window_len().expect("validated arch");
        let (k0, s0) = arch.audio_first_kernel();
        let mut len = (l - k0) / s0 + 1;
        for _ in 0..arch.audio_layers {
            len = (len + 2 - 4) / 2 + 1;
        }
        let flat = stack.out_channels() * len;
        Self::new(stack, flat, prefix, dim)
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.stack.init(store, rng);
        self.proj.init(store, rng);
    }

    /// Returns the tanh code and the per-layer activations.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> (Var, Vec<Var>) {
        let feats = self.stack.forward(g, store, x);
        let flat = flatten(g, *feats.last().expect("non-empty stack"));
        let z = self.proj.forward(g, store, flat);
        (g.tanh(z), feats)
    }
}

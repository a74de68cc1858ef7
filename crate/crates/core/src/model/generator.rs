use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::arch::{ArchConfig, CONTEXT_DIM, ID_DIM, LATENT_DIM, NOISE_DIM, NOISE_VARIANCE};
use super::blocks::Encoder;
use super::{frame_from_rows, frames_to_tensor};
use crate::audio::AudioFrameSeq;
use crate::error::{Error, Result};
use crate::media::{Frame, VideoSeq};
use crate::nn::layers::{BatchNorm, ConvTranspose2d, Gru, Linear};
use crate::nn::{Graph, ParamStore, Tensor, Var};

/// Identity code of one or more stills: `z_id (n, 50)` and the encoder activations.
#[derive(Debug, Clone)]
pub struct IdentityCode {
    pub z_id: Tensor,
    pub skips: Vec<Tensor>,
}

/// Graph handles of an identity encoding.
#[derive(Debug, Clone)]
pub struct IdentityVars {
    pub z_id: Var,
    pub skips: Vec<Var>,
}

/// Training batch: stills `(B, 3, H, W)` and audio windows `(T * B, 1, 1, L)`
/// ordered time-major (row `t * B + b`).
#[derive(Debug, Clone)]
pub struct GenBatch {
    pub stills: Tensor,
    pub windows: Tensor,
    pub lengths: Vec<usize>,
    pub steps: usize,
}

impl GenBatch {
    pub fn batch(&self) -> usize {
        self.lengths.len()
    }

    /// `(b, t)` pairs of real frames, sample-major; this is the row order of generated frames.
    pub fn valid_index(&self) -> Vec<(usize, usize)> {
        self.lengths.iter().enumerate().flat_map(|(b, &n)| (0..n).map(move |t| (b, t))).collect()
    }
}

pub struct GenForward {
    /// `(N, 3, H, W)` for the pairs of [`GenBatch::valid_index`].
    pub frames: Var,
    pub z_id: Var,
}

pub struct Generator {
    pub arch: ArchConfig,
    pub params: ParamStore,
    identity: Encoder,
    audio: Encoder,
    context: Gru,
    noise: Gru,
    latent_proj: Linear,
    latent_bn: BatchNorm,
    decoder: Vec<(ConvTranspose2d, Option<BatchNorm>)>,
}

impl Generator {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let identity = Encoder::image("identity", 3, &arch, ID_DIM);
        let audio = Encoder::audio("audio", &arch, CONTEXT_DIM);
        let context = Gru::new("context", CONTEXT_DIM, CONTEXT_DIM, arch.context_layers);
        let noise = Gru::new("noise", NOISE_DIM, NOISE_DIM, 1);
        let d = arch.depth;
        let (hd, wd) = arch.spatial(d - 1);
        let deep = arch.channels(d - 1);
        let latent_proj = Linear::new("latent.proj", LATENT_DIM, deep * hd * wd).without_bias();
        let latent_bn = BatchNorm::new("latent.bn", deep);
        let mut decoder = Vec::with_capacity(d);
        let mut c = deep;
        for j in 0..d {
            let skip = arch.channels(d - 1 - j);
            let last = j + 1 == d;
            let c_out = if last { 3 } else { arch.channels(d - 2 - j) };
            decoder.push((
                ConvTranspose2d {
                    name: format!("decoder.deconv{j}"),
                    c_in: c + skip,
                    c_out,
                    kernel: (4, 4),
                    stride: (2, 2),
                    pad: (1, 1),
                    bias: last,
                },
                (!last).then(|| BatchNorm::new(format!("decoder.bn{j}"), c_out)),
            ));
            c = c_out;
        }
        let mut g = Self {
            arch,
            params: ParamStore::new(),
            identity,
            audio,
            context,
            noise,
            latent_proj,
            latent_bn,
            decoder,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        g.identity.init(&mut store, &mut rng);
        g.audio.init(&mut store, &mut rng);
        g.context.init(&mut store, &mut rng);
        g.noise.init(&mut store, &mut rng);
        g.latent_proj.init(&mut store, &mut rng);
        g.latent_bn.init(&mut store);
        for (deconv, bn) in &g.decoder {
            deconv.init(&mut store, &mut rng);
            if let Some(bn) = bn {
                bn.init(&mut store);
            }
        }
        g.params = store;
        Ok(g)
    }

    fn check_still(&self, shape: &[usize]) -> Result<()> {
        let want = [3, self.arch.height, self.arch.width];
        if shape.len() != 4 || shape[1..] != want {
            return Err(Error::Shape(format!("expected stills of shape (n, 3, {}, {}), got {shape:?}", want[1], want[2])));
        }
        Ok(())
    }

    pub fn identity_vars(&self, g: &mut Graph, stills: Var) -> IdentityVars {
        let (z_id, skips) = self.identity.forward(g, &self.params, stills);
        IdentityVars { z_id, skips }
    }

    /// Audio windows `(n, 1, 1, L)` to features `(n, 256)`.
    pub fn audio_vars(&self, g: &mut Graph, windows: Var) -> Var {
        self.audio.forward(g, &self.params, windows).0
    }

    pub fn context_zero(&self, g: &mut Graph, n: usize) -> Vec<Var> {
        self.context.zero_state(g, n)
    }

    pub fn context_vars(&self, g: &mut Graph, feature: Var, state: &[Var]) -> Vec<Var> {
        self.context.step(g, &self.params, feature, state, None)
    }

    pub fn noise_zero(&self, g: &mut Graph, n: usize) -> Vec<Var> {
        self.noise.zero_state(g, n)
    }

    pub fn noise_vars(&self, g: &mut Graph, input: Var, state: &[Var]) -> Vec<Var> {
        self.noise.step(g, &self.params, input, state, None)
    }

    /// Decodes `n` frames from per-frame codes and skips of matching batch size.
    pub fn decode_vars(&self, g: &mut Graph, z_id: Var, z_c: Var, z_n: Var, skips: &[Var]) -> Var {
        let n = g.shape(z_id)[0];
        let d = self.arch.depth;
        let (hd, wd) = self.arch.spatial(d - 1);
        let latent = g.concat(&[z_id, z_c, z_n], 1);
        let h = self.latent_proj.forward(g, &self.params, latent);
        let h = g.reshape(h, &[n, self.arch.channels(d - 1), hd, wd]);
        let h = self.latent_bn.forward(g, &self.params, h);
        let mut h = g.relu(h);
        for (j, (deconv, bn)) in self.decoder.iter().enumerate() {
            let x = g.concat(&[h, skips[d - 1 - j]], 1);
            h = deconv.forward(g, &self.params, x);
            h = match bn {
                Some(bn) => {
                    let y = bn.forward(g, &self.params, h);
                    g.relu(y)
                }
                None => g.tanh(h),
            };
        }
        h
    }

    /// Draws one `(n, 10)` block of N(0, 0.6) noise.
    pub fn draw_noise(n: usize, rng: &mut impl Rng) -> Tensor {
        let dist = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("valid normal");
        Tensor::new(vec![n, NOISE_DIM], (0..n * NOISE_DIM).map(|_| dist.sample(rng)).collect())
    }

    /// Batched forward over whole sequences. Only real (unpadded) frames are decoded.
    pub fn forward_batch(&self, g: &mut Graph, batch: &GenBatch, rng: &mut impl Rng) -> Result<GenForward> {
        self.check_still(batch.stills.shape())?;
        let b = batch.batch();
        let l = self.arch.window_len()?;
        if batch.windows.shape() != [batch.steps * b, 1, 1, l] {
            return Err(Error::Shape(format!(
                "expected audio windows ({}, 1, 1, {l}), got {:?}",
                batch.steps * b,
                batch.windows.shape()
            )));
        }
        let stills = g.constant(batch.stills.clone());
        let id = self.identity_vars(g, stills);
        let windows = g.constant(batch.windows.clone());
        let feats = self.audio_vars(g, windows);
        let mut ctx = self.context_zero(g, b);
        let mut nz = self.noise_zero(g, b);
        let mut z_c = Vec::with_capacity(batch.steps);
        let mut z_n = Vec::with_capacity(batch.steps);
        for t in 0..batch.steps {
            let rows: Vec<usize> = (t * b..(t + 1) * b).collect();
            let f = g.index_select(feats, &rows);
            if self.arch.static_context {
                z_c.push(f);
            } else {
                ctx = self.context_vars(g, f, &ctx);
                z_c.push(*ctx.last().unwrap());
            }
            let e = g.constant(Self::draw_noise(b, rng));
            nz = self.noise_vars(g, e, &nz);
            z_n.push(nz[0]);
        }
        let z_c = g.concat(&z_c, 0);
        let z_n = g.concat(&z_n, 0);
        let index = batch.valid_index();
        let tm: Vec<usize> = index.iter().map(|&(bb, t)| t * b + bb).collect();
        let per: Vec<usize> = index.iter().map(|&(bb, _)| bb).collect();
        let zc = g.index_select(z_c, &tm);
        let zn = g.index_select(z_n, &tm);
        let zi = g.index_select(id.z_id, &per);
        let skips: Vec<Var> = id.skips.iter().map(|&s| g.index_select(s, &per)).collect();
        let frames = self.decode_vars(g, zi, zc, zn, &skips);
        Ok(GenForward { frames, z_id: id.z_id })
    }

    /// Encodes stills in inference mode.
    pub fn encode_identity(&self, stills: &[&Frame]) -> Result<IdentityCode> {
        let x = frames_to_tensor(stills)?;
        self.check_still(x.shape())?;
        let mut g = Graph::new(false);
        g.freeze(&self.params);
        let x = g.constant(x);
        let id = self.identity_vars(&mut g, x);
        Ok(IdentityCode { z_id: g.value(id.z_id).clone(), skips: id.skips.iter().map(|&s| g.value(s).clone()).collect() })
    }

    /// One audio window to its 256-dim feature (inference mode).
    pub fn encode_audio_frame(&self, window: &[f32]) -> Result<Vec<f64>> {
        let l = self.arch.window_len()?;
        if window.len() != l {
            return Err(Error::Shape(format!("audio window has {} samples, expected {l}", window.len())));
        }
        let mut g = Graph::new(false);
        g.freeze(&self.params);
        let x = g.constant(Tensor::new(vec![1, 1, 1, l], window.iter().map(|&v| v as f64).collect()));
        let f = self.audio_vars(&mut g, x);
        Ok(g.value(f).data().to_vec())
    }

    pub fn session(&self, still: &Frame, seed: u64) -> Result<Session<'_>> {
        let id = self.encode_identity(&[still])?;
        Ok(Session {
            generator: self,
            identity: id,
            context: vec![Tensor::zeros(vec![1, CONTEXT_DIM]); self.arch.context_layers],
            noise: vec![Tensor::zeros(vec![1, NOISE_DIM])],
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
        })
    }

    /// Frame-by-frame generation; one output frame per audio window.
    pub fn generate_sequence(&self, still: &Frame, audio: &AudioFrameSeq, seed: u64) -> Result<VideoSeq> {
        let mut s = self.session(still, seed)?;
        let frames = (0..audio.len()).map(|t| s.step(audio.frame(t))).collect::<Result<Vec<_>>>()?;
        VideoSeq::new(frames, self.arch.fps as f64)
    }

    /// Inference over a batch of sequences at once (used for validation).
    pub fn generate_batch(&self, batch: &GenBatch, seed: u64) -> Result<Vec<Vec<Frame>>> {
        let mut g = Graph::new(false);
        g.freeze(&self.params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = self.forward_batch(&mut g, batch, &mut rng)?;
        let data = g.value(out.frames);
        let mut videos: Vec<Vec<Frame>> = vec![Vec::new(); batch.batch()];
        for (row, (b, _)) in batch.valid_index().into_iter().enumerate() {
            videos[b].push(frame_from_rows(data, row)?);
        }
        Ok(videos)
    }
}

/// Streaming generator state for one sequence.
pub struct Session<'a> {
    generator: &'a Generator,
    identity: IdentityCode,
    context: Vec<Tensor>,
    noise: Vec<Tensor>,
    rng: ChaCha8Rng,
    steps: usize,
}

impl Session<'_> {
    pub fn identity(&self) -> &IdentityCode {
        &self.identity
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Latest context code `z_c`.
    pub fn context_code(&self) -> &[f64] {
        self.context.last().unwrap().data()
    }

    /// Latest noise code `z_n`.
    pub fn noise_code(&self) -> &[f64] {
        self.noise[0].data()
    }

    /// Consumes one audio window and emits the next frame.
    pub fn step(&mut self, window: &[f32]) -> Result<Frame> {
        let gen = self.generator;
        let l = gen.arch.window_len()?;
        if window.len() != l {
            return Err(Error::Shape(format!("audio window has {} samples, expected {l}", window.len())));
        }
        let mut g = Graph::new(false);
        g.freeze(&gen.params);
        let x = g.constant(Tensor::new(vec![1, 1, 1, l], window.iter().map(|&v| v as f64).collect()));
        let feat = gen.audio_vars(&mut g, x);
        let z_c = if gen.arch.static_context {
            feat
        } else {
            let state: Vec<Var> = self.context.iter().map(|t| g.constant(t.clone())).collect();
            let next = gen.context_vars(&mut g, feat, &state);
            self.context = next.iter().map(|&v| g.value(v).clone()).collect();
            *next.last().unwrap()
        };
        let e = g.constant(Generator::draw_noise(1, &mut self.rng));
        let ns: Vec<Var> = self.noise.iter().map(|t| g.constant(t.clone())).collect();
        let ns = gen.noise_vars(&mut g, e, &ns);
        self.noise = vec![g.value(ns[0]).clone()];
        let z_id = g.constant(self.identity.z_id.clone());
        let skips: Vec<Var> = self.identity.skips.iter().map(|s| g.constant(s.clone())).collect();
        let out = gen.decode_vars(&mut g, z_id, z_c, ns[0], &skips);
        self.steps += 1;
        frame_from_rows(g.value(out), 0)
    }
}

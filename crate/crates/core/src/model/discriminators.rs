use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchConfig;
use super::blocks::{flatten, ConvStack, Encoder};
use super::frames_to_tensor;
use crate::audio::AudioFrameSeq;
use crate::error::{Error, Result};
use crate::media::{Frame, VideoSeq};
use crate::nn::graph::sigmoid;
use crate::nn::layers::{Gru, Linear};
use crate::nn::{Graph, ParamStore, Tensor, Var};

/// Per-frame adversary on `frame ⊕ condition` (6 channels).
pub struct FrameDiscriminator {
    pub arch: ArchConfig,
    pub params: ParamStore,
    stack: ConvStack,
    head: Linear,
}

impl FrameDiscriminator {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let stack = ConvStack::image("frame_disc", 6, &arch, false);
        let (h, w) = arch.spatial(arch.depth - 1);
        let head = Linear::new("frame_disc.head", stack.out_channels() * h * w, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        stack.init(&mut params, &mut rng);
        head.init(&mut params, &mut rng);
        Ok(Self { arch, params, stack, head })
    }

    /// Logits `(n, 1)` for a 6-channel input `(n, 6, H, W)`.
    pub fn logits_input(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.shape(x);
        if s.len() != 4 || s[1] != 6 || s[2] != self.arch.height || s[3] != self.arch.width {
            return Err(Error::Shape(format!(
                "frame discriminator expects (n, 6, {}, {}) input, got {s:?}",
                self.arch.height, self.arch.width
            )));
        }
        let feats = self.stack.forward(g, &self.params, x);
        let flat = flatten(g, *feats.last().unwrap());
        Ok(self.head.forward(g, &self.params, flat))
    }

    pub fn logits(&self, g: &mut Graph, frames: Var, conditions: Var) -> Result<Var> {
        if g.shape(frames) != g.shape(conditions) {
            return Err(Error::Shape(format!(
                "frame {:?} and condition {:?} differ in shape",
                g.shape(frames),
                g.shape(conditions)
            )));
        }
        let x = g.concat(&[frames, conditions], 1);
        self.logits_input(g, x)
    }

    /// `D_img(frame | condition)` in inference mode.
    pub fn prob(&self, frame: &Frame, condition: &Frame) -> Result<f64> {
        let mut g = Graph::new(false);
        g.freeze(&self.params);
        let f = g.constant(frames_to_tensor(&[frame])?);
        let c = g.constant(frames_to_tensor(&[condition])?);
        let z = self.logits(&mut g, f, c)?;
        Ok(sigmoid(g.value(z).item()))
    }
}

/// Uniformly samples one time index and returns (real, fake, condition, t).
pub fn sample_real_fake_pair<'a>(
    real: &'a VideoSeq,
    fake: &'a VideoSeq,
    rng: &mut impl Rng,
) -> Result<(&'a Frame, &'a Frame, &'a Frame, usize)> {
    if real.len() != fake.len() {
        return Err(Error::Shape(format!("real video has {} frames, generated has {}", real.len(), fake.len())));
    }
    let t = rng.random_range(0..real.len());
    Ok((&real.frames()[t], &fake.frames()[t], &real.frames()[0], t))
}

/// Recurrent adversary over (video, audio) pairs.
pub struct SequenceDiscriminator {
    pub arch: ArchConfig,
    pub params: ParamStore,
    image: Encoder,
    audio: Encoder,
    gru: Gru,
    fc1: Linear,
    fc2: Linear,
}

/// Per-frame codes of a batch, time-major rows `t * B + b`.
pub struct SeqCodes {
    pub image: Var,
    pub audio: Var,
}

impl SequenceDiscriminator {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let d = arch.seq_code_dim;
        let image = Encoder::image("seq_disc.image", 3, &arch, d);
        let audio = Encoder::audio("seq_disc.audio", &arch, d);
        let gru = Gru::new("seq_disc.gru", 2 * d, arch.seq_hidden, 2);
        let fc1 = Linear::new("seq_disc.fc1", arch.seq_hidden, arch.seq_classifier_hidden);
        let fc2 = Linear::new("seq_disc.fc2", arch.seq_classifier_hidden, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        image.init(&mut params, &mut rng);
        audio.init(&mut params, &mut rng);
        gru.init(&mut params, &mut rng);
        fc1.init(&mut params, &mut rng);
        fc2.init(&mut params, &mut rng);
        Ok(Self { arch, params, image, audio, gru, fc1, fc2 })
    }

    /// Encodes frames `(n, 3, H, W)` and windows `(n, 1, 1, L)` row by row.
    pub fn encode(&self, g: &mut Graph, frames: Var, windows: Var) -> Result<SeqCodes> {
        let (fs, ws) = (g.shape(frames).to_vec(), g.shape(windows).to_vec());
        if fs.len() != 4 || fs[1..] != [3, self.arch.height, self.arch.width] {
            return Err(Error::Shape(format!("sequence discriminator frames have shape {fs:?}")));
        }
        if ws.len() != 4 || ws[0] != fs[0] || ws[3] != self.arch.window_len()? {
            return Err(Error::Shape(format!("audio windows {ws:?} do not match frames {fs:?}")));
        }
        let image = self.image.forward(g, &self.params, frames).0;
        let audio = self.audio.forward(g, &self.params, windows).0;
        Ok(SeqCodes { image, audio })
    }

    /// Runs the GRU over time-major code rows and classifies the final state.
    /// `image_rows[t][b]` / `audio_rows[t][b]` select the code row for sample `b` at step `t`.
    pub fn classify_rows(
        &self,
        g: &mut Graph,
        codes: &SeqCodes,
        image_rows: &[Vec<usize>],
        audio_rows: &[Vec<usize>],
        lengths: &[usize],
    ) -> Var {
        let b = lengths.len();
        let steps = image_rows.len();
        let mut state = self.gru.zero_state(g, b);
        for t in 0..steps {
            let xi = g.index_select(codes.image, &image_rows[t]);
            let xa = g.index_select(codes.audio, &audio_rows[t]);
            let x = g.concat(&[xi, xa], 1);
            let mask = lengths.iter().any(|&n| n <= t).then(|| {
                let m: Vec<f64> = lengths
                    .iter()
                    .flat_map(|&n| std::iter::repeat_n(if t < n { 1.0 } else { 0.0 }, self.arch.seq_hidden))
                    .collect();
                g.constant(Tensor::new(vec![b, self.arch.seq_hidden], m))
            });
            state = self.gru.step(g, &self.params, x, &state, mask);
        }
        let h = self.fc1.forward(g, &self.params, state[1]);
        let h = g.relu(h);
        self.fc2.forward(g, &self.params, h)
    }

    /// Logits `(B, 1)` for time-major frames and windows of `B` sequences.
    pub fn logits(&self, g: &mut Graph, frames: Var, windows: Var, lengths: &[usize], steps: usize) -> Result<Var> {
        let codes = self.encode(g, frames, windows)?;
        let b = lengths.len();
        if g.shape(frames)[0] != steps * b {
            return Err(Error::Shape(format!("expected {} rows for {b} sequences of {steps} steps", steps * b)));
        }
        let rows: Vec<Vec<usize>> = (0..steps).map(|t| (t * b..(t + 1) * b).collect()).collect();
        Ok(self.classify_rows(g, &codes, &rows, &rows, lengths))
    }

    /// `D_seq(video, audio)` in inference mode.
    pub fn prob(&self, video: &VideoSeq, audio: &AudioFrameSeq) -> Result<f64> {
        if video.len() != audio.len() {
            return Err(Error::Shape(format!("video has {} frames but audio has {} windows", video.len(), audio.len())));
        }
        let mut g = Graph::new(false);
        g.freeze(&self.params);
        let frames: Vec<&Frame> = video.frames().iter().collect();
        let f = g.constant(frames_to_tensor(&frames)?);
        let w = g.constant(Tensor::new(
            vec![audio.len(), 1, 1, audio.frame_len()],
            audio.data().iter().map(|&v| v as f64).collect(),
        ));
        let z = self.logits(&mut g, f, w, &[video.len()], video.len())?;
        Ok(sigmoid(g.value(z).item()))
    }
}

//! In-memory training samples and length-bucketed batches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{frame_audio, resample};
use crate::error::{Error, Result};
use crate::media::{load_sample, Frame, SampleManifestEntry};
use crate::model::{ArchConfig, GenBatch};
use crate::nn::Tensor;

/// One clip held in memory: frames as 8-bit RGB, audio as framed windows.
#[derive(Debug, Clone)]
pub struct ClipData {
    pub sample_id: String,
    pub subject_id: u32,
    pub height: usize,
    pub width: usize,
    rgb: Vec<Vec<u8>>,
    /// `len * L` samples of the peak-normalized waveform.
    pub windows: Vec<f32>,
    pub transcript: Option<Vec<String>>,
}

impl ClipData {
    pub fn len(&self) -> usize {
        self.rgb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rgb.is_empty()
    }

    pub fn frame(&self, t: usize) -> Frame {
        Frame::from_rgb8(self.height, self.width, &self.rgb[t]).expect("stored frame is valid")
    }

    pub fn frames(&self) -> Vec<Frame> {
        (0..self.len()).map(|t| self.frame(t)).collect()
    }

    pub fn still(&self) -> Frame {
        self.frame(0)
    }

    pub fn window_len(&self) -> usize {
        self.windows.len() / self.len()
    }
}

/// Reads and frames one manifest entry for `arch`. Audio at another rate is resampled.
pub fn load_clip(entry: &SampleManifestEntry, arch: &ArchConfig) -> Result<ClipData> {
    let s = load_sample(entry)?;
    if (s.video.height(), s.video.width()) != (arch.height, arch.width) {
        return Err(Error::Validation(format!(
            "{}: frames are {}x{}, model expects {}x{}",
            entry.sample_id,
            s.video.height(),
            s.video.width(),
            arch.height,
            arch.width
        )));
    }
    if (entry.fps - arch.fps as f64).abs() > 1e-9 {
        return Err(Error::Validation(format!("{}: video is {} fps, model expects {}", entry.sample_id, entry.fps, arch.fps)));
    }
    let clip = if s.audio.sample_rate() == arch.sample_rate { s.audio } else { resample(&s.audio, arch.sample_rate)? };
    let seq = frame_audio(&clip.peak_normalized(), arch.fps, arch.window_sec)?;
    let n = seq.len().min(s.video.len());
    if seq.len() != s.video.len() {
        log::warn!("{}: {} video frames but {} audio windows; using {n}", entry.sample_id, s.video.len(), seq.len());
    }
    let rgb = s.video.frames()[..n].iter().map(Frame::to_rgb8).collect();
    Ok(ClipData {
        sample_id: entry.sample_id.clone(),
        subject_id: entry.subject_id,
        height: arch.height,
        width: arch.width,
        rgb,
        windows: seq.data()[..n * seq.frame_len()].to_vec(),
        transcript: entry.transcript.clone(),
    })
}

pub fn load_clips(entries: &[SampleManifestEntry], arch: &ArchConfig) -> Result<Vec<ClipData>> {
    entries.iter().map(|e| load_clip(e, arch)).collect()
}

/// A padded batch. Real frames are stored for valid steps only, ordered like
/// [`GenBatch::valid_index`] (sample-major).
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub gen: GenBatch,
    /// `(N, 3, H, W)` ground-truth frames.
    pub real: Tensor,
    /// `(N, 1, 1, L)` windows aligned with `real`.
    pub windows: Tensor,
    /// Row of sample `b`'s first frame in `real`.
    pub offsets: Vec<usize>,
    pub clips: Vec<usize>,
}

impl TrainBatch {
    pub fn batch(&self) -> usize {
        self.gen.lengths.len()
    }

    pub fn valid_rows(&self) -> usize {
        self.real.dim(0)
    }

    /// Row holding step `t` of sample `b`, clamped to its last valid step.
    pub fn row(&self, b: usize, t: usize) -> usize {
        self.offsets[b] + t.min(self.gen.lengths[b] - 1)
    }

    /// Row table `[t][b]` walking every sample in order.
    pub fn ordered_rows(&self) -> Vec<Vec<usize>> {
        (0..self.gen.steps).map(|t| (0..self.batch()).map(|b| self.row(b, t)).collect()).collect()
    }
}

/// Per-channel colour remap: output channel `c` is `gain[c] * input[perm[c]] + offset[c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColourJitter {
    pub perm: [usize; 3],
    pub gain: [f32; 3],
    pub offset: [f32; 3],
}

impl ColourJitter {
    /// Random channel order, gain in [0.6, 1] and an offset that keeps [-1, 1] in range.
    pub fn draw(rng: &mut impl Rng) -> Self {
        let mut perm = [0, 1, 2];
        perm.shuffle(rng);
        let gain: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.6..=1.0));
        let offset = gain.map(|g| rng.random_range(-(1.0 - g)..=(1.0 - g)));
        Self { perm, gain, offset }
    }

    pub fn apply(&self, f: &Frame) -> Frame {
        let plane = f.height() * f.width();
        let src = f.data();
        let mut out = Vec::with_capacity(src.len());
        for c in 0..3 {
            let p = self.perm[c];
            out.extend(src[p * plane..(p + 1) * plane].iter().map(|&v| (self.gain[c] * v + self.offset[c]).clamp(-1.0, 1.0)));
        }
        Frame::new(f.height(), f.width(), out).expect("same size")
    }
}

/// Augmentation applied identically to every frame of one sample, still included.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Augment {
    pub flip: bool,
    pub colour: Option<ColourJitter>,
}

impl Augment {
    pub fn apply(&self, f: Frame) -> Frame {
        let f = if self.flip { f.flip_horizontal() } else { f };
        match &self.colour {
            Some(j) => j.apply(&f),
            None => f,
        }
    }
}

pub fn draw_augments(n: usize, mirror: bool, colour: bool, rng: &mut impl Rng) -> Vec<Augment> {
    (0..n)
        .map(|_| Augment {
            flip: mirror && rng.random_bool(0.5),
            colour: colour.then(|| ColourJitter::draw(rng)),
        })
        .collect()
}

/// Builds a batch from `clips[idx]`; `flip[b]` mirrors sample `b` left-right.
pub fn assemble(clips: &[ClipData], idx: &[usize], flip: &[bool]) -> Result<TrainBatch> {
    let augs: Vec<Augment> = flip.iter().map(|&f| Augment { flip: f, colour: None }).collect();
    assemble_augmented(clips, idx, &augs)
}

/// Builds a batch from `clips[idx]`, applying `augs[b]` (if present) to sample `b`.
pub fn assemble_augmented(clips: &[ClipData], idx: &[usize], augs: &[Augment]) -> Result<TrainBatch> {
    if idx.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let first = &clips[idx[0]];
    let (h, w, l) = (first.height, first.width, first.window_len());
    let lengths: Vec<usize> = idx.iter().map(|&i| clips[i].len()).collect();
    let steps = *lengths.iter().max().unwrap();
    let b = idx.len();
    let plane = 3 * h * w;
    let n: usize = lengths.iter().sum();
    let mut stills = Vec::with_capacity(b * plane);
    let mut real = Vec::with_capacity(n * plane);
    let mut valid_windows = Vec::with_capacity(n * l);
    let mut windows = vec![0.0; steps * b * l];
    let mut offsets = Vec::with_capacity(b);
    for (bb, &i) in idx.iter().enumerate() {
        let c = &clips[i];
        if (c.height, c.width, c.window_len()) != (h, w, l) {
            return Err(Error::Shape(format!("clip {} differs in size from {}", c.sample_id, first.sample_id)));
        }
        let aug = augs.get(bb).copied().unwrap_or_default();
        let get = |t: usize| aug.apply(c.frame(t));
        offsets.push(real.len() / plane);
        stills.extend(get(0).data().iter().map(|&v| v as f64));
        for t in 0..c.len() {
            real.extend(get(t).data().iter().map(|&v| v as f64));
            let win = &c.windows[t * l..(t + 1) * l];
            valid_windows.extend(win.iter().map(|&v| v as f64));
            let row = t * b + bb;
            windows[row * l..(row + 1) * l].iter_mut().zip(win).for_each(|(d, &s)| *d = s as f64);
        }
    }
    Ok(TrainBatch {
        gen: GenBatch {
            stills: Tensor::new(vec![b, 3, h, w], stills),
            windows: Tensor::new(vec![steps * b, 1, 1, l], windows),
            lengths,
            steps,
        },
        real: Tensor::new(vec![n, 3, h, w], real),
        windows: Tensor::new(vec![n, 1, 1, l], valid_windows),
        offsets,
        clips: idx.to_vec(),
    })
}

/// Shuffled, length-bucketed batch order for one epoch. Deterministic in `(seed, epoch)`.
pub fn epoch_batches(clips: &[ClipData], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = epoch_rng(seed, epoch, 0);
    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.shuffle(&mut rng);
    // sort within pools of several batches so padding stays small
    let pool = batch_size * 8;
    let mut batches = Vec::new();
    for chunk in order.chunks_mut(pool) {
        chunk.sort_by_key(|&i| clips[i].len());
        batches.extend(chunk.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(&mut rng);
    batches
}

/// Independent stream for `(seed, epoch, purpose)`.
pub fn epoch_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1));
    r.set_stream(stream);
    r
}

/// Fixed-order validation batches.
pub fn sequential_batches(n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    (0..n).collect::<Vec<_>>().chunks(batch_size).map(<[usize]>::to_vec).collect()
}

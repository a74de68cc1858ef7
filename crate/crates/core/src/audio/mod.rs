//! Raw waveforms and their per-video-frame windows.

mod resample;

pub use resample::resample;

use crate::error::{Error, Result};

/// Default audio window length in seconds.
pub const WINDOW_SEC: f64 = 0.16;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite audio sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Scales the clip so that max |s| = 1. Silent clips are returned unchanged.
    pub fn peak_normalized(&self) -> Self {
        let peak = self.samples.iter().fold(0f32, |m, s| m.max(s.abs()));
        if peak == 0.0 {
            return self.clone();
        }
        Self {
            samples: self.samples.iter().map(|s| (s / peak).clamp(-1.0, 1.0)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Overlapping windows, one per video frame, stored row-major as T × L.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrameSeq {
    data: Vec<f32>,
    len: usize,
    frame_len: usize,
    stride: usize,
    source_rate: u32,
}

impl AudioFrameSeq {
    pub fn from_windows(data: Vec<f32>, frame_len: usize, stride: usize, source_rate: u32) -> Result<Self> {
        if frame_len == 0 || stride == 0 || data.is_empty() || data.len() % frame_len != 0 {
            return Err(Error::Shape(format!(
                "{} samples do not form whole windows of length {frame_len}",
                data.len()
            )));
        }
        Ok(Self { len: data.len() / frame_len, data, frame_len, stride, source_rate })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.frame_len..(t + 1) * self.frame_len]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Windows `start..start + n`, zero-filled past the end.
    pub fn window_range(&self, start: usize, n: usize) -> Vec<f32> {
        let mut out = vec![0.0; n * self.frame_len];
        let avail = self.len.saturating_sub(start).min(n);
        out[..avail * self.frame_len]
            .copy_from_slice(&self.data[start * self.frame_len..(start + avail) * self.frame_len]);
        out
    }
}

/// Samples between consecutive windows. Rates must divide exactly.
pub fn compute_stride(rate_audio: u32, rate_video: u32) -> Result<usize> {
    if rate_audio == 0 || rate_video == 0 {
        return Err(Error::Config("audio and video rates must be positive".into()));
    }
    if rate_audio % rate_video != 0 {
        return Err(Error::Config(format!(
            "audio rate {rate_audio} Hz is not divisible by video rate {rate_video} fps; \
             resample the audio first (for example to {} Hz)",
            (rate_audio / rate_video).max(1) * rate_video
        )));
    }
    Ok((rate_audio / rate_video) as usize)
}

/// Window length in samples for `window_sec` at `rate`, which must be integral.
pub fn window_len(rate: u32, window_sec: f64) -> Result<usize> {
    let exact = window_sec * rate as f64;
    let l = exact.round();
    if !(window_sec > 0.0) || (exact - l).abs() > 1e-6 || l < 1.0 {
        return Err(Error::Config(format!(
            "window of {window_sec} s at {rate} Hz is not a whole number of samples"
        )));
    }
    Ok(l as usize)
}

/// Splits `clip` into T = ceil(n / stride) windows of L samples. The waveform is
/// zero-padded by (L - stride) / 2 on each side, plus tail padding for the last window.
pub fn frame_audio(clip: &AudioClip, rate_video: u32, window_sec: f64) -> Result<AudioFrameSeq> {
    if clip.is_empty() {
        return Err(Error::Validation("cannot frame an empty clip".into()));
    }
    let stride = compute_stride(clip.sample_rate, rate_video)?;
    let l = window_len(clip.sample_rate, window_sec)?;
    if l < stride {
        return Err(Error::Config(format!(
            "window of {l} samples is shorter than the stride of {stride}; windows would not overlap"
        )));
    }
    let n = clip.len();
    let t = n.div_ceil(stride);
    let left = (l - stride) / 2;
    let mut data = vec![0f32; t * l];
    for (i, row) in data.chunks_exact_mut(l).enumerate() {
        let start = (i * stride) as isize - left as isize;
        for (j, v) in row.iter_mut().enumerate() {
            let src = start + j as isize;
            if src >= 0 && (src as usize) < n {
                *v = clip.samples[src as usize];
            }
        }
    }
    AudioFrameSeq::from_windows(data, l, stride, clip.sample_rate)
}

pub fn rms_per_frame(seq: &AudioFrameSeq) -> Vec<f64> {
    seq.data
        .chunks_exact(seq.frame_len)
        .map(|w| (w.iter().map(|&s| s as f64 * s as f64).sum::<f64>() / w.len() as f64).sqrt())
        .collect()
}

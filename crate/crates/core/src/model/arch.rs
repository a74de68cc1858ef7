use serde::{Deserialize, Serialize};

use crate::audio::{compute_stride, window_len};
use crate::error::{Error, Result};

pub const ID_DIM: usize = 50;
pub const CONTEXT_DIM: usize = 256;
pub const NOISE_DIM: usize = 10;
pub const LATENT_DIM: usize = ID_DIM + CONTEXT_DIM + NOISE_DIM;
/// Variance of the Gaussian noise fed to the noise GRU.
pub const NOISE_VARIANCE: f64 = 0.6;

/// Shapes and widths shared by the generator and both discriminators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub height: usize,
    pub width: usize,
    /// Number of stride-2 image layers.
    pub depth: usize,
    pub channel_base: usize,
    pub channel_max: usize,
    pub sample_rate: u32,
    pub fps: u32,
    pub window_sec: f64,
    pub audio_channel_base: usize,
    pub audio_channel_max: usize,
    /// Stride-2 audio layers after the large-kernel first layer.
    pub audio_layers: usize,
    pub context_layers: usize,
    pub seq_code_dim: usize,
    pub seq_hidden: usize,
    pub seq_classifier_hidden: usize,
    /// Replace the context GRU by the per-window audio feature (static baseline).
    pub static_context: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            depth: 6,
            channel_base: 32,
            channel_max: 512,
            sample_rate: 50_000,
            fps: 25,
            window_sec: 0.16,
            audio_channel_base: 32,
            audio_channel_max: 512,
            audio_layers: 6,
            context_layers: 2,
            seq_code_dim: 256,
            seq_hidden: 256,
            seq_classifier_hidden: 128,
            static_context: false,
        }
    }
}

impl ArchConfig {
    /// Narrow widths for the toy dataset (8 kHz audio, 64x64 frames).
    pub fn toy() -> Self {
        Self {
            channel_base: 8,
            channel_max: 64,
            sample_rate: 8000,
            audio_channel_base: 8,
            audio_channel_max: 64,
            seq_code_dim: 64,
            seq_hidden: 64,
            seq_classifier_hidden: 32,
            ..Self::default()
        }
    }

    /// Smallest configuration: 16x16 frames, 2 kHz audio so windows hold 320 samples.
    pub fn tiny() -> Self {
        Self {
            height: 16,
            width: 16,
            depth: 4,
            channel_base: 4,
            channel_max: 8,
            sample_rate: 2000,
            audio_channel_base: 4,
            audio_channel_max: 8,
            seq_code_dim: 8,
            seq_hidden: 8,
            seq_classifier_hidden: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("depth and frame size must be positive".into()));
        }
        let div = 1usize << self.depth;
        if self.height % div != 0 || self.width % div != 0 {
            return Err(Error::Config(format!(
                "frame size {}x{} must be divisible by 2^{} for the encoder depth",
                self.height, self.width, self.depth
            )));
        }
        if self.channel_base == 0 || self.channel_max < self.channel_base {
            return Err(Error::Config("channel_max must be at least channel_base > 0".into()));
        }
        if self.audio_channel_base == 0 || self.audio_channel_max < self.audio_channel_base {
            return Err(Error::Config("audio_channel_max must be at least audio_channel_base > 0".into()));
        }
        if self.context_layers == 0 {
            return Err(Error::Config("context GRU needs at least one layer".into()));
        }
        compute_stride(self.sample_rate, self.fps)?;
        let l = self.window_len()?;
        let (k, s) = self.audio_first_kernel();
        if k == 0 || s == 0 || k > l {
            return Err(Error::Config(format!("audio window of {l} samples is too short")));
        }
        let mut len = (l - k) / s + 1;
        for _ in 0..self.audio_layers {
            if len < 2 {
                return Err(Error::Config(format!(
                    "audio window of {l} samples is too short for {} stride-2 layers",
                    self.audio_layers
                )));
            }
            len = (len + 2 - 4) / 2 + 1;
        }
        Ok(())
    }

    pub fn window_len(&self) -> Result<usize> {
        window_len(self.sample_rate, self.window_sec)
    }

    pub fn stride(&self) -> Result<usize> {
        compute_stride(self.sample_rate, self.fps)
    }

    /// Channels of image layer `k` (0-based): doubling from the base, capped.
    pub fn channels(&self, k: usize) -> usize {
        (self.channel_base << k.min(20)).min(self.channel_max)
    }

    pub fn audio_channels(&self, k: usize) -> usize {
        (self.audio_channel_base << k.min(20)).min(self.audio_channel_max)
    }

    /// Kernel and stride of the first audio layer: 250 / 50 at 8000 samples, scaled.
    pub fn audio_first_kernel(&self) -> (usize, usize) {
        let l = self.window_len().unwrap_or(0) as f64;
        let k = (250.0 * l / 8000.0).round().max(1.0) as usize;
        let s = (50.0 * l / 8000.0).round().max(1.0) as usize;
        (k, s)
    }

    /// Spatial size after `k + 1` stride-2 layers.
    pub fn spatial(&self, k: usize) -> (usize, usize) {
        (self.height >> (k + 1), self.width >> (k + 1))
    }
}

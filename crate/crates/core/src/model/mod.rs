//! Generator, discriminators and their shared building blocks.

pub mod arch;
pub mod blocks;
pub mod discriminators;
pub mod generator;

pub use arch::{ArchConfig, CONTEXT_DIM, ID_DIM, LATENT_DIM, NOISE_DIM, NOISE_VARIANCE};
pub use discriminators::{sample_real_fake_pair, FrameDiscriminator, SequenceDiscriminator};
pub use generator::{GenBatch, Generator, IdentityCode, Session};

use crate::error::{Error, Result};
use crate::media::Frame;
use crate::nn::Tensor;

/// Stacks frames into an `(n, 3, H, W)` tensor.
pub fn frames_to_tensor(frames: &[&Frame]) -> Result<Tensor> {
    let first = frames.first().ok_or_else(|| Error::Shape("no frames to stack".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(frames.len() * 3 * h * w);
    for f in frames {
        if (f.height(), f.width()) != (h, w) {
            return Err(Error::Shape(format!("frame {}x{} differs from {h}x{w}", f.height(), f.width())));
        }
        data.extend(f.data().iter().map(|&v| v as f64));
    }
    Ok(Tensor::new(vec![frames.len(), 3, h, w], data))
}

/// Row `i` of an `(n, 3, H, W)` tensor as a frame.
pub fn frame_from_rows(t: &Tensor, i: usize) -> Result<Frame> {
    let (h, w) = (t.dim(2), t.dim(3));
    let n = 3 * h * w;
    Frame::from_clamped(h, w, t.data()[i * n..(i + 1) * n].iter().copied())
}

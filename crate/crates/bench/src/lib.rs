//! Fixtures shared by the benchmarks.

use facesynth_core::audio::{frame_audio, AudioClip, AudioFrameSeq};
use facesynth_core::media::toy::{render_face, FaceGeometry};
use facesynth_core::media::{Frame, ToyConstants};
use facesynth_core::model::ArchConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn toy_frame(subject: u32, mouth: f64) -> Frame {
    let c = ToyConstants::new(64, 64, 25);
    render_face(&c, &FaceGeometry::for_subject(0, subject), mouth)
}

pub fn noise_clip(arch: &ArchConfig, frames: usize, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = frames * arch.stride().expect("valid arch");
    AudioClip::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect(), arch.sample_rate).expect("non-empty clip")
}

pub fn noise_windows(arch: &ArchConfig, frames: usize, seed: u64) -> AudioFrameSeq {
    frame_audio(&noise_clip(arch, frames, seed), arch.fps, arch.window_sec).expect("valid framing")
}

use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

const HALF_TAPS: f64 = 16.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Hann-windowed sinc resampling to `target_rate`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Config("target sample rate must be positive".into()));
    }
    let src = clip.sample_rate();
    if src == target_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / src as f64;
    let cutoff = ratio.min(1.0);
    let half = HALF_TAPS / cutoff;
    let s = clip.samples();
    let n_out = ((s.len() as f64) * ratio).round().max(1.0) as usize;
    let out = (0..n_out)
        .map(|i| {
            let x = i as f64 / ratio;
            let lo = (x - half).ceil().max(0.0) as usize;
            let hi = ((x + half).floor() as usize).min(s.len().saturating_sub(1));
            let mut acc = 0.0;
            for (k, &v) in s.iter().enumerate().take(hi + 1).skip(lo) {
                let d = x - k as f64;
                let w = 0.5 + 0.5 * (PI * d / half).cos();
                acc += v as f64 * cutoff * sinc(cutoff * d) * w;
            }
            acc.clamp(-1.0, 1.0) as f32
        })
        .collect();
    AudioClip::new(out, target_rate)
}

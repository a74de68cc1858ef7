//! Procedural talking-face dataset with a closed-form mouth/audio relationship.
//!
//! Each subject has a fixed face (colours, outline, eyes). The mouth is a dark
//! rectangle at a canonical position whose height at frame `t` is
//! `h_min + (h_max - h_min) * min(1, rms_t / rho)`, where `rms_t` is the RMS of
//! audio window `t` after peak normalization. Words are tone bursts whose
//! duration in frames identifies the word.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{write_frames, write_wav};
use super::frame::{Frame, VideoSeq};
use super::manifest::{write_manifest, ManifestHeader, SampleManifestEntry};
use super::split::SplitSpec;
use crate::audio::{frame_audio, rms_per_frame, AudioClip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyWord {
    pub word: String,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConstants {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub sample_rate: u32,
    pub fps: u32,
    pub window_sec: f64,
    pub rho: f64,
    pub h_min_frac: f64,
    pub h_max_frac: f64,
    pub mouth_center_frac: f64,
    pub mouth_half_width_frac: f64,
    pub mouth_rgb: [u8; 3],
    pub open_threshold: f64,
    pub vocabulary: Vec<ToyWord>,
}

impl ToyConstants {
    pub fn new(height: usize, width: usize, frames: usize) -> Self {
        let vocabulary = [("bin", 2), ("lay", 4), ("place", 6), ("set", 8)]
            .into_iter()
            .map(|(w, f)| ToyWord { word: w.into(), frames: f })
            .collect();
        Self {
            height,
            width,
            frames,
            sample_rate: 8000,
            fps: 25,
            window_sec: 0.16,
            rho: 0.6,
            h_min_frac: 0.02,
            h_max_frac: 0.22,
            mouth_center_frac: 0.75,
            mouth_half_width_frac: 0.125,
            mouth_rgb: [140, 20, 26],
            open_threshold: 0.5,
            vocabulary,
        }
    }

    pub fn stride(&self) -> usize {
        (self.sample_rate / self.fps) as usize
    }

    /// Mouth height in pixels for a window RMS.
    pub fn mouth_height(&self, rms: f64) -> f64 {
        let h = self.height as f64;
        h * (self.h_min_frac + (self.h_max_frac - self.h_min_frac) * (rms / self.rho).min(1.0))
    }

    /// Height in pixels mapped back to openness in `[0, 1]`.
    pub fn openness(&self, height_px: f64) -> f64 {
        let h = self.height as f64;
        ((height_px / h - self.h_min_frac) / (self.h_max_frac - self.h_min_frac)).clamp(0.0, 1.0)
    }

    fn mouth_center(&self) -> f64 {
        self.mouth_center_frac * self.height as f64
    }

    /// Columns covered by the mouth.
    pub fn mouth_cols(&self) -> std::ops::Range<usize> {
        let half = (self.mouth_half_width_frac * self.width as f64).round().max(1.0) as usize;
        self.width / 2 - half..self.width / 2 + half
    }

    /// Rows that can contain mouth pixels.
    pub fn mouth_rows(&self) -> std::ops::Range<usize> {
        let half = self.h_max_frac * self.height as f64 / 2.0;
        let top = (self.mouth_center() - half).floor().max(0.0) as usize;
        let bottom = ((self.mouth_center() + half).ceil() as usize).min(self.height);
        top..bottom
    }

    /// Skin reference pixel just above the mouth band.
    pub fn reference_pixel(&self) -> (usize, usize) {
        (self.mouth_rows().start.saturating_sub(2), self.width / 2)
    }

    fn mouth_color(&self) -> [f32; 3] {
        self.mouth_rgb.map(u8_to_unit)
    }

    fn word_for_duration(&self, frames: usize) -> &ToyWord {
        self.vocabulary
            .iter()
            .min_by_key(|w| (w.frames.abs_diff(frames), w.frames))
            .expect("vocabulary is never empty")
    }
}

fn u8_to_unit(v: u8) -> f32 {
    (2.0 * v as f64 / 255.0 - 1.0) as f32
}

/// Per-subject appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceGeometry {
    pub background: [u8; 3],
    pub skin: [u8; 3],
    pub eye: [u8; 3],
    pub face_rx: f64,
    pub face_ry: f64,
    pub face_cy: f64,
    pub eye_dx: f64,
    pub eye_y: f64,
    pub eye_r: f64,
    pub brow_thickness: f64,
}

impl FaceGeometry {
    pub fn for_subject(seed: u64, subject: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d_u64.wrapping_mul(subject as u64 + 1));
        let mut byte = |lo: u8, hi: u8| rng.random_range(lo..=hi);
        let background = [byte(20, 110), byte(40, 140), byte(60, 170)];
        let skin = [byte(190, 240), byte(140, 190), byte(110, 160)];
        let eye = [byte(10, 60), byte(10, 50), byte(20, 70)];
        Self {
            background,
            skin,
            eye,
            face_rx: rng.random_range(0.34..0.42),
            face_ry: rng.random_range(0.42..0.48),
            face_cy: rng.random_range(0.49..0.52),
            eye_dx: rng.random_range(0.13..0.19),
            eye_y: rng.random_range(0.33..0.40),
            eye_r: rng.random_range(0.04..0.065),
            brow_thickness: rng.random_range(0.015..0.035),
        }
    }
}

/// Renders one frame with the given mouth height in pixels.
pub fn render_face(c: &ToyConstants, g: &FaceGeometry, mouth_height: f64) -> Frame {
    let (h, w) = (c.height, c.width);
    let (hf, wf) = (h as f64, w as f64);
    let mut img = Frame::filled(h, w, g.background.map(u8_to_unit)).expect("even toy size");
    let skin = g.skin.map(u8_to_unit);
    let eye = g.eye.map(u8_to_unit);
    let (fcx, fcy) = (wf / 2.0, g.face_cy * hf);
    let (rx, ry) = (g.face_rx * wf, g.face_ry * hf);
    let eye_r = g.eye_r * wf;
    let brow_top = g.eye_y * hf - eye_r - 2.0 * g.brow_thickness * hf;
    let brow_bottom = brow_top + g.brow_thickness * hf;
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = ((px - fcx) / rx).powi(2) + ((py - fcy) / ry).powi(2) <= 1.0;
            if !inside {
                continue;
            }
            let mut col = skin;
            for side in [-1.0, 1.0] {
                let ex = fcx + side * g.eye_dx * wf;
                let ey = g.eye_y * hf;
                if (px - ex).powi(2) + (py - ey).powi(2) <= eye_r * eye_r {
                    col = eye;
                }
                if py >= brow_top && py < brow_bottom && (px - ex).abs() <= 1.6 * eye_r {
                    col = eye;
                }
            }
            for (ch, v) in col.iter().enumerate() {
                img.set(ch, y, x, *v);
            }
        }
    }
    let mouth = c.mouth_color();
    let (y0, y1) = (c.mouth_center() - mouth_height / 2.0, c.mouth_center() + mouth_height / 2.0);
    for y in c.mouth_rows() {
        let cov = ((y as f64 + 1.0).min(y1) - (y as f64).max(y0)).max(0.0);
        if cov == 0.0 {
            continue;
        }
        for x in c.mouth_cols() {
            for ch in 0..3 {
                let v = skin[ch] as f64 * (1.0 - cov) + mouth[ch] as f64 * cov;
                img.set(ch, y, x, v as f32);
            }
        }
    }
    img
}

/// Mouth height in pixels recovered from a rendered (or generated) frame.
pub fn extract_mouth_height(c: &ToyConstants, frame: &Frame) -> f64 {
    let (ry, rx) = c.reference_pixel();
    let mouth = c.mouth_color();
    let skin: Vec<f64> = (0..3).map(|ch| frame.get(ch, ry, rx) as f64).collect();
    let ch = (0..3)
        .max_by(|&a, &b| {
            (skin[a] - mouth[a] as f64).abs().total_cmp(&(skin[b] - mouth[b] as f64).abs())
        })
        .unwrap();
    let denom = skin[ch] - mouth[ch] as f64;
    if denom.abs() < 1e-3 {
        return c.h_min_frac * c.height as f64;
    }
    let cols = c.mouth_cols();
    let n = cols.len() as f64;
    let mut total = 0.0;
    for x in cols {
        for y in c.mouth_rows() {
            total += ((skin[ch] - frame.get(ch, y, x) as f64) / denom).clamp(0.0, 1.0);
        }
    }
    total / n
}

/// Reads a word sequence off a toy video from mouth openness alone.
pub fn toy_lipread(c: &ToyConstants, frames: &[Frame]) -> Vec<String> {
    let open: Vec<bool> = frames
        .iter()
        .map(|f| c.openness(extract_mouth_height(c, f)) > c.open_threshold)
        .collect();
    let mut words = Vec::new();
    let mut run = 0usize;
    for o in open.iter().copied().chain(std::iter::once(false)) {
        if o {
            run += 1;
        } else {
            if run >= 2 {
                words.push(c.word_for_duration(run - 2).word.clone());
            }
            run = 0;
        }
    }
    words
}

#[derive(Debug, Clone)]
pub struct ToySample {
    pub words: Vec<String>,
    pub audio: AudioClip,
    pub video: VideoSeq,
    pub mouth_heights: Vec<f64>,
}

/// Synthesizes the waveform for a word layout. Returns samples and the transcript.
pub fn synth_audio(c: &ToyConstants, rng: &mut impl Rng) -> (Vec<f32>, Vec<String>) {
    let stride = c.stride();
    let t = c.frames;
    let mut samples = vec![0f64; t * stride];
    let mut words = Vec::new();
    let mut start = rng.random_range(3..=4usize);
    loop {
        let fits: Vec<&ToyWord> = c.vocabulary.iter().filter(|w| start + w.frames < t).collect();
        if fits.is_empty() {
            break;
        }
        let w = fits[rng.random_range(0..fits.len())];
        let f0 = 50.0 * rng.random_range(2..=6u32) as f64;
        let amp = rng.random_range(0.85..1.0);
        for (i, s) in samples[start * stride..(start + w.frames) * stride].iter_mut().enumerate() {
            let ph = 2.0 * PI * f0 * i as f64 / c.sample_rate as f64;
            *s = amp * (ph.sin() + 0.3 * (2.0 * ph).sin());
        }
        words.push(w.word.clone());
        start += w.frames + rng.random_range(4..=6usize);
    }
    let peak = samples.iter().fold(0f64, |m, s| m.max(s.abs()));
    let samples = samples.iter().map(|&s| if peak > 0.0 { s / peak } else { 0.0 } as f32).collect();
    (samples, words)
}

/// Mouth heights implied by a clip: RMS of each peak-normalized window.
pub fn mouth_heights_for(c: &ToyConstants, clip: &AudioClip) -> Result<Vec<f64>> {
    let seq = frame_audio(&clip.peak_normalized(), c.fps, c.window_sec)?;
    Ok(rms_per_frame(&seq).into_iter().map(|r| c.mouth_height(r)).collect())
}

pub fn render_sample(c: &ToyConstants, g: &FaceGeometry, clip: &AudioClip) -> Result<(VideoSeq, Vec<f64>)> {
    let heights = mouth_heights_for(c, clip)?;
    let frames = heights.iter().map(|&h| render_face(c, g, h)).collect();
    Ok((VideoSeq::new(frames, c.fps as f64)?, heights))
}

pub fn synth_sample(c: &ToyConstants, g: &FaceGeometry, rng: &mut impl Rng) -> Result<ToySample> {
    let (samples, words) = synth_audio(c, rng);
    let audio = AudioClip::new(samples, c.sample_rate)?;
    let (video, mouth_heights) = render_sample(c, g, &audio)?;
    Ok(ToySample { words, audio, video, mouth_heights })
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub manifest_path: PathBuf,
    pub header: ManifestHeader,
    pub entries: Vec<SampleManifestEntry>,
}

/// Subjects `1..=n-2` train, `n-1` validation, `n` test (fewer subjects collapse splits).
pub fn toy_split(n_subjects: u32) -> SplitSpec {
    match n_subjects {
        0 | 1 => SplitSpec::new(1..=n_subjects, [], []).unwrap(),
        2 => SplitSpec::new([1], [2], []).unwrap(),
        n => SplitSpec::new(1..=n - 2, [n - 1], [n]).unwrap(),
    }
}

pub fn make_toy_dataset(
    dir: &Path,
    n_subjects: u32,
    n_samples: usize,
    frames: usize,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<ToyDataset> {
    if n_subjects == 0 || n_samples == 0 || frames == 0 {
        return Err(Error::Config("toy dataset counts must be at least 1".into()));
    }
    if height == 0 || width == 0 || height % 2 != 0 || width % 2 != 0 || height < 8 || width < 8 {
        return Err(Error::Config(format!("toy frame size {height}x{width} must be even and at least 8")));
    }
    let c = ToyConstants::new(height, width, frames);
    std::fs::create_dir_all(dir)?;
    let faces: Vec<FaceGeometry> = (1..=n_subjects).map(|s| FaceGeometry::for_subject(seed, s)).collect();
    let mut entries = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let subject = (i % n_subjects as usize) as u32 + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
        let s = synth_sample(&c, &faces[subject as usize - 1], &mut rng)?;
        let id = format!("s{subject:02}_{i:05}");
        let rel = PathBuf::from(format!("s{subject:02}")).join(&id);
        write_frames(&dir.join(&rel).join("frames"), &s.video)?;
        write_wav(&dir.join(&rel).join("audio.wav"), &s.audio)?;
        entries.push(SampleManifestEntry {
            sample_id: id,
            subject_id: subject,
            frames_path: dir.join(&rel).join("frames"),
            audio_path: dir.join(&rel).join("audio.wav"),
            transcript: Some(s.words),
            fps: c.fps as f64,
            sample_rate: c.sample_rate,
        });
    }
    let header = ManifestHeader { dataset: "toy".into(), split: Some(toy_split(n_subjects)), toy: Some(c) };
    let manifest_path = dir.join("manifest.jsonl");
    write_manifest(&manifest_path, Some(&header), &entries)?;
    Ok(ToyDataset { manifest_path, header, entries })
}

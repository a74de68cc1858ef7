use crate::error::{Error, Result};

/// An RGB image with values in `[-1, 1]`, stored planar (channel, row, column).
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Frame {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || height % 2 != 0 || width % 2 != 0 {
            return Err(Error::Shape(format!("frame size {height}x{width} must be nonzero and even")));
        }
        if data.len() != 3 * height * width {
            return Err(Error::Shape(format!(
                "frame data has {} values, expected {}",
                data.len(),
                3 * height * width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Builds a frame from arbitrary reals, clamping into `[-1, 1]`.
    pub fn from_clamped(height: usize, width: usize, data: impl IntoIterator<Item = f64>) -> Result<Self> {
        let data = data.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect();
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let p = height * width;
        let mut data = Vec::with_capacity(3 * p);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, p));
        }
        Self::new(height, width, data)
    }

    /// Maps 8-bit interleaved RGB linearly from `[0, 255]` to `[-1, 1]`.
    pub fn from_rgb8(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * height * width {
            return Err(Error::Shape(format!("expected {} bytes, got {}", 3 * height * width, rgb.len())));
        }
        let p = height * width;
        let mut data = vec![0f32; 3 * p];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * p + i] = (2.0 * px[c] as f64 / 255.0 - 1.0) as f32;
            }
        }
        Self::new(height, width, data)
    }

    /// Inverse of [`Frame::from_rgb8`], rounding to the nearest level.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let p = self.height * self.width;
        let mut out = vec![0u8; 3 * p];
        for i in 0..p {
            for c in 0..3 {
                out[3 * i + c] = to_level(self.data[c * p + i]);
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        assert!((-1.0..=1.0).contains(&v));
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.width) {
            data.extend(row.iter().rev());
        }
        Self { height: self.height, width: self.width, data }
    }

    /// ITU-R 601 luma on the 8-bit scale `[0, 255]`.
    pub fn luma(&self) -> Vec<f64> {
        let p = self.height * self.width;
        (0..p)
            .map(|i| {
                let lvl = |c: usize| (self.data[c * p + i] as f64 + 1.0) * 127.5;
                0.299 * lvl(0) + 0.587 * lvl(1) + 0.114 * lvl(2)
            })
            .collect()
    }

    /// Pixel values on the 8-bit scale, planar.
    pub fn levels(&self) -> Vec<f64> {
        self.data.iter().map(|&v| (v as f64 + 1.0) * 127.5).collect()
    }
}

fn to_level(v: f32) -> u8 {
    ((v as f64 + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// An ordered sequence of equally sized frames.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSeq {
    frames: Vec<Frame>,
    fps: f64,
}

impl VideoSeq {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Validation("video must contain at least one frame".into()));
        }
        if !(fps > 0.0) {
            return Err(Error::Validation(format!("fps must be positive, got {fps}")));
        }
        let (h, w) = (frames[0].height, frames[0].width);
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.height != h || f.width != w) {
            return Err(Error::Validation(format!(
                "frame {i} is {}x{}, expected {h}x{w}",
                f.height, f.width
            )));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }
}

/// Flips every frame left-right.
pub fn mirror_augment(video: &VideoSeq) -> VideoSeq {
    VideoSeq {
        frames: video.frames.iter().map(Frame::flip_horizontal).collect(),
        fps: video.fps,
    }
}

//! Face-embedding and lipreading backends.

use crate::error::{Error, Result};
use crate::media::toy::{toy_lipread, ToyConstants};
use crate::media::{write_frames, write_png, CommandHook, Frame, VideoSeq};

pub trait FaceEmbedder {
    fn name(&self) -> &str;
    fn embed(&self, frame: &Frame) -> Result<Vec<f64>>;
}

pub trait Lipreader {
    fn name(&self) -> &str;
    fn transcribe(&self, video: &VideoSeq) -> Result<Vec<String>>;
}

/// 16x16 area-averaged grayscale image in `[0, 1]`, flattened.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubEmbedder;

pub const STUB_SIDE: usize = 16;

impl FaceEmbedder for StubEmbedder {
    fn name(&self) -> &str {
        "stub"
    }

    fn embed(&self, frame: &Frame) -> Result<Vec<f64>> {
        let (h, w) = (frame.height(), frame.width());
        if h < STUB_SIDE || w < STUB_SIDE {
            return Err(Error::Shape(format!("stub embedder needs at least {STUB_SIDE}x{STUB_SIDE} frames")));
        }
        let l = frame.luma();
        let mut sum = vec![0.0; STUB_SIDE * STUB_SIDE];
        let mut count = vec![0usize; STUB_SIDE * STUB_SIDE];
        for y in 0..h {
            for x in 0..w {
                let bin = (y * STUB_SIDE / h) * STUB_SIDE + x * STUB_SIDE / w;
                sum[bin] += l[y * w + x] / 255.0;
                count[bin] += 1;
            }
        }
        Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
    }
}

/// Reads mouth openness off toy frames.
#[derive(Debug, Clone)]
pub struct ToyLipreader {
    pub constants: ToyConstants,
}

impl Lipreader for ToyLipreader {
    fn name(&self) -> &str {
        "toy"
    }

    fn transcribe(&self, video: &VideoSeq) -> Result<Vec<String>> {
        if (video.height(), video.width()) != (self.constants.height, self.constants.width) {
            return Err(Error::Shape(format!(
                "toy lipreader expects {}x{} frames",
                self.constants.height, self.constants.width
            )));
        }
        Ok(toy_lipread(&self.constants, video.frames()))
    }
}

/// External embedder: `{in}` is a PNG path; stdout holds the numbers of the embedding.
#[derive(Debug, Clone)]
pub struct CommandEmbedder {
    pub hook: CommandHook,
}

impl FaceEmbedder for CommandEmbedder {
    fn name(&self) -> &str {
        self.hook.template()
    }

    fn embed(&self, frame: &Frame) -> Result<Vec<f64>> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("face.png");
        write_png(&p, frame)?;
        let out = self.hook.run(&[("in", &p.to_string_lossy())])?;
        let v = out
            .split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| Error::Backend(format!("embedder printed '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if v.is_empty() {
            return Err(Error::Backend("embedder printed no numbers".into()));
        }
        Ok(v)
    }
}

/// External lipreader: `{in}` is a directory of `frame_%05d.png`; stdout holds the words.
#[derive(Debug, Clone)]
pub struct CommandLipreader {
    pub hook: CommandHook,
}

impl Lipreader for CommandLipreader {
    fn name(&self) -> &str {
        self.hook.template()
    }

    fn transcribe(&self, video: &VideoSeq) -> Result<Vec<String>> {
        let dir = tempfile::tempdir()?;
        write_frames(dir.path(), video)?;
        let out = self.hook.run(&[("in", &dir.path().to_string_lossy()), ("fps", &video.fps().to_string())])?;
        Ok(out.split_whitespace().map(str::to_string).collect())
    }
}

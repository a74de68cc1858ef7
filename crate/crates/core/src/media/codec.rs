//! PNG frame and 16-bit PCM WAV codecs.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::frame::{Frame, VideoSeq};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image(format!("{}: {e}", path.display()))
}

pub fn read_png(path: &Path) -> Result<Frame> {
    let file = fs::File::open(path).map_err(|e| image_err(path, e))?;
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| image_err(path, e))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| image_err(path, "image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(|e| image_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let bytes = &buf[..info.buffer_size()];
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => bytes.to_vec(),
        png::ColorType::Rgba => bytes.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => bytes.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => bytes.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => return Err(image_err(path, "unexpanded palette image")),
    };
    Frame::from_rgb8(h, w, &rgb)
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| image_err(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), frame.width() as u32, frame.height() as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| image_err(path, e))?;
    writer.write_image_data(&frame.to_rgb8()).map_err(|e| image_err(path, e))?;
    writer.finish().map_err(|e| image_err(path, e))?;
    Ok(())
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// PNG files of a frame directory, sorted lexicographically.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_frames(dir: &Path, fps: f64) -> Result<VideoSeq> {
    let files = list_frames(dir)?;
    if files.is_empty() {
        return Err(Error::Validation(format!("{}: no PNG frames", dir.display())));
    }
    let frames = files.iter().map(|p| read_png(p)).collect::<Result<Vec<_>>>()?;
    VideoSeq::new(frames, fps).map_err(|e| Error::Validation(format!("{}: {e}", dir.display())))
}

pub fn write_frames(dir: &Path, video: &VideoSeq) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    video
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = dir.join(frame_file_name(i));
            write_png(&p, f)?;
            Ok(p)
        })
        .collect()
}

fn wav_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{}: {msg}", path.display()))
}

/// Reads a mono 16-bit PCM (or 32-bit float) WAV file into `[-1, 1]` samples.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }
    let mut off = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let len = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body = bytes.get(off + 8..off + 8 + len).ok_or_else(|| wav_err(path, "truncated chunk"))?;
        match id {
            b"fmt " if len >= 16 => {
                let u16_at = |i: usize| u16::from_le_bytes(body[i..i + 2].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                fmt = Some((u16_at(0), u16_at(2), rate, u16_at(14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        off += 8 + len + (len & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    if channels != 1 {
        return Err(wav_err(path, format!("expected mono audio, found {channels} channels")));
    }
    let samples: Vec<f32> = match (format, bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()).clamp(-1.0, 1.0))
            .collect(),
        _ => return Err(wav_err(path, format!("unsupported encoding (format {format}, {bits} bits)"))),
    };
    AudioClip::new(samples, rate)
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let n = clip.samples().len();
    let mut buf = Vec::with_capacity(44 + 2 * n);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&((36 + 2 * n) as u32).to_le_bytes());
    buf.extend_from_slice(b"WAVEfmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&clip.sample_rate().to_le_bytes());
    buf.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    buf.extend_from_slice(&2u16.to_le_bytes());
    buf.extend_from_slice(&16u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&((2 * n) as u32).to_le_bytes());
    for &s in clip.samples() {
        let v = (s as f64 * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

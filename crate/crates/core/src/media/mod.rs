//! Dataset manifests, media codecs, preprocessing and the toy dataset.

pub mod codec;
pub mod frame;
pub mod hook;
pub mod manifest;
pub mod split;
pub mod toy;

pub use codec::{read_frames, read_png, read_wav, write_frames, write_png, write_wav};
pub use frame::{mirror_augment, Frame, VideoSeq};
pub use hook::CommandHook;
pub use manifest::{load_manifest, read_manifest, write_manifest, Manifest, ManifestHeader, SampleManifestEntry};
pub use split::{split_subjects, SplitEntries, SplitPart, SplitSpec};
pub use toy::{make_toy_dataset, ToyConstants, ToyDataset};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Sample {
    pub video: VideoSeq,
    pub audio: AudioClip,
    pub still: Frame,
}

/// Loads frames and audio for one entry. The still image is the first frame.
pub fn load_sample(entry: &SampleManifestEntry) -> Result<Sample> {
    let video = read_frames(&entry.frames_path, entry.fps)?;
    let audio = read_wav(&entry.audio_path)?;
    if audio.sample_rate() != entry.sample_rate {
        return Err(Error::Validation(format!(
            "{}: audio is {} Hz but the manifest says {} Hz",
            entry.sample_id,
            audio.sample_rate(),
            entry.sample_rate
        )));
    }
    let still = video.frames()[0].clone();
    Ok(Sample { video, audio, still })
}

/// Writes a sample's frames and audio to the paths named by `entry`.
pub fn write_sample(entry: &SampleManifestEntry, video: &VideoSeq, audio: &AudioClip) -> Result<()> {
    write_frames(&entry.frames_path, video)?;
    if let Some(parent) = entry.audio_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_wav(&entry.audio_path, audio)
}

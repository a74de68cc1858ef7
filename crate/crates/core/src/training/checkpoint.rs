//! Checkpoint directories: one tensor file per parameter plus `meta.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{ArchConfig, FrameDiscriminator, Generator, SequenceDiscriminator};
use crate::nn::Adam;

pub const GENERATOR_PREFIX: &str = "generator.";
pub const FRAME_DISC_PREFIX: &str = "frame_disc.";
pub const SEQ_DISC_PREFIX: &str = "seq_disc.";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: ArchConfig,
    pub seed: u64,
    /// Last completed epoch (0 = untrained).
    pub epoch: usize,
    pub step: u64,
    pub best_ssim: f64,
    pub best_epoch: usize,
    pub stale_epochs: usize,
    pub config: Option<TrainConfig>,
}

/// All trainable state of a run.
pub struct Networks {
    pub generator: Generator,
    pub frame_disc: FrameDiscriminator,
    pub seq_disc: SequenceDiscriminator,
}

pub struct Optimizers {
    pub generator: Adam,
    pub frame_disc: Adam,
    pub seq_disc: Adam,
}

impl Networks {
    pub fn new(arch: &ArchConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            generator: Generator::new(arch.clone(), seed)?,
            frame_disc: FrameDiscriminator::new(arch.clone(), seed.wrapping_add(1))?,
            seq_disc: SequenceDiscriminator::new(arch.clone(), seed.wrapping_add(2))?,
        })
    }
}

fn opt_prefix(net: &str) -> String {
    format!("opt.{net}")
}

pub fn save_checkpoint(dir: &Path, meta: &CheckpointMeta, nets: &Networks, opts: Option<&Optimizers>) -> Result<()> {
    // write into a sibling directory and swap, so a crash never leaves a half-written checkpoint
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    std::fs::create_dir_all(&tmp)?;
    nets.generator.params.save(&tmp, GENERATOR_PREFIX)?;
    nets.frame_disc.params.save(&tmp, FRAME_DISC_PREFIX)?;
    nets.seq_disc.params.save(&tmp, SEQ_DISC_PREFIX)?;
    if let Some(o) = opts {
        o.generator.save(&tmp, &opt_prefix(GENERATOR_PREFIX), &nets.generator.params)?;
        o.frame_disc.save(&tmp, &opt_prefix(FRAME_DISC_PREFIX), &nets.frame_disc.params)?;
        o.seq_disc.save(&tmp, &opt_prefix(SEQ_DISC_PREFIX), &nets.seq_disc.params)?;
    }
    std::fs::write(tmp.join(META_FILE), serde_json::to_string_pretty(meta)?)?;
    if dir.exists() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::rename(&tmp, dir)?;
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join(META_FILE);
    let s = std::fs::read_to_string(&path)
        .map_err(|e| Error::Validation(format!("{} is not a checkpoint: {e}", dir.display())))?;
    serde_json::from_str(&s).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

pub fn load_networks(dir: &Path) -> Result<(CheckpointMeta, Networks)> {
    let meta = read_meta(dir)?;
    let mut nets = Networks::new(&meta.arch, meta.seed)?;
    nets.generator.params.load(dir, GENERATOR_PREFIX)?;
    nets.frame_disc.params.load(dir, FRAME_DISC_PREFIX)?;
    nets.seq_disc.params.load(dir, SEQ_DISC_PREFIX)?;
    Ok((meta, nets))
}

pub fn load_optimizers(dir: &Path, nets: &Networks) -> Result<Optimizers> {
    Ok(Optimizers {
        generator: Adam::load(dir, &opt_prefix(GENERATOR_PREFIX), &nets.generator.params)?,
        frame_disc: Adam::load(dir, &opt_prefix(FRAME_DISC_PREFIX), &nets.frame_disc.params)?,
        seq_disc: Adam::load(dir, &opt_prefix(SEQ_DISC_PREFIX), &nets.seq_disc.params)?,
    })
}

/// Resolves a checkpoint argument: a checkpoint directory itself, or a run
/// directory containing `best/` (preferred) or `last/`.
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join(META_FILE).is_file() {
        return Ok(path.to_path_buf());
    }
    for sub in ["best", "last"] {
        if path.join(sub).join(META_FILE).is_file() {
            return Ok(path.join(sub));
        }
    }
    Err(Error::Validation(format!("no checkpoint found at {}", path.display())))
}

/// Loads only the generator of a checkpoint.
pub fn load_generator(path: &Path) -> Result<(CheckpointMeta, Generator)> {
    let dir = resolve_checkpoint(path)?;
    let meta = read_meta(&dir)?;
    let mut g = Generator::new(meta.arch.clone(), meta.seed)?;
    g.params.load(&dir, GENERATOR_PREFIX)?;
    Ok((meta, g))
}

//! JSON-lines dataset manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::SplitSpec;
use super::toy::ToyConstants;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifestEntry {
    pub sample_id: String,
    pub subject_id: u32,
    pub frames_path: PathBuf,
    pub audio_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<String>>,
    pub fps: f64,
    pub sample_rate: u32,
}

impl SampleManifestEntry {
    fn check(&self) -> std::result::Result<(), String> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(format!("field 'fps' must be positive, got {}", self.fps));
        }
        if self.sample_rate == 0 {
            return Err("field 'sample_rate' must be positive".into());
        }
        if let Some(words) = &self.transcript {
            if let Some(i) = words.iter().position(|w| w.trim().is_empty()) {
                return Err(format!("field 'transcript' has an empty word at position {i}"));
            }
        }
        if self.sample_id.is_empty() {
            return Err("field 'sample_id' is empty".into());
        }
        Ok(())
    }
}

/// Optional first line of a manifest: `{"header": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyConstants>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: Option<ManifestHeader>,
    pub entries: Vec<SampleManifestEntry>,
}

#[derive(Deserialize)]
struct HeaderLine {
    header: ManifestHeader,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Reads a manifest, resolving relative media paths against its directory and
/// checking that every referenced file exists.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut header = None;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| parse_err(path, line, format!("invalid JSON: {e}")))?;
        if value.get("header").is_some() {
            if !entries.is_empty() || header.is_some() {
                return Err(parse_err(path, line, "header must be the first line"));
            }
            let h: HeaderLine =
                serde_json::from_value(value).map_err(|e| parse_err(path, line, format!("bad header: {e}")))?;
            header = Some(h.header);
            continue;
        }
        let mut e: SampleManifestEntry =
            serde_json::from_value(value).map_err(|e| parse_err(path, line, e.to_string()))?;
        e.check().map_err(|m| parse_err(path, line, m))?;
        e.frames_path = base.join(&e.frames_path);
        e.audio_path = base.join(&e.audio_path);
        entries.push(e);
    }
    let missing: Vec<String> = entries
        .iter()
        .flat_map(|e| {
            let mut m = Vec::new();
            if !e.frames_path.is_dir() {
                m.push(e.frames_path.display().to_string());
            }
            if !e.audio_path.is_file() {
                m.push(e.audio_path.display().to_string());
            }
            m
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!("missing media files: {}", missing.join(", "))));
    }
    Ok(Manifest { header, entries })
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleManifestEntry>> {
    Ok(read_manifest(path)?.entries)
}

/// Writes entries as given; paths are stored relative to the manifest directory when possible.
pub fn write_manifest(path: &Path, header: Option<&ManifestHeader>, entries: &[SampleManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    if let Some(h) = header {
        writeln!(out, "{}", serde_json::json!({ "header": h }))?;
    }
    for e in entries {
        let mut e = e.clone();
        if let Ok(p) = e.frames_path.strip_prefix(base) {
            e.frames_path = p.to_path_buf();
        }
        if let Ok(p) = e.audio_path.strip_prefix(base) {
            e.audio_path = p.to_path_buf();
        }
        writeln!(out, "{}", serde_json::to_string(&e)?)?;
    }
    out.flush()?;
    Ok(())
}

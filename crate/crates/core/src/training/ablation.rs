//! Trains each loss configuration and tabulates its test metrics.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::checkpoint::load_generator;
use super::config::{Ablation, TrainConfig};
use super::trainer::{read_outcome, split_manifest, train};
use crate::error::{Error, Result};
use crate::eval::report::aggregate;
use crate::eval::{evaluate_dataset, format_table, video_metrics, FaceEmbedder, Lipreader, MetricRow};
use crate::media::{load_sample, SampleManifestEntry};
use crate::model::Generator;

pub const GROUND_TRUTH_LABEL: &str = "Ground Truth Videos";

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    /// Ground truth first, then one row per configuration in [`Ablation::ALL`] order.
    pub rows: Vec<MetricRow>,
    pub checkpoints: Vec<(String, PathBuf)>,
}

impl AblationTable {
    pub fn format(&self) -> String {
        format_table(&self.rows)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("ablation.txt"), self.format())?;
        let mut w = csv::Writer::from_path(dir.join("ablation.csv")).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut header = vec!["method"];
        header.extend(crate::eval::report::COLUMNS);
        w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.formatted());
            w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Metrics of the real videos. Reconstruction columns do not apply.
pub fn ground_truth_row(
    entries: &[SampleManifestEntry],
    embedder: &dyn FaceEmbedder,
    lipreader: Option<&dyn Lipreader>,
) -> Result<MetricRow> {
    let rows = entries
        .iter()
        .map(|e| {
            let s = load_sample(e)?;
            video_metrics(&e.sample_id, &s.video, None, &s.still, e.transcript.as_deref(), embedder, lipreader)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&rows, GROUND_TRUTH_LABEL))
}

/// Mean metrics of `generator` over `entries`.
pub fn model_row(
    label: &str,
    generator: &Generator,
    entries: &[SampleManifestEntry],
    embedder: &dyn FaceEmbedder,
    lipreader: Option<&dyn Lipreader>,
    seed: u64,
) -> Result<MetricRow> {
    let report = evaluate_dataset(generator, entries, embedder, lipreader, seed);
    if let Some(bad) = report.rows.iter().find(|r| r.error.is_some()) {
        return Err(Error::Validation(format!("{}: {}", bad.label, bad.error.as_deref().unwrap_or(""))));
    }
    let mut row = report.aggregate;
    row.label = label.to_string();
    Ok(row)
}

/// Trains every configuration of [`Ablation::ALL`] from `base` under
/// `out_dir/<name>` and evaluates the best checkpoints on the test subjects.
/// Runs that already finished are reused.
pub fn run_ablation(
    base: &TrainConfig,
    manifest: &Path,
    out_dir: &Path,
    embedder: &dyn FaceEmbedder,
    lipreader: Option<&dyn Lipreader>,
) -> Result<AblationTable> {
    let split = split_manifest(base, manifest)?;
    let test = if split.test.is_empty() { &split.val } else { &split.test };
    let mut rows = vec![ground_truth_row(test, embedder, lipreader)?];
    let mut checkpoints = Vec::new();
    for ab in Ablation::ALL {
        let dir = out_dir.join(ab.name());
        let cfg = TrainConfig { ablation: ab, ..base.clone() };
        let best = dir.join("best");
        if read_outcome(&dir)?.is_none() {
            log::info!("training {}", ab.name());
            train(&cfg, manifest, &dir, true)?;
        }
        let (_, generator) = load_generator(&best)?;
        rows.push(model_row(ab.label(), &generator, test, embedder, lipreader, base.seed)?);
        checkpoints.push((ab.name().to_string(), best));
    }
    Ok(AblationTable { rows, checkpoints })
}

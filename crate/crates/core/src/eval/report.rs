//! Per-sample and aggregate metric reports.

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use super::backends::{FaceEmbedder, Lipreader};
use super::metrics::{cpbd, fdbm, psnr, ssim, wer};
use crate::audio::{frame_audio, resample};
use crate::error::{Error, Result};
use crate::media::{load_sample, Frame, SampleManifestEntry, VideoSeq};
use crate::model::Generator;

fn opt_metric<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" }),
        Some(x) if x.is_nan() => s.serialize_none(),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

/// One row of metrics; `None` means not applicable or unavailable.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricRow {
    pub label: String,
    #[serde(serialize_with = "opt_metric")]
    pub psnr: Option<f64>,
    #[serde(serialize_with = "opt_metric")]
    pub ssim: Option<f64>,
    #[serde(serialize_with = "opt_metric")]
    pub fdbm: Option<f64>,
    #[serde(serialize_with = "opt_metric")]
    pub cpbd: Option<f64>,
    #[serde(serialize_with = "opt_metric")]
    pub acd: Option<f64>,
    #[serde(serialize_with = "opt_metric")]
    pub wer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const COLUMNS: [&str; 6] = ["PSNR", "SSIM", "FDBM", "CPBD", "ACD", "WER"];

impl MetricRow {
    pub fn values(&self) -> [Option<f64>; 6] {
        [self.psnr, self.ssim, self.fdbm, self.cpbd, self.acd, self.wer]
    }

    pub fn formatted(&self) -> Vec<String> {
        self.values()
            .iter()
            .map(|v| match v {
                None => "N/A".to_string(),
                Some(x) if x.is_infinite() => "inf".to_string(),
                Some(x) => format!("{x:.6}"),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportMeta {
    pub checkpoint: String,
    pub dataset: String,
    pub timestamp: String,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub aggregate: MetricRow,
    pub meta: ReportMeta,
}

/// Mean over the rows where the column is present.
pub fn aggregate(rows: &[MetricRow], label: &str) -> MetricRow {
    let col = |f: fn(&MetricRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter(|r| r.error.is_none()).filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    MetricRow {
        label: label.to_string(),
        psnr: col(|r| r.psnr),
        ssim: col(|r| r.ssim),
        fdbm: col(|r| r.fdbm),
        cpbd: col(|r| r.cpbd),
        acd: col(|r| r.acd),
        wer: col(|r| r.wer),
        error: None,
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

pub fn acd(still: &Frame, video: &VideoSeq, embedder: &dyn FaceEmbedder) -> Result<f64> {
    let e0 = embedder.embed(still)?;
    let mut total = 0.0;
    for f in video.frames() {
        let e = embedder.embed(f)?;
        if e.len() != e0.len() {
            return Err(Error::Backend(format!("embedding sizes differ: {} vs {}", e.len(), e0.len())));
        }
        total += e0.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    }
    Ok(total / video.len() as f64)
}

/// Metrics of a generated video; reconstruction metrics need the real video.
pub fn video_metrics(
    label: &str,
    generated: &VideoSeq,
    real: Option<&VideoSeq>,
    still: &Frame,
    transcript: Option<&[String]>,
    embedder: &dyn FaceEmbedder,
    lipreader: Option<&dyn Lipreader>,
) -> Result<MetricRow> {
    let frames = generated.frames();
    let (p, s) = match real {
        Some(real) => {
            if real.len() != generated.len() {
                return Err(Error::Shape(format!("{} real vs {} generated frames", real.len(), generated.len())));
            }
            let p = frames.iter().zip(real.frames()).map(|(g, r)| psnr(r, g)).collect::<Result<Vec<_>>>()?;
            let s = frames.iter().zip(real.frames()).map(|(g, r)| ssim(r, g)).collect::<Result<Vec<_>>>()?;
            (Some(mean(p.into_iter())), Some(mean(s.into_iter())))
        }
        None => (None, None),
    };
    let w = match (lipreader, transcript) {
        (Some(l), Some(t)) if !t.is_empty() => Some(wer(t, &l.transcribe(generated)?)?),
        _ => None,
    };
    Ok(MetricRow {
        label: label.to_string(),
        psnr: p,
        ssim: s,
        fdbm: Some(mean(frames.iter().map(fdbm))),
        cpbd: Some(mean(frames.iter().map(cpbd))),
        acd: Some(acd(still, generated, embedder)?),
        wer: w,
        error: None,
    })
}

/// Generates each sample from its first frame and audio, and scores it.
pub fn evaluate_dataset(
    generator: &Generator,
    entries: &[SampleManifestEntry],
    embedder: &dyn FaceEmbedder,
    lipreader: Option<&dyn Lipreader>,
    seed: u64,
) -> MetricsReport {
    let arch = &generator.arch;
    let rows: Vec<MetricRow> = entries
        .iter()
        .map(|e| {
            let run = || -> Result<MetricRow> {
                let s = load_sample(e)?;
                let clip = if s.audio.sample_rate() == arch.sample_rate { s.audio } else { resample(&s.audio, arch.sample_rate)? };
                let audio = frame_audio(&clip.peak_normalized(), arch.fps, arch.window_sec)?;
                let video = generator.generate_sequence(&s.still, &audio, seed)?;
                let n = video.len().min(s.video.len());
                let trim = |v: &VideoSeq| VideoSeq::new(v.frames()[..n].to_vec(), v.fps());
                video_metrics(
                    &e.sample_id,
                    &trim(&video)?,
                    Some(&trim(&s.video)?),
                    &s.still,
                    e.transcript.as_deref(),
                    embedder,
                    lipreader,
                )
            };
            run().unwrap_or_else(|err| MetricRow { label: e.sample_id.clone(), error: Some(err.to_string()), ..Default::default() })
        })
        .collect();
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    MetricsReport {
        aggregate: aggregate(&rows, "mean"),
        meta: ReportMeta { samples: rows.len(), failures, ..Default::default() },
        rows,
    }
}

impl MetricsReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut header = vec!["sample_id"];
        header.extend(COLUMNS);
        header.push("error");
        w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.formatted());
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

/// Fixed-width table with one row per label in the given order.
pub fn format_table(rows: &[MetricRow]) -> String {
    let mut out = format!("{:<24}", "Method");
    for c in COLUMNS {
        out.push_str(&format!("{c:>12}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:<24}", r.label));
        for v in r.formatted() {
            let v = if v.len() > 11 { v[..11].to_string() } else { v };
            out.push_str(&format!("{v:>12}"));
        }
        out.push('\n');
    }
    out
}

//! Image quality, identity and lip-sync metrics.

pub mod backends;
pub mod metrics;
pub mod report;

pub use backends::{CommandEmbedder, CommandLipreader, FaceEmbedder, Lipreader, StubEmbedder, ToyLipreader};
pub use metrics::{cpbd, cpbd_with, fdbm, gaussian_blur, psnr, psnr_luma, ssim, wer, CpbdParams, CpbdResult};
pub use report::{acd, evaluate_dataset, format_table, video_metrics, MetricRow, MetricsReport};

//! Losses, the training loop, checkpoints and the ablation harness.

pub mod ablation;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod losses;
pub mod trainer;

pub use ablation::{ground_truth_row, model_row, run_ablation, AblationTable};
pub use checkpoint::{load_generator, load_networks, resolve_checkpoint, save_checkpoint, CheckpointMeta, Networks};
pub use config::{Ablation, GenAdvLoss, L1Reduction, TrainConfig};
pub use data::{assemble, assemble_augmented, load_clip, load_clips, Augment, ClipData, ColourJitter, TrainBatch};
pub use losses::{assemble_total, eq1_pair, gen_adv_value, l1_lower_half, LossReport};
pub use trainer::{read_outcome, read_step_log, split_manifest, train, EpochSummary, StepRecord, StopReason, TrainOutcome, Trainer, ValMetrics};

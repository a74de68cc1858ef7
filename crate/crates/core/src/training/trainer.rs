//! The alternating adversarial training loop.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{load_networks, load_optimizers, read_meta, save_checkpoint, CheckpointMeta, Networks, Optimizers};
use super::config::TrainConfig;
use super::data::{assemble, assemble_augmented, draw_augments, epoch_batches, epoch_rng, load_clips, sequential_batches, ClipData, TrainBatch};
use super::losses::{assemble_total, gen_adv_var, l1_loss_var, l1_lower_half, softplus_mean, LossReport};
use crate::error::{Error, Result};
use crate::eval::{psnr, ssim};
use crate::media::{read_manifest, split_subjects, SplitEntries};
use crate::nn::{Adam, Graph, ParamStore, Tensor, Var};

pub const STEP_LOG: &str = "train_log.csv";
pub const EPOCH_LOG: &str = "epochs.json";
pub const FAULT_FILE: &str = "fault.json";
/// Written once a run stops normally; its absence marks an interrupted run.
pub const OUTCOME_FILE: &str = "outcome.json";

/// One CSV row per optimisation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub lr_generator: f64,
    pub lr_frame_disc: f64,
    pub lr_seq_disc: f64,
    pub l_adv_img: f64,
    pub l_adv_seq: f64,
    pub l_l1: f64,
    pub total: f64,
    pub g_adv_img: f64,
    pub g_adv_seq: f64,
    pub d_img_loss: f64,
    pub d_seq_loss: f64,
}

impl StepRecord {
    pub fn losses(&self) -> LossReport {
        LossReport {
            l_adv_img: self.l_adv_img,
            l_adv_seq: self.l_adv_seq,
            l_l1: self.l_l1,
            total: self.total,
            g_adv_img: self.g_adv_img,
            g_adv_seq: self.g_adv_seq,
            d_img_loss: self.d_img_loss,
            d_seq_loss: self.d_seq_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub ssim: f64,
    pub psnr: f64,
    /// Mean per-frame lower-half L1 (sum over pixels and channels).
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: u64,
    pub train_l1: Option<f64>,
    pub val: ValMetrics,
    pub lr_generator: f64,
    pub lr_frame_disc: f64,
    pub lr_seq_disc: f64,
    pub improved: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    TimeBudget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub best_dir: PathBuf,
    pub last_dir: PathBuf,
    pub history: Vec<EpochSummary>,
    pub stop: StopReason,
    pub best_ssim: f64,
    pub best_epoch: usize,
}

#[derive(Serialize)]
struct Fault<'a> {
    epoch: usize,
    step: u64,
    stage: &'a str,
    samples: Vec<String>,
    losses: LossReport,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub nets: Networks,
    pub opts: Optimizers,
    train: Vec<ClipData>,
    val: Vec<ClipData>,
    out_dir: PathBuf,
    epoch: usize,
    step: u64,
    best_ssim: f64,
    best_epoch: usize,
    stale: usize,
    history: Vec<EpochSummary>,
}

fn select_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let per: usize = t.shape()[1..].iter().product();
    let mut data = Vec::with_capacity(rows.len() * per);
    for &r in rows {
        data.extend_from_slice(&t.data()[r * per..(r + 1) * per]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = rows.len();
    Tensor::new(shape, data)
}

/// Real rows stacked over fake rows, each conditioned on its still.
fn joint_frame_input(g: &mut Graph, real: Var, fake: Var, stills: &Tensor) -> (Var, Var) {
    let x = g.concat(&[real, fake], 0);
    let c = g.constant(stills.clone());
    let c = g.concat(&[c, c], 0);
    (x, c)
}

fn split_halves(g: &mut Graph, x: Var) -> (Var, Var) {
    let n = g.shape(x)[0] / 2;
    let a = g.index_select(x, &(0..n).collect::<Vec<_>>());
    let b = g.index_select(x, &(n..2 * n).collect::<Vec<_>>());
    (a, b)
}

fn shift_rows(rows: &[Vec<usize>], by: usize) -> Vec<Vec<usize>> {
    rows.iter().map(|r| r.iter().map(|i| i + by).collect()).collect()
}

/// One uniformly drawn frame row per sample.
fn sample_rows(batch: &TrainBatch, rng: &mut impl Rng) -> Vec<usize> {
    (0..batch.batch()).map(|b| batch.offsets[b] + rng.random_range(0..batch.gen.lengths[b])).collect()
}

/// Row tables for negatives shown to the sequence discriminator: each real
/// video with its frames shuffled, and each video paired with another clip's audio.
pub struct NegativeRows {
    pub image: Vec<Vec<usize>>,
    pub audio: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
}

pub fn negative_rows(batch: &TrainBatch, rng: &mut impl Rng) -> Vec<NegativeRows> {
    let b = batch.batch();
    let steps = batch.gen.steps;
    let ordered = batch.ordered_rows();
    let mut out = Vec::new();
    let perms: Vec<Vec<usize>> = batch
        .gen
        .lengths
        .iter()
        .map(|&n| {
            let mut p: Vec<usize> = (0..n).collect();
            if n > 1 {
                while p.iter().enumerate().all(|(i, &v)| i == v) {
                    p.shuffle(rng);
                }
            }
            p
        })
        .collect();
    let image = (0..steps)
        .map(|t| (0..b).map(|bb| batch.offsets[bb] + perms[bb][t.min(batch.gen.lengths[bb] - 1)]).collect())
        .collect();
    out.push(NegativeRows { image, audio: ordered.clone(), lengths: batch.gen.lengths.clone() });
    if b > 1 {
        let shift = rng.random_range(1..b);
        let partner: Vec<usize> = (0..b).map(|bb| (bb + shift) % b).collect();
        let audio = (0..steps).map(|t| (0..b).map(|bb| batch.row(partner[bb], t)).collect()).collect();
        let lengths = (0..b).map(|bb| batch.gen.lengths[bb].min(batch.gen.lengths[partner[bb]])).collect();
        out.push(NegativeRows { image: ordered, audio, lengths });
    }
    out
}

fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(step + 16);
    r
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).item()
}

fn update(g: &Graph, loss: Var, store: &ParamStore) -> Vec<Option<Vec<f64>>> {
    let grads = g.backward(loss);
    g.param_grads(&grads, store)
}

impl Trainer {
    pub fn new(cfg: TrainConfig, train: Vec<ClipData>, val: Vec<ClipData>, out_dir: &Path) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || val.is_empty() {
            return Err(Error::Validation("training needs non-empty train and validation sets".into()));
        }
        let nets = Networks::new(&cfg.arch, cfg.seed)?;
        let (g, d, s) = cfg.learning_rates(1);
        let opts = Optimizers {
            generator: Adam::new(&nets.generator.params, g, cfg.adam_betas),
            frame_disc: Adam::new(&nets.frame_disc.params, d, cfg.adam_betas),
            seq_disc: Adam::new(&nets.seq_disc.params, s, cfg.adam_betas),
        };
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            cfg,
            nets,
            opts,
            train,
            val,
            out_dir: out_dir.to_path_buf(),
            epoch: 0,
            step: 0,
            best_ssim: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
            history: Vec::new(),
        })
    }

    /// Continues a run from `out_dir/last`. Budgets (`max_*`) come from `cfg`; everything else from the checkpoint.
    pub fn resume(cfg: TrainConfig, train: Vec<ClipData>, val: Vec<ClipData>, out_dir: &Path) -> Result<Self> {
        let last = out_dir.join("last");
        let meta = read_meta(&last)?;
        let saved = meta.config.clone().ok_or_else(|| Error::Validation("checkpoint has no training config".into()))?;
        let cfg = TrainConfig {
            max_epochs: cfg.max_epochs,
            max_minutes: cfg.max_minutes,
            max_batches_per_epoch: cfg.max_batches_per_epoch,
            ..saved
        };
        let mut t = Self::new(cfg, train, val, out_dir)?;
        let (_, nets) = load_networks(&last)?;
        t.opts = load_optimizers(&last, &nets)?;
        t.nets = nets;
        t.epoch = meta.epoch;
        t.step = meta.step;
        t.best_ssim = meta.best_ssim;
        t.best_epoch = meta.best_epoch;
        t.stale = meta.stale_epochs;
        let hist = out_dir.join(EPOCH_LOG);
        if hist.is_file() {
            t.history = serde_json::from_str(&std::fs::read_to_string(hist)?)?;
            t.history.retain(|h| h.epoch <= meta.epoch);
        }
        Ok(t)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn history(&self) -> &[EpochSummary] {
        &self.history
    }

    pub fn train_clips(&self) -> &[ClipData] {
        &self.train
    }

    pub fn val_clips(&self) -> &[ClipData] {
        &self.val
    }

    fn set_learning_rates(&mut self, epoch: usize) -> (f64, f64, f64) {
        let (g, d, s) = self.cfg.learning_rates(epoch);
        self.opts.generator.lr = g;
        self.opts.frame_disc.lr = d;
        self.opts.seq_disc.lr = s;
        (g, d, s)
    }

    fn fault(&self, stage: &str, batch: &TrainBatch, losses: LossReport) -> Error {
        let f = Fault {
            epoch: self.epoch + 1,
            step: self.step,
            stage,
            samples: batch.clips.iter().map(|&i| self.train.get(i).map_or(String::new(), |c| c.sample_id.clone())).collect(),
            losses,
        };
        if let Ok(s) = serde_json::to_string_pretty(&f) {
            let _ = std::fs::write(self.out_dir.join(FAULT_FILE), s);
        }
        Error::TrainingFault(format!(
            "non-finite {stage} loss at epoch {} step {}; see {} (last good checkpoint in {})",
            f.epoch,
            f.step,
            self.out_dir.join(FAULT_FILE).display(),
            self.out_dir.join("last").display()
        ))
    }

    /// Discriminator updates followed by one generator update.
    pub fn train_step(&mut self, batch: &TrainBatch, rng: &mut ChaCha8Rng) -> Result<LossReport> {
        let ablation = self.cfg.ablation;
        let mut rep = LossReport::default();
        let mut g = Graph::new(true);
        let out = self.nets.generator.forward_batch(&mut g, &batch.gen, rng)?;
        let fake = g.value(out.frames).clone();

        if ablation.uses_frame_disc() {
            let rows = sample_rows(batch, rng);
            let d = &self.nets.frame_disc;
            let mut gd = Graph::new(true);
            let x = gd.constant(select_rows(&batch.real, &rows));
            let f = gd.constant(select_rows(&fake, &rows));
            let (x, c) = joint_frame_input(&mut gd, x, f, &batch.gen.stills);
            let logits = d.logits(&mut gd, x, c)?;
            let (lr, lf) = split_halves(&mut gd, logits);
            let loss_r = softplus_mean(&mut gd, lr, -1.0);
            let loss_f = softplus_mean(&mut gd, lf, 1.0);
            rep.d_img_loss = scalar(&gd, loss_r) + scalar(&gd, loss_f);
            rep.l_adv_img = -rep.d_img_loss;
            if !rep.d_img_loss.is_finite() {
                return Err(self.fault("frame discriminator", batch, rep));
            }
            let loss = gd.add(loss_r, loss_f);
            let grads = update(&gd, loss, &d.params);
            let store = &mut self.nets.frame_disc.params;
            self.opts.frame_disc.step(store, &grads);
            gd.apply_buffer_updates(store);
        }

        let ordered = batch.ordered_rows();
        if ablation.uses_seq_disc() {
            let d = &self.nets.seq_disc;
            let n = batch.real.shape()[0];
            let fake_rows = shift_rows(&ordered, n);
            let mut gd = Graph::new(true);
            let (x, f) = (gd.constant(batch.real.clone()), gd.constant(fake.clone()));
            let x = gd.concat(&[x, f], 0);
            let w = gd.constant(batch.windows.clone());
            let w = gd.concat(&[w, w], 0);
            let codes = d.encode(&mut gd, x, w)?;
            let lr = d.classify_rows(&mut gd, &codes, &ordered, &ordered, &batch.gen.lengths);
            let real_term = softplus_mean(&mut gd, lr, -1.0);
            let mut loss_r = real_term;
            if self.cfg.seq_disc_negatives {
                let negs = negative_rows(batch, rng);
                let k = negs.len() as f64;
                for neg in &negs {
                    let ln = d.classify_rows(&mut gd, &codes, &neg.image, &neg.audio, &neg.lengths);
                    let sp = softplus_mean(&mut gd, ln, 1.0);
                    let sp = gd.scale(sp, 1.0 / k);
                    loss_r = gd.add(loss_r, sp);
                }
            }
            let lf = d.classify_rows(&mut gd, &codes, &fake_rows, &fake_rows, &batch.gen.lengths);
            let loss_f = softplus_mean(&mut gd, lf, 1.0);
            rep.d_seq_loss = scalar(&gd, real_term) + scalar(&gd, loss_f);
            rep.l_adv_seq = -rep.d_seq_loss;
            if !(rep.d_seq_loss.is_finite() && scalar(&gd, loss_r).is_finite()) {
                return Err(self.fault("sequence discriminator", batch, rep));
            }
            let loss = gd.add(loss_r, loss_f);
            let grads = update(&gd, loss, &d.params);
            let store = &mut self.nets.seq_disc.params;
            self.opts.seq_disc.step(store, &grads);
            gd.apply_buffer_updates(store);
        }

        g.freeze(&self.nets.frame_disc.params);
        g.freeze(&self.nets.seq_disc.params);
        let l1 = l1_loss_var(&mut g, out.frames, batch.real.clone(), self.cfg.l1_reduction);
        rep.l_l1 = scalar(&g, l1);
        let mut total = g.scale(l1, self.cfg.lambda_l1);
        // Real rows ride along so batch statistics inside the discriminators
        // match the ones they were trained with.
        if ablation.uses_frame_disc() {
            let rows = sample_rows(batch, rng);
            let f = g.index_select(out.frames, &rows);
            let x = g.constant(select_rows(&batch.real, &rows));
            let (x, c) = joint_frame_input(&mut g, x, f, &batch.gen.stills);
            let logits = self.nets.frame_disc.logits(&mut g, x, c)?;
            let (_, lf) = split_halves(&mut g, logits);
            let adv = gen_adv_var(&mut g, lf, self.cfg.gen_adv_loss);
            rep.g_adv_img = scalar(&g, adv);
            total = g.add(total, adv);
        }
        if ablation.uses_seq_disc() {
            let n = batch.real.shape()[0];
            let x = g.constant(batch.real.clone());
            let x = g.concat(&[x, out.frames], 0);
            let w = g.constant(batch.windows.clone());
            let w = g.concat(&[w, w], 0);
            let codes = self.nets.seq_disc.encode(&mut g, x, w)?;
            let fake_rows = shift_rows(&ordered, n);
            let logits = self.nets.seq_disc.classify_rows(&mut g, &codes, &fake_rows, &fake_rows, &batch.gen.lengths);
            let adv = gen_adv_var(&mut g, logits, self.cfg.gen_adv_loss);
            rep.g_adv_seq = scalar(&g, adv);
            total = g.add(total, adv);
        }
        rep.total = assemble_total(rep.l_adv_img, rep.l_adv_seq, rep.l_l1, self.cfg.lambda_l1);
        if !rep.is_finite() || !scalar(&g, total).is_finite() {
            return Err(self.fault("generator", batch, rep));
        }
        let grads = update(&g, total, &self.nets.generator.params);
        let store = &mut self.nets.generator.params;
        self.opts.generator.step(store, &grads);
        g.apply_buffer_updates(store);
        Ok(rep)
    }

    /// Reconstruction metrics of the generator on the validation clips.
    pub fn validate(&self) -> Result<ValMetrics> {
        let n = self.cfg.val_limit.map_or(self.val.len(), |l| l.min(self.val.len()));
        let (mut s, mut p, mut l, mut count) = (0.0, 0.0, 0.0, 0usize);
        for idx in sequential_batches(n, self.cfg.batch_size) {
            let batch = assemble(&self.val, &idx, &[])?;
            let videos = self.nets.generator.generate_batch(&batch.gen, self.cfg.seed)?;
            for (video, &i) in videos.iter().zip(&idx) {
                for (t, fake) in video.iter().enumerate() {
                    let real = self.val[i].frame(t);
                    s += ssim(&real, fake)?;
                    p += psnr(&real, fake)?;
                    l += l1_lower_half(&real, fake)?;
                    count += 1;
                }
            }
        }
        let c = count.max(1) as f64;
        Ok(ValMetrics { ssim: s / c, psnr: p / c, l1: l / c })
    }

    fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            arch: self.cfg.arch.clone(),
            seed: self.cfg.seed,
            epoch: self.epoch,
            step: self.step,
            best_ssim: self.best_ssim,
            best_epoch: self.best_epoch,
            stale_epochs: self.stale,
            config: Some(self.cfg.clone()),
        }
    }

    fn record_epoch(&mut self, summary: EpochSummary) -> Result<()> {
        log::info!(
            "epoch {} val ssim {:.4} psnr {:.2} l1 {:.2}{}",
            summary.epoch,
            summary.val.ssim,
            summary.val.psnr,
            summary.val.l1,
            if summary.improved { " *" } else { "" }
        );
        self.history.push(summary);
        std::fs::write(self.out_dir.join(EPOCH_LOG), serde_json::to_string_pretty(&self.history)?)?;
        Ok(())
    }

    /// Trains until early stopping, `max_epochs` or the time budget.
    pub fn run(&mut self) -> Result<TrainOutcome> {
        let start = Instant::now();
        let best_dir = self.out_dir.join("best");
        let last_dir = self.out_dir.join("last");
        let log_path = self.out_dir.join(STEP_LOG);
        let outcome_path = self.out_dir.join(OUTCOME_FILE);
        if outcome_path.exists() {
            std::fs::remove_file(&outcome_path)?;
        }
        if self.epoch == 0 {
            let val = self.validate()?;
            self.best_ssim = val.ssim;
            let (g, d, s) = self.cfg.learning_rates(0);
            self.history.clear();
            self.record_epoch(EpochSummary {
                epoch: 0,
                steps: 0,
                train_l1: None,
                val,
                lr_generator: g,
                lr_frame_disc: d,
                lr_seq_disc: s,
                improved: true,
                seconds: start.elapsed().as_secs_f64(),
            })?;
            save_checkpoint(&best_dir, &self.meta(), &self.nets, None)?;
            save_checkpoint(&last_dir, &self.meta(), &self.nets, Some(&self.opts))?;
            if log_path.exists() {
                std::fs::remove_file(&log_path)?;
            }
        }
        let fresh_log = !log_path.exists();
        let file = OpenOptions::new().create(true).append(true).open(&log_path)?;
        let mut log = csv::WriterBuilder::new().has_headers(fresh_log).from_writer(file);
        let budget = self.cfg.max_minutes.map(|m| m * 60.0);
        let over_budget = |start: &Instant| budget.is_some_and(|b| start.elapsed().as_secs_f64() >= b);
        let mut stop = StopReason::MaxEpochs;
        while self.epoch < self.cfg.max_epochs {
            let epoch = self.epoch + 1;
            let (lg, ld, ls) = self.set_learning_rates(epoch);
            let mut order = epoch_batches(&self.train, self.cfg.batch_size, self.cfg.seed, epoch);
            if let Some(m) = self.cfg.max_batches_per_epoch {
                order.truncate(m);
            }
            let mut aug_rng = epoch_rng(self.cfg.seed, epoch, 1);
            let mut timed_out = false;
            let mut l1_sum = 0.0;
            let mut done = 0usize;
            for idx in &order {
                if over_budget(&start) {
                    timed_out = true;
                    break;
                }
                let augs = draw_augments(idx.len(), self.cfg.mirror, self.cfg.colour_jitter, &mut aug_rng);
                let batch = assemble_augmented(&self.train, idx, &augs)?;
                let mut rng = step_rng(self.cfg.seed, self.step);
                let rep = self.train_step(&batch, &mut rng)?;
                self.step += 1;
                done += 1;
                l1_sum += rep.l_l1;
                let rec = StepRecord {
                    epoch,
                    step: self.step,
                    lr_generator: lg,
                    lr_frame_disc: ld,
                    lr_seq_disc: ls,
                    l_adv_img: rep.l_adv_img,
                    l_adv_seq: rep.l_adv_seq,
                    l_l1: rep.l_l1,
                    total: rep.total,
                    g_adv_img: rep.g_adv_img,
                    g_adv_seq: rep.g_adv_seq,
                    d_img_loss: rep.d_img_loss,
                    d_seq_loss: rep.d_seq_loss,
                };
                log.serialize(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
                log::debug!("epoch {epoch} step {} l1 {:.3} total {:.3}", self.step, rep.l_l1, rep.total);
            }
            log.flush()?;
            if done == 0 {
                stop = StopReason::TimeBudget;
                break;
            }
            let val = self.validate()?;
            let improved = val.ssim > self.best_ssim;
            self.epoch = epoch;
            if improved {
                self.best_ssim = val.ssim;
                self.best_epoch = epoch;
                self.stale = 0;
            } else {
                self.stale += 1;
            }
            self.record_epoch(EpochSummary {
                epoch,
                steps: self.step,
                train_l1: Some(l1_sum / done as f64),
                val,
                lr_generator: lg,
                lr_frame_disc: ld,
                lr_seq_disc: ls,
                improved,
                seconds: start.elapsed().as_secs_f64(),
            })?;
            if improved {
                save_checkpoint(&best_dir, &self.meta(), &self.nets, None)?;
            }
            save_checkpoint(&last_dir, &self.meta(), &self.nets, Some(&self.opts))?;
            if self.stale >= self.cfg.patience {
                stop = StopReason::EarlyStop;
                break;
            }
            if timed_out || over_budget(&start) {
                stop = StopReason::TimeBudget;
                break;
            }
        }
        let outcome = TrainOutcome {
            out_dir: self.out_dir.clone(),
            best_dir,
            last_dir,
            history: self.history.clone(),
            stop,
            best_ssim: self.best_ssim,
            best_epoch: self.best_epoch,
        };
        let mut f = std::fs::File::create(&outcome_path)?;
        serde_json::to_writer_pretty(&mut f, &outcome)?;
        Ok(outcome)
    }
}

/// Reads a manifest and splits it by subject using the manifest header (or `cfg.dataset`).
pub fn split_manifest(cfg: &TrainConfig, manifest: &Path) -> Result<SplitEntries> {
    let m = read_manifest(manifest)?;
    let (name, custom) = match &m.header {
        Some(h) => (h.dataset.clone(), h.split.clone()),
        None => (cfg.dataset.clone(), None),
    };
    split_subjects(&name, &m.entries, custom.as_ref())
}

/// Loads the data named by `manifest` and trains into `out_dir`, resuming from
/// `out_dir/last` when `resume` is set and a checkpoint exists.
pub fn train(cfg: &TrainConfig, manifest: &Path, out_dir: &Path, resume: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = split_manifest(cfg, manifest)?;
    let train = load_clips(&split.train, &cfg.arch)?;
    let val = load_clips(&split.val, &cfg.arch)?;
    log::info!("{} training clips, {} validation clips", train.len(), val.len());
    let mut t = if resume && out_dir.join("last").join(super::checkpoint::META_FILE).is_file() {
        Trainer::resume(cfg.clone(), train, val, out_dir)?
    } else {
        Trainer::new(cfg.clone(), train, val, out_dir)?
    };
    t.run()
}

/// The outcome of a finished run in `dir`, or `None` if it never finished.
pub fn read_outcome(dir: &Path) -> Result<Option<TrainOutcome>> {
    let path = dir.join(OUTCOME_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_reader(std::fs::File::open(path)?)?))
}

/// Reads every row of a step log.
pub fn read_step_log(path: &Path) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    r.deserialize().map(|x| x.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))).collect()
}

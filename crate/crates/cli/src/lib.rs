//! Command implementations behind the `facesynth` binary.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use facesynth_core::audio::{frame_audio, resample};
use facesynth_core::eval::report::ReportMeta;
use facesynth_core::eval::{
    evaluate_dataset, format_table, CommandEmbedder, CommandLipreader, FaceEmbedder, Lipreader, MetricsReport, StubEmbedder,
    ToyLipreader,
};
use facesynth_core::media::{
    make_toy_dataset, read_manifest, read_png, read_wav, write_frames, write_manifest, CommandHook, ManifestHeader,
    SampleManifestEntry,
};
use facesynth_core::training::checkpoint::{resolve_checkpoint, GENERATOR_PREFIX, META_FILE};
use facesynth_core::training::{load_generator, run_ablation, split_manifest, train, Ablation, TrainConfig};
use facesynth_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EMBEDDER_ENV: &str = "FACESYNTH_EMBEDDER_CMD";
pub const LIPREADER_ENV: &str = "FACESYNTH_LIPREADER_CMD";
pub const ALIGN_ENV: &str = "FACESYNTH_ALIGN_CMD";
pub const MUX_ENV: &str = "FACESYNTH_MUX_CMD";

#[derive(Debug, Parser)]
#[command(name = "facesynth", version, about = "Speech-driven talking-head synthesis with a temporal GAN")]
pub struct Cli {
    /// TOML training configuration (see `configs/`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset, optionally align its frames, and write a processed manifest.
    Preprocess(PreprocessArgs),
    /// Train a generator and its discriminators.
    Train(TrainArgs),
    /// Animate a still image with an audio clip.
    Generate(GenerateArgs),
    /// Score a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Train and evaluate the three loss configurations.
    Ablate(AblateArgs),
    /// Write the synthetic toy dataset.
    MakeToy(MakeToyArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Alignment command with `{in}` and `{out}` frame-directory placeholders.
    #[arg(long, env = ALIGN_ENV)]
    pub align_cmd: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest; overrides `manifest` in the configuration.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    /// Start from toy-scale defaults instead of full-size ones.
    #[arg(long)]
    pub toy: bool,
    /// Continue from `<out>/last` when it exists.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Wall-clock budget in minutes.
    #[arg(long)]
    pub max_minutes: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Checkpoint directory, or a run directory containing `best/`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// PNG still image of the face.
    #[arg(long)]
    pub still: PathBuf,
    /// Mono WAV speech.
    #[arg(long)]
    pub audio: PathBuf,
    /// Resample audio to the model's rate instead of rejecting it.
    #[arg(long)]
    pub resample: bool,
    /// Muxer command run after generation, with `{frames}`, `{audio}`, `{fps}` and `{out}` placeholders.
    #[arg(long, env = MUX_ENV)]
    pub mux_cmd: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LipreaderArg {
    /// Oracle reader for toy datasets (uses the manifest header).
    Toy,
    /// External command from the FACESYNTH_LIPREADER_CMD variable.
    Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum EmbedderArg {
    /// Built-in block-average embedding.
    #[default]
    Stub,
    /// External command from the FACESYNTH_EMBEDDER_CMD variable.
    Command,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Lipreader for WER; without it the WER column is N/A.
    #[arg(long, value_enum)]
    pub lipreader: Option<LipreaderArg>,
    #[arg(long, value_enum, default_value_t)]
    pub embedder: EmbedderArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub toy: bool,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Wall-clock budget per configuration, in minutes.
    #[arg(long)]
    pub max_minutes: Option<f64>,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Args)]
pub struct MakeToyArgs {
    #[arg(long, default_value_t = 5)]
    pub subjects: u32,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 25)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandResult {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl CommandResult {
    fn ok(artifacts: Vec<PathBuf>, log_path: Option<PathBuf>) -> Self {
        Self { exit_code: 0, artifacts, log_path }
    }
}

/// 1 for bad input or configuration, 2 for faults while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Parse { .. } | Error::Config(_) | Error::Shape(_) | Error::Image(_) => 1,
        Error::Io(_) | Error::Backend(_) | Error::TrainingFault(_) | Error::Json(_) => 2,
    }
}

pub fn run(cli: Cli) -> Result<CommandResult> {
    match &cli.command {
        Command::Preprocess(a) => preprocess(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Generate(a) => generate(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Ablate(a) => ablate(&cli, a),
        Command::MakeToy(a) => make_toy(&cli, a),
    }
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn load_config(cli: &Cli, toy: bool) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => TrainConfig::load(p)?,
        None if toy => TrainConfig::toy(),
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct SampleError {
    sample_id: String,
    error: String,
}

#[derive(Serialize)]
struct PreprocessReport {
    manifest: PathBuf,
    processed: usize,
    failures: Vec<SampleError>,
}

fn check_entry(entry: &SampleManifestEntry, window_sec: f64) -> Result<()> {
    let s = facesynth_core::media::load_sample(entry)?;
    if entry.fps.fract() != 0.0 || entry.fps <= 0.0 {
        return Err(Error::Validation(format!("frame rate {} is not a positive integer", entry.fps)));
    }
    let windows = frame_audio(&s.audio, entry.fps as u32, window_sec)?;
    if windows.len().abs_diff(s.video.len()) > 1 {
        return Err(Error::Validation(format!(
            "{} video frames but the audio covers {} frames",
            s.video.len(),
            windows.len()
        )));
    }
    Ok(())
}

fn preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<CommandResult> {
    let cfg = load_config(cli, false)?;
    let out = out_dir(cli, "processed");
    std::fs::create_dir_all(&out)?;
    let manifest = read_manifest(&a.manifest)?;
    let hook = a.align_cmd.as_deref().map(CommandHook::new).transpose()?;
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for e in &manifest.entries {
        let mut e = e.clone();
        let res = (|| -> Result<()> {
            if let Some(h) = &hook {
                let aligned = out.join("aligned").join(&e.sample_id);
                h.align(&e.frames_path, &aligned)?;
                e.frames_path = std::path::absolute(&aligned)?;
            }
            check_entry(&e, cfg.arch.window_sec)
        })();
        match res {
            Ok(()) => entries.push(e),
            Err(err) => {
                log::error!("{}: {err}", e.sample_id);
                failures.push(SampleError { sample_id: e.sample_id.clone(), error: err.to_string() });
            }
        }
    }
    let path = out.join("manifest.jsonl");
    write_manifest(&path, manifest.header.as_ref(), &entries)?;
    let report_path = out.join("preprocess_report.json");
    let report = PreprocessReport { manifest: path.clone(), processed: entries.len(), failures };
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    eprintln!("{} of {} samples passed; wrote {}", entries.len(), manifest.entries.len(), path.display());
    if !report.failures.is_empty() {
        let names: Vec<String> = report.failures.iter().map(|f| format!("{}: {}", f.sample_id, f.error)).collect();
        return Err(Error::Validation(format!("{} sample(s) failed:\n  {}", names.len(), names.join("\n  "))));
    }
    Ok(CommandResult::ok(vec![path, report_path], None))
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<CommandResult> {
    let mut cfg = load_config(cli, a.toy)?;
    if let Some(ab) = a.ablation {
        cfg.ablation = ab;
    }
    if let Some(m) = a.max_epochs {
        cfg.max_epochs = m;
    }
    if a.max_minutes.is_some() {
        cfg.max_minutes = a.max_minutes;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    cfg.validate()?;
    let manifest = a
        .manifest
        .clone()
        .or_else(|| cfg.manifest.clone())
        .ok_or_else(|| Error::Config("no dataset: pass --manifest or set `manifest` in the configuration".into()))?;
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("runs/train"));
    std::fs::create_dir_all(&out)?;
    let cfg_path = out.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml())?;
    let outcome = train(&cfg, &manifest, &out, a.resume)?;
    let last = outcome.history.last().expect("history has the initial validation");
    eprintln!(
        "stopped ({:?}) after epoch {}: best validation SSIM {:.4} at epoch {}; last SSIM {:.4}, PSNR {:.2} dB",
        outcome.stop, last.epoch, outcome.best_ssim, outcome.best_epoch, last.val.ssim, last.val.psnr
    );
    Ok(CommandResult::ok(
        vec![outcome.best_dir, outcome.last_dir, out.join("epochs.json"), cfg_path],
        Some(out.join("train_log.csv")),
    ))
}

/// SHA-256 over the generator tensors and metadata of a checkpoint.
pub fn checkpoint_hash(dir: &Path) -> Result<String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            n == META_FILE || (n.starts_with(GENERATOR_PREFIX) && n.ends_with(".bin"))
        })
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in &files {
        h.update(f.file_name().unwrap().to_string_lossy().as_bytes());
        h.update(std::fs::read(f)?);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Serialize)]
struct GenerateSidecar {
    frames: usize,
    fps: u32,
    seed: u64,
    checkpoint: PathBuf,
    checkpoint_sha256: String,
    still: PathBuf,
    audio: PathBuf,
    sample_rate: u32,
    resampled_from: Option<u32>,
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<CommandResult> {
    let ckpt = resolve_checkpoint(&a.checkpoint)?;
    let (_, generator) = load_generator(&ckpt)?;
    let arch = &generator.arch;
    let still = read_png(&a.still)?;
    if (still.height(), still.width()) != (arch.height, arch.width) {
        return Err(Error::Validation(format!(
            "{} is {}x{} but the model expects {}x{} faces",
            a.still.display(),
            still.height(),
            still.width(),
            arch.height,
            arch.width
        )));
    }
    let mut clip = read_wav(&a.audio)?;
    let mut resampled_from = None;
    if clip.sample_rate() != arch.sample_rate {
        if !a.resample {
            return Err(Error::Validation(format!(
                "{} is sampled at {} Hz but the model expects {} Hz; resample first or pass --resample",
                a.audio.display(),
                clip.sample_rate(),
                arch.sample_rate
            )));
        }
        resampled_from = Some(clip.sample_rate());
        clip = resample(&clip, arch.sample_rate)?;
    }
    let windows = frame_audio(&clip.peak_normalized(), arch.fps, arch.window_sec)?;
    let seed = cli.seed.unwrap_or(0);
    let video = generator.generate_sequence(&still, &windows, seed)?;
    let out = out_dir(cli, "generated");
    let mut artifacts = write_frames(&out, &video)?;
    let sidecar = GenerateSidecar {
        frames: video.len(),
        fps: arch.fps,
        seed,
        checkpoint: ckpt.clone(),
        checkpoint_sha256: checkpoint_hash(&ckpt)?,
        still: a.still.clone(),
        audio: a.audio.clone(),
        sample_rate: arch.sample_rate,
        resampled_from,
    };
    let side = out.join("generate.json");
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar)?)?;
    artifacts.push(side);
    if let Some(t) = &a.mux_cmd {
        let dest = out.join("video.mp4");
        CommandHook::new(t.clone())?.run(&[
            ("frames", &out.to_string_lossy()),
            ("audio", &a.audio.to_string_lossy()),
            ("fps", &arch.fps.to_string()),
            ("out", &dest.to_string_lossy()),
        ])?;
        artifacts.push(dest);
    }
    eprintln!("wrote {} frames to {}", video.len(), out.display());
    Ok(CommandResult::ok(artifacts, None))
}

fn env_hook(var: &str) -> Result<CommandHook> {
    let t = std::env::var(var).map_err(|_| Error::Config(format!("{var} is not set")))?;
    CommandHook::new(t)
}

fn backends(
    b: &BackendArgs,
    header: Option<&ManifestHeader>,
) -> Result<(Box<dyn FaceEmbedder>, Option<Box<dyn Lipreader>>)> {
    let embedder: Box<dyn FaceEmbedder> = match b.embedder {
        EmbedderArg::Stub => Box::new(StubEmbedder),
        EmbedderArg::Command => Box::new(CommandEmbedder { hook: env_hook(EMBEDDER_ENV)? }),
    };
    let lipreader: Option<Box<dyn Lipreader>> = match b.lipreader {
        None => None,
        Some(LipreaderArg::Toy) => {
            let constants = header
                .and_then(|h| h.toy.clone())
                .ok_or_else(|| Error::Config("the toy lipreader needs a toy dataset manifest".into()))?;
            Some(Box::new(ToyLipreader { constants }))
        }
        Some(LipreaderArg::Command) => Some(Box::new(CommandLipreader { hook: env_hook(LIPREADER_ENV)? })),
    };
    Ok((embedder, lipreader))
}

fn timestamp() -> String {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs().to_string()).unwrap_or_default()
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<CommandResult> {
    let cfg = load_config(cli, false)?;
    let ckpt = resolve_checkpoint(&a.checkpoint)?;
    let (_, generator) = load_generator(&ckpt)?;
    let manifest = read_manifest(&a.manifest)?;
    let entries = match a.split {
        SplitArg::All => manifest.entries.clone(),
        s => {
            let split = split_manifest(&cfg, &a.manifest)?;
            match s {
                SplitArg::Train => split.train,
                SplitArg::Val => split.val,
                _ => split.test,
            }
        }
    };
    let (embedder, lipreader) = backends(&a.backends, manifest.header.as_ref())?;
    let mut report: MetricsReport =
        evaluate_dataset(&generator, &entries, embedder.as_ref(), lipreader.as_deref(), cli.seed.unwrap_or(0));
    report.meta = ReportMeta {
        checkpoint: ckpt.display().to_string(),
        dataset: manifest.header.as_ref().map_or_else(|| a.manifest.display().to_string(), |h| h.dataset.clone()),
        timestamp: timestamp(),
        ..report.meta
    };
    let out = out_dir(cli, "eval");
    std::fs::create_dir_all(&out)?;
    let (csv, json) = (out.join("metrics.csv"), out.join("metrics.json"));
    report.write_csv(&csv)?;
    report.write_json(&json)?;
    print!("{}", format_table(std::slice::from_ref(&report.aggregate)));
    eprintln!("{} samples, {} failed; wrote {}", report.meta.samples, report.meta.failures, csv.display());
    let mut result = CommandResult::ok(vec![csv, json], None);
    if report.meta.failures > 0 {
        for r in report.rows.iter().filter(|r| r.error.is_some()) {
            eprintln!("{}: {}", r.label, r.error.as_deref().unwrap_or(""));
        }
        result.exit_code = 2;
    }
    Ok(result)
}

fn ablate(cli: &Cli, a: &AblateArgs) -> Result<CommandResult> {
    let mut cfg = load_config(cli, a.toy)?;
    if let Some(m) = a.max_epochs {
        cfg.max_epochs = m;
    }
    if a.max_minutes.is_some() {
        cfg.max_minutes = a.max_minutes;
    }
    let manifest_path = a
        .manifest
        .clone()
        .or_else(|| cfg.manifest.clone())
        .ok_or_else(|| Error::Config("no dataset: pass --manifest or set `manifest` in the configuration".into()))?;
    let manifest = read_manifest(&manifest_path)?;
    let (embedder, lipreader) = backends(&a.backends, manifest.header.as_ref())?;
    let out = out_dir(cli, "runs/ablation");
    let table = run_ablation(&cfg, &manifest_path, &out, embedder.as_ref(), lipreader.as_deref())?;
    table.write(&out)?;
    print!("{}", table.format());
    Ok(CommandResult::ok(
        vec![out.join("ablation.csv"), out.join("ablation.json"), out.join("ablation.txt")],
        None,
    ))
}

fn make_toy(cli: &Cli, a: &MakeToyArgs) -> Result<CommandResult> {
    let out = out_dir(cli, "toy_data");
    let ds = make_toy_dataset(&out, a.subjects, a.samples, a.frames, a.height, a.width, cli.seed.unwrap_or(0))?;
    eprintln!("wrote {} samples to {}", ds.entries.len(), ds.manifest_path.display());
    Ok(CommandResult::ok(vec![ds.manifest_path], None))
}

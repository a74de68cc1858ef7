use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use facesynth_core::audio::AudioClip;
use facesynth_core::media::{load_manifest, write_wav};
use facesynth_core::model::ArchConfig;
use facesynth_core::training::trainer::read_step_log;
use facesynth_core::training::TrainConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_facesynth"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
    config: PathBuf,
    run: PathBuf,
}

/// Tiny toy dataset plus a one-epoch training run, shared by the tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let data = root.join("toy");
        let o = run(&["make-toy", "--out", s(&data), "--subjects", "3", "--samples", "6", "--frames", "6", "--height", "16", "--width", "16"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let cfg = TrainConfig {
            batch_size: 2,
            max_epochs: 1,
            dataset: "toy".into(),
            arch: ArchConfig::tiny(),
            ..TrainConfig::default()
        };
        let config = root.join("tiny.toml");
        std::fs::write(&config, cfg.to_toml()).unwrap();
        let run_dir = root.join("run");
        let manifest = data.join("manifest.jsonl");
        let o = run(&["train", "--config", s(&config), "--manifest", s(&manifest), "--out", s(&run_dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
        Fixture { _dir: dir, root, manifest, config, run: run_dir }
    })
}

fn scratch(name: &str) -> PathBuf {
    let p = fixture().root.join(name);
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn write_tone(path: &Path, rate: u32, samples: usize) {
    let data = (0..samples).map(|i| (i as f32 * 0.05).sin() * 0.5).collect();
    write_wav(path, &AudioClip::new(data, rate).unwrap()).unwrap();
}

fn still(f: &Fixture) -> PathBuf {
    f.root.join("toy/s01/s01_00000/frames/frame_00000.png")
}

#[test]
fn help_lists_every_subcommand_and_unknown_flags_fail() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["preprocess", "train", "generate", "evaluate", "ablate", "--config", "--seed", "--out"] {
        assert!(text.contains(c), "help is missing {c}");
    }
    let o = run(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn preprocess_toy_keeps_entries() {
    let f = fixture();
    let out = scratch("pre");
    let o = run(&["preprocess", "--manifest", s(&f.manifest), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let before = load_manifest(&f.manifest).unwrap();
    let after = load_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn preprocess_runs_alignment_hook() {
    let f = fixture();
    let out = scratch("pre_align");
    let o = run(&["preprocess", "--manifest", s(&f.manifest), "--out", s(&out), "--align-cmd", "cp {in}/* {out}/"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let after = load_manifest(&out.join("manifest.jsonl")).unwrap();
    assert!(after.iter().all(|e| e.frames_path.starts_with(std::path::absolute(out.join("aligned")).unwrap())));
}

#[test]
fn preprocess_reports_missing_audio_by_sample() {
    let f = fixture();
    let dir = scratch("pre_missing");
    let text = std::fs::read_to_string(&f.manifest).unwrap();
    let base = f.manifest.parent().unwrap();
    let text = text.replace("\"s01/s01_00000/audio.wav\"", "\"s01/s01_00000/gone.wav\"");
    let m = dir.join("manifest.jsonl");
    // keep paths resolvable from the new location
    std::fs::write(&m, text.replace("\"s0", &format!("\"{}/s0", base.display()))).unwrap();
    let o = run(&["preprocess", "--manifest", s(&m), "--out", s(&dir.join("out"))]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("gone.wav"), "{}", stderr(&o));
}

#[test]
fn preprocess_surfaces_framing_errors() {
    let f = fixture();
    let dir = scratch("pre_rate");
    let text = std::fs::read_to_string(&f.manifest).unwrap();
    let base = f.manifest.parent().unwrap();
    let text = text.replace("\"s0", &format!("\"{}/s0", base.display())).replace("\"fps\":25.0", "\"fps\":30.0");
    let m = dir.join("manifest.jsonl");
    std::fs::write(&m, text).unwrap();
    let o = run(&["preprocess", "--manifest", s(&m), "--out", s(&dir.join("out"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("resample"), "{}", stderr(&o));
    assert!(stderr(&o).contains("s01_00000"));
}

#[test]
fn invalid_config_names_the_field() {
    let f = fixture();
    let bad = f.root.join("bad.toml");
    std::fs::write(&bad, "lambda_l1 = 400.0\nlearning_rate = 0.1\n").unwrap();
    let o = run(&["train", "--config", s(&bad), "--manifest", s(&f.manifest), "--out", s(&f.root.join("bad_run"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
    std::fs::write(&bad, "lr_generator = -1.0\n").unwrap();
    let o = run(&["train", "--config", s(&bad), "--manifest", s(&f.manifest)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lr_generator"));
}

#[test]
fn bundled_configs_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    assert_eq!(TrainConfig::load(&dir.join("default.toml")).unwrap(), TrainConfig::default());
    assert_eq!(TrainConfig::load(&dir.join("toy.toml")).unwrap(), TrainConfig::toy());
}

#[test]
fn train_writes_checkpoints_and_logs() {
    let f = fixture();
    for p in ["best/meta.json", "last/meta.json", "train_log.csv", "epochs.json", "config.toml"] {
        assert!(f.run.join(p).is_file(), "missing {p}");
    }
}

#[test]
fn l1_only_training_logs_no_adversarial_terms_and_resumes() {
    let f = fixture();
    let dir = f.root.join("l1_run");
    let args = |epochs: &str| {
        let mut v = vec!["train", "--config", s(&f.config), "--manifest", s(&f.manifest), "--out", s(&dir)];
        v.extend(["--ablation", "l1_only", "--resume", "--max-epochs", epochs]);
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let o = bin().args(args("1")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let n = read_step_log(&dir.join("train_log.csv")).unwrap().len();
    let o = bin().args(args("2")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let log = read_step_log(&dir.join("train_log.csv")).unwrap();
    assert_eq!(log.len(), 2 * n);
    assert!(log.windows(2).all(|w| w[1].step == w[0].step + 1));
    assert!(log.iter().all(|r| r.l_adv_img == 0.0 && r.l_adv_seq == 0.0 && r.g_adv_img == 0.0 && r.g_adv_seq == 0.0));
}

#[test]
fn generate_three_seconds_gives_75_frames_deterministically() {
    let f = fixture();
    let dir = scratch("gen");
    let wav = dir.join("speech.wav");
    write_tone(&wav, 2000, 6000);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        let o = run(&["generate", "--checkpoint", s(&f.run), "--still", s(&still(f)), "--audio", s(&wav), "--out", s(out), "--seed", "4"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let frames = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "png")).collect();
        v.sort();
        v
    };
    let (fa, fb) = (frames(&a), frames(&b));
    assert_eq!(fa.len(), 75);
    assert_eq!(fa[74].file_name().unwrap(), "frame_00074.png");
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("generate.json")).unwrap()).unwrap();
    assert_eq!(side["fps"], 25);
    assert_eq!(side["seed"], 4);
    assert_eq!(side["checkpoint_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn generate_single_window_and_rate_handling() {
    let f = fixture();
    let dir = scratch("gen_rate");
    let one = dir.join("one.wav");
    write_tone(&one, 2000, 80);
    let o = run(&["generate", "--checkpoint", s(&f.run), "--still", s(&still(f)), "--audio", s(&one), "--out", s(&dir.join("one"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("one/frame_00000.png").is_file() && !dir.join("one/frame_00001.png").exists());

    let hi = dir.join("hi.wav");
    write_tone(&hi, 8000, 8000);
    let o = run(&["generate", "--checkpoint", s(&f.run), "--still", s(&still(f)), "--audio", s(&hi), "--out", s(&dir.join("hi"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("resample"), "{}", stderr(&o));
    let o = run(&["generate", "--checkpoint", s(&f.run), "--still", s(&still(f)), "--audio", s(&hi), "--out", s(&dir.join("hi")), "--resample"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("hi/frame_00024.png").is_file() && !dir.join("hi/frame_00025.png").exists());
}

#[test]
fn evaluate_without_lipreader_prints_na_wer() {
    let f = fixture();
    let out = scratch("eval_plain");
    let o = run(&["evaluate", "--checkpoint", s(&f.run), "--manifest", s(&f.manifest), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    let row = table.lines().nth(1).unwrap();
    assert!(row.trim_end().ends_with("N/A"), "{table}");
    assert!(out.join("metrics.csv").is_file() && out.join("metrics.json").is_file());
}

#[test]
fn evaluate_toy_reports_every_column() {
    let f = fixture();
    let out = scratch("eval_toy");
    let o = run(&["evaluate", "--checkpoint", s(&f.run), "--manifest", s(&f.manifest), "--out", s(&out), "--lipreader", "toy"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(!table.lines().nth(1).unwrap().contains("N/A"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["samples"], 2);
    assert_eq!(json["meta"]["dataset"], "toy");
}

#[test]
fn evaluate_empty_split_succeeds_with_zero_rows() {
    let f = fixture();
    let data = f.root.join("toy2");
    let o = run(&["make-toy", "--out", s(&data), "--subjects", "2", "--samples", "2", "--frames", "6", "--height", "16", "--width", "16"]);
    assert!(o.status.success());
    let out = scratch("eval_empty");
    let o = run(&["evaluate", "--checkpoint", s(&f.run), "--manifest", s(&data.join("manifest.jsonl")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["samples"], 0);
}

#[test]
fn ablate_emits_rows_in_fixed_order() {
    let f = fixture();
    let out = scratch("ablate");
    let o = run(&["ablate", "--config", s(&f.config), "--manifest", s(&f.manifest), "--out", s(&out), "--lipreader", "toy"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    let labels: Vec<&str> = table.lines().skip(1).map(|l| l[..24].trim()).collect();
    assert_eq!(labels, ["Ground Truth Videos", "L1 loss", "L1 + Adv_img", "L1 + Adv_img + Adv_seq"]);
    let gt = table.lines().nth(1).unwrap();
    assert_eq!(gt.matches("N/A").count(), 2, "{gt}");
    assert!(out.join("ablation.csv").is_file());
}

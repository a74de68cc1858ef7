use std::path::Path;

use facesynth_core::media::{make_toy_dataset, Frame};
use facesynth_core::model::ArchConfig;
use facesynth_core::nn::{Graph, Tensor};
use facesynth_core::training::losses::l1_loss_var;
use facesynth_core::training::trainer::read_step_log;
use facesynth_core::training::*;
use facesynth_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_cfg(ablation: Ablation) -> TrainConfig {
    TrainConfig {
        ablation,
        batch_size: 2,
        max_epochs: 2,
        seq_disc_negatives: true,
        dataset: "toy".into(),
        arch: ArchConfig::tiny(),
        ..TrainConfig::default()
    }
}

fn tiny_data(dir: &Path) -> std::path::PathBuf {
    make_toy_dataset(&dir.join("data"), 3, 12, 6, 16, 16, 3).unwrap().manifest_path
}

fn random_frame(rng: &mut impl Rng, h: usize, w: usize) -> Frame {
    Frame::from_clamped(h, w, (0..3 * h * w).map(|_| rng.random_range(-1.0..=1.0))).unwrap()
}

#[test]
fn l1_matches_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (a, b) = (random_frame(&mut rng, 8, 6), random_frame(&mut rng, 8, 6));
        let mut s = 0.0;
        for c in 0..3 {
            for y in 4..8 {
                for x in 0..6 {
                    s += (a.get(c, y, x) as f64 - b.get(c, y, x) as f64).abs();
                }
            }
        }
        assert!((l1_lower_half(&a, &b).unwrap() - s).abs() < 1e-10);
    }
    let small = Frame::filled(4, 4, [0.0; 3]).unwrap();
    assert!(matches!(l1_lower_half(&small, &random_frame(&mut rng, 8, 6)), Err(Error::Shape(_))));
}

#[test]
fn graph_l1_agrees_and_ignores_upper_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, h, w) = (3, 8, 6);
    let real: Vec<Frame> = (0..n).map(|_| random_frame(&mut rng, h, w)).collect();
    let fake: Vec<Frame> = (0..n).map(|_| random_frame(&mut rng, h, w)).collect();
    let to_t = |fs: &[Frame]| Tensor::new(vec![n, 3, h, w], fs.iter().flat_map(|f| f.data().iter().map(|&v| v as f64)).collect());
    for red in [L1Reduction::Sum, L1Reduction::Mean] {
        let mut g = Graph::new(true);
        let x = g.input(to_t(&fake));
        let l = l1_loss_var(&mut g, x, to_t(&real), red);
        let per: f64 = real.iter().zip(&fake).map(|(r, f)| l1_lower_half(r, f).unwrap()).sum::<f64>() / n as f64;
        let expect = match red {
            L1Reduction::Sum => per,
            L1Reduction::Mean => per / (3 * (h / 2) * w) as f64,
        };
        assert!((g.value(l).item() - expect).abs() < 1e-10);
        let grads = g.backward(l);
        let gx = grads.wrt(x).unwrap();
        for (i, v) in gx.iter().enumerate() {
            let y = (i / w) % h;
            if y < h / 2 {
                assert_eq!(*v, 0.0);
            } else {
                assert_ne!(*v, 0.0);
            }
        }
    }
}

proptest! {
    #[test]
    fn total_is_adversarial_plus_weighted_l1(a in -50.0..0.0f64, b in -50.0..0.0f64, l1 in 0.0..1e4f64) {
        let cfg = TrainConfig::default();
        let t = assemble_total(a, b, l1, cfg.lambda_l1);
        prop_assert!((t - (a + b + 400.0 * l1)).abs() <= 1e-9 * t.abs().max(1.0));
    }

    #[test]
    fn schedule_is_flat_then_geometric(epoch in 0usize..80) {
        let cfg = TrainConfig::default();
        let (g, d, s) = cfg.learning_rates(epoch);
        let f = if epoch <= 20 { 1.0 } else { 0.9f64.powi(epoch as i32 - 20) };
        prop_assert!((g - 2e-4 * f).abs() < 1e-15 && (d - 1e-3 * f).abs() < 1e-15);
        prop_assert_eq!(s, 5e-5);
    }
}

#[test]
fn adversarial_term_limits() {
    let eps = 1e-6;
    assert!(eq1_pair(1.0, 0.0, eps).abs() < 1e-5);
    assert!((gen_adv_value(0.0, eps, GenAdvLoss::NonSaturating) - (-eps.ln())).abs() < 1e-9);
    assert!((eq1_pair(0.5, 0.5, eps) - 2.0 * 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn same_seed_gives_identical_first_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let cfg = TrainConfig { max_epochs: 3, batch_size: 1, ..tiny_cfg(Ablation::Full) };
    let a = train(&cfg, &manifest, &tmp.path().join("a"), false).unwrap();
    let b = train(&cfg, &manifest, &tmp.path().join("b"), false).unwrap();
    let la = read_step_log(&a.out_dir.join("train_log.csv")).unwrap();
    let lb = read_step_log(&b.out_dir.join("train_log.csv")).unwrap();
    assert!(la.len() >= 10, "only {} steps", la.len());
    assert_eq!(la[..10], lb[..10]);
    let c = train(&TrainConfig { seed: 9, ..cfg }, &manifest, &tmp.path().join("c"), false).unwrap();
    let lc = read_step_log(&c.out_dir.join("train_log.csv")).unwrap();
    assert_ne!(la[0].total, lc[0].total);
}

#[test]
fn log_records_schedule_and_all_terms() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let cfg = TrainConfig { max_epochs: 4, decay_start_epoch: 2, patience: 10, ..tiny_cfg(Ablation::Full) };
    let out = train(&cfg, &manifest, &tmp.path().join("run"), false).unwrap();
    assert_eq!(out.history.len(), 5);
    assert_eq!(out.stop, StopReason::MaxEpochs);
    let log = read_step_log(&out.out_dir.join("train_log.csv")).unwrap();
    for r in &log {
        let f = 0.9f64.powi(r.epoch.saturating_sub(2) as i32);
        assert!((r.lr_generator - 2e-4 * f).abs() < 1e-15, "{r:?}");
        assert!((r.lr_frame_disc - 1e-3 * f).abs() < 1e-15);
        assert_eq!(r.lr_seq_disc, 5e-5);
        let l = r.losses();
        assert!(l.is_finite() && l.l_l1 >= 0.0);
        assert!(l.l_adv_img < 0.0 && l.l_adv_seq < 0.0 && l.g_adv_img > 0.0 && l.g_adv_seq > 0.0);
        assert!((l.total - (l.l_adv_img + l.l_adv_seq + 400.0 * l.l_l1)).abs() < 1e-9 * l.total.abs());
    }
    assert!(out.best_dir.join("meta.json").is_file() && out.last_dir.join("opt.generator.adam.json").is_file());
    let (meta, _) = load_generator(&out.out_dir).unwrap();
    assert_eq!(meta.epoch, out.best_epoch);
}

#[test]
fn l1_only_never_touches_discriminators() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let cfg = tiny_cfg(Ablation::L1Only);
    let out = train(&cfg, &manifest, &tmp.path().join("run"), false).unwrap();
    let fresh = Networks::new(&cfg.arch, cfg.seed).unwrap();
    let (_, trained) = load_networks(&out.last_dir).unwrap();
    for (a, b) in fresh.frame_disc.params.iter().zip(trained.frame_disc.params.iter()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
    for (a, b) in fresh.seq_disc.params.iter().zip(trained.seq_disc.params.iter()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
    assert!(fresh.generator.params.iter().zip(trained.generator.params.iter()).any(|(a, b)| a.value != b.value));
    for r in read_step_log(&out.out_dir.join("train_log.csv")).unwrap() {
        assert_eq!((r.l_adv_img, r.l_adv_seq, r.g_adv_img, r.g_adv_seq), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.total, 400.0 * r.l_l1);
    }
}

#[test]
fn image_only_ablation_leaves_sequence_discriminator() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let cfg = TrainConfig { max_epochs: 1, ..tiny_cfg(Ablation::L1AdvImg) };
    let out = train(&cfg, &manifest, &tmp.path().join("run"), false).unwrap();
    let fresh = Networks::new(&cfg.arch, cfg.seed).unwrap();
    let (_, trained) = load_networks(&out.last_dir).unwrap();
    assert!(fresh.seq_disc.params.iter().zip(trained.seq_disc.params.iter()).all(|(a, b)| a.value == b.value));
    assert!(fresh.frame_disc.params.iter().zip(trained.frame_disc.params.iter()).any(|(a, b)| a.value != b.value));
}

#[test]
fn resume_continues_from_last_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let dir = tmp.path().join("run");
    let cfg = TrainConfig { max_epochs: 1, ..tiny_cfg(Ablation::Full) };
    let first = train(&cfg, &manifest, &dir, true).unwrap();
    let steps = read_step_log(&dir.join("train_log.csv")).unwrap().len();
    let second = train(&TrainConfig { max_epochs: 2, ..cfg.clone() }, &manifest, &dir, true).unwrap();
    assert_eq!(first.history.len(), 2);
    assert_eq!(second.history.len(), 3);
    assert_eq!(second.history[..2], first.history[..]);
    let log = read_step_log(&dir.join("train_log.csv")).unwrap();
    assert_eq!(log.len(), 2 * steps);
    assert!(log.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn non_finite_loss_aborts_with_fault_report() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let dir = tmp.path().join("run");
    let cfg = TrainConfig { lambda_l1: f64::MAX, ..tiny_cfg(Ablation::L1Only) };
    let err = train(&cfg, &manifest, &dir, false).unwrap_err();
    assert!(matches!(err, Error::TrainingFault(_)), "{err}");
    assert!(dir.join("fault.json").is_file());
    assert!(dir.join("last").join("meta.json").is_file());
}

#[test]
fn early_stopping_respects_patience() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    // weights barely move; only batch-norm running statistics drift
    let cfg = TrainConfig { max_epochs: 20, patience: 2, lr_generator: 1e-300, ..tiny_cfg(Ablation::L1Only) };
    let out = train(&cfg, &manifest, &tmp.path().join("run"), false).unwrap();
    assert_eq!(out.stop, StopReason::EarlyStop);
    assert_eq!(out.history.len(), out.best_epoch + cfg.patience + 1);
    assert!(out.history[out.best_epoch + 1..].iter().all(|h| !h.improved && h.val.ssim <= out.best_ssim));
    assert!(out.history[out.best_epoch].improved);
}

#[test]
fn time_budget_stops_training() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tiny_data(tmp.path());
    let cfg = TrainConfig { max_epochs: 100, max_minutes: Some(0.0), ..tiny_cfg(Ablation::L1Only) };
    let out = train(&cfg, &manifest, &tmp.path().join("run"), false).unwrap();
    assert_eq!(out.stop, StopReason::TimeBudget);
    assert_eq!(out.history.len(), 1);
}

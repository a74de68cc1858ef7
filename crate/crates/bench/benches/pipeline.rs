use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use facesynth_bench::{noise_clip, noise_windows, toy_frame};
use facesynth_core::audio::frame_audio;
use facesynth_core::eval::{cpbd, fdbm, psnr, ssim};
use facesynth_core::media::make_toy_dataset;
use facesynth_core::model::{ArchConfig, Generator};
use facesynth_core::training::{assemble, load_clips, split_manifest, TrainConfig, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn audio(c: &mut Criterion) {
    let arch = ArchConfig::toy();
    let clip = noise_clip(&arch, 75, 1);
    c.bench_function("frame_audio 3s @ 8kHz", |b| b.iter(|| frame_audio(black_box(&clip), 25, 0.16).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let (a, b) = (toy_frame(1, 2.0), toy_frame(1, 8.0));
    c.bench_function("ssim 64x64", |bn| bn.iter(|| ssim(black_box(&a), black_box(&b)).unwrap()));
    c.bench_function("psnr 64x64", |bn| bn.iter(|| psnr(black_box(&a), black_box(&b)).unwrap()));
    c.bench_function("cpbd 64x64", |bn| bn.iter(|| cpbd(black_box(&a))));
    c.bench_function("fdbm 64x64", |bn| bn.iter(|| fdbm(black_box(&a))));
}

fn generator(c: &mut Criterion) {
    let arch = ArchConfig::toy();
    let g = Generator::new(arch.clone(), 0).unwrap();
    let still = toy_frame(2, 1.0);
    let windows = noise_windows(&arch, 25, 2);
    c.bench_function("generator step (toy)", |b| {
        let mut s = g.session(&still, 0).unwrap();
        let mut t = 0;
        b.iter(|| {
            let f = s.step(windows.frame(t % windows.len())).unwrap();
            t += 1;
            f
        })
    });
    c.bench_function("generate 25 frames (toy)", |b| b.iter(|| g.generate_sequence(&still, &windows, 0).unwrap()));
}

fn training(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_toy_dataset(&dir.path().join("data"), 3, 6, 10, 16, 16, 0).unwrap();
    let cfg = TrainConfig {
        batch_size: 2,
        seq_disc_negatives: true,
        dataset: "toy".into(),
        arch: ArchConfig::tiny(),
        ..TrainConfig::default()
    };
    let split = split_manifest(&cfg, &ds.manifest_path).unwrap();
    let train = load_clips(&split.train, &cfg.arch).unwrap();
    let val = load_clips(&split.val, &cfg.arch).unwrap();
    let batch = assemble(&train, &[0, 1], &[false, true]).unwrap();
    let mut trainer = Trainer::new(cfg, train, val, &dir.path().join("run")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("train step (tiny, full)", |b| b.iter(|| trainer.train_step(&batch, &mut rng).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = audio, metrics, generator, training
}
criterion_main!(benches);

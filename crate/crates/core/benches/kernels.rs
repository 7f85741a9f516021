//! Data-parallel kernels on a one-thread pool against the default pool.
//!
//! Build with `--no-default-features` to time the sequential fallback that
//! bypasses rayon entirely.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hoodframe::autodiff::{Tape, Tensor};
use hoodframe::model::{inputs_of, EncoderPreset, FusedModel, Modality, ModelConfig};
use hoodframe::synth::{gen_dataset, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::current_num_threads();
    let mut sizes = vec![1];
    if default > 1 {
        sizes.push(default);
    }
    sizes
        .into_iter()
        .map(|n| {
            (
                format!("{n}-thread"),
                rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap(),
            )
        })
        .collect()
}

fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(&[8, 16, 32, 32], &mut rng);
    let k = random(&[16, 16, 3, 3], &mut rng);
    let mut group = c.benchmark_group("conv2d_8x16x32x32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("forward_backward", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf(x.clone(), true);
                    let kv = tape.leaf(k.clone(), true);
                    let y = tape.conv2d(xv, kv, 1, 1).unwrap();
                    let loss = tape.sum(y).unwrap();
                    tape.backward(loss).unwrap();
                })
            })
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let synth = SynthConfig {
        section_len: 64,
        depth_len: 8,
        ..SynthConfig::default()
    };
    let records = gen_dataset(32, 3, &synth).unwrap();
    let cfg = ModelConfig {
        encoder: EncoderPreset::Mini,
        section_len: 64,
        depth_len: 8,
        ..ModelConfig::default()
    };
    let model = FusedModel::build(&cfg, Modality::Multimodal).unwrap();
    let inputs = inputs_of(&records);
    let mut group = c.benchmark_group("mini_predict_32");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(&name, |b| {
            b.iter(|| pool.install(|| model.predict_rows(&inputs).unwrap()))
        });
    }
    group.finish();
}

fn generate(c: &mut Criterion) {
    let synth = SynthConfig::default();
    let mut group = c.benchmark_group("gen_dataset_16");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(&name, |b| {
            b.iter(|| pool.install(|| gen_dataset(16, 5, &synth).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, conv, predict, generate);
criterion_main!(benches);

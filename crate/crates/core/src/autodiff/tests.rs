use super::*;
use crate::error::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn t(dims: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(dims.to_vec(), data.to_vec()).unwrap()
}

fn random(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    let n: usize = dims.iter().product();
    t(dims, &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

/// Fixed-coefficient weighting so the scalar loss exercises every output
/// element with a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, y: Var) -> crate::Result<Var> {
    let dims = tape.value(y).dims().to_vec();
    let n: usize = dims.iter().product();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
    let wv = tape.leaf(Tensor::new(dims, w).unwrap(), false);
    let target = tape.leaf(Tensor::zeros(tape.value(y).dims().to_vec()).unwrap(), false);
    let sum = tape.add(y, wv)?;
    tape.mse_loss(sum, target)
}

#[test]
fn dense_identity_and_hand_arithmetic() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]), false);
    let w = tape.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), false);
    let b = tape.leaf(t(&[2], &[0.0, 0.0]), false);
    let y = tape.dense(x, w, b).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);

    let x = tape.leaf(t(&[1, 2], &[1.0, 2.0]), false);
    let w = tape.leaf(t(&[2, 1], &[1.0, 1.0]), false);
    let b = tape.leaf(t(&[1], &[0.0]), false);
    let y = tape.dense(x, w, b).unwrap();
    assert_eq!(tape.value(y).data(), &[3.0]);

    let bad = tape.leaf(t(&[3, 1], &[1.0; 3]), false);
    assert!(matches!(tape.dense(x, bad, b), Err(Error::Usage(_))));
}

#[test]
fn dense_weight_gradient_is_column_sums_of_input() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), false);
    let w = tape.leaf(t(&[2, 2], &[0.5, -1.0, 2.0, 0.25]), true);
    let b = tape.leaf(t(&[2], &[0.1, 0.2]), true);
    let y = tape.dense(x, w, b).unwrap();
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    // d sum / dW[i][j] = Σ_b x[b][i]
    assert_eq!(tape.grad(w).unwrap(), &[9.0, 9.0, 12.0, 12.0]);
    assert_eq!(tape.grad(b).unwrap(), &[3.0, 3.0]);
}

#[test]
fn conv_identity_kernel_and_constant_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tape = Tape::new();
    let img = random(&mut rng, &[2, 1, 5, 5]);
    let x = tape.leaf(img.clone(), false);
    let k = tape.leaf(t(&[1, 1, 1, 1], &[1.0]), false);
    let y = tape.conv2d(x, k, 1, 0).unwrap();
    assert_eq!(tape.value(y), &img.detached());

    let c = 0.7;
    let x = tape.leaf(Tensor::full(vec![1, 1, 6, 6], c).unwrap(), false);
    let k = tape.leaf(Tensor::full(vec![1, 1, 3, 3], 1.0).unwrap(), false);
    let y = tape.conv2d(x, k, 1, 0).unwrap();
    assert_eq!(tape.value(y).dims(), &[1, 1, 4, 4]);
    for v in tape.value(y).data() {
        assert!((v - 9.0 * c).abs() < 1e-12);
    }
    assert!(matches!(tape.conv2d(x, k, 0, 0), Err(Error::Usage(_))));
    let big = tape.leaf(Tensor::full(vec![1, 1, 9, 9], 1.0).unwrap(), false);
    assert!(matches!(tape.conv2d(x, big, 1, 1), Err(Error::Usage(_))));
}

#[test]
fn conv_output_extent_formula() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![1, 2, 128, 128]).unwrap(), false);
    let k = tape.leaf(Tensor::zeros(vec![4, 2, 7, 7]).unwrap(), false);
    let y = tape.conv2d(x, k, 2, 3).unwrap();
    assert_eq!(tape.value(y).dims(), &[1, 4, 64, 64]);
}

#[test]
fn batch_norm_constant_batch_and_two_values() {
    let mut tape = Tape::new();
    let mut stats = RunningStats::new(2);
    let opts = BatchNormOptions::default();
    let gamma = tape.leaf(t(&[2], &[1.0, 1.0]), false);
    let beta = tape.leaf(t(&[2], &[0.0, 0.0]), false);

    let x = tape.leaf(Tensor::full(vec![4, 2], 3.0).unwrap(), false);
    let y = tape.batch_norm(x, gamma, beta, Mode::Train, &mut stats, opts).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));

    let x = tape.leaf(t(&[2, 2], &[1.0, 1.0, 3.0, 3.0]), false);
    let y = tape.batch_norm(x, gamma, beta, Mode::Train, &mut stats, opts).unwrap();
    let expect = 1.0 / (1.0f64 + 1e-5).sqrt();
    let out = tape.value(y).data();
    for f in 0..2 {
        assert!((out[f] + expect).abs() < 1e-12);
        assert!((out[2 + f] - expect).abs() < 1e-12);
    }
    assert!((expect - 0.999995).abs() < 1e-6);
}

#[test]
fn batch_norm_running_stats_and_eval_identity() {
    let mut tape = Tape::new();
    let opts = BatchNormOptions::default();
    let gamma = tape.leaf(t(&[1], &[1.0]), false);
    let beta = tape.leaf(t(&[1], &[0.0]), false);
    let mut stats = RunningStats::new(1);
    let x = tape.leaf(t(&[3, 1], &[-2.0, 0.5, 4.0]), false);
    let y = tape.batch_norm(x, gamma, beta, Mode::Eval, &mut stats, opts).unwrap();
    for (a, b) in tape.value(y).data().iter().zip([-2.0, 0.5, 4.0]) {
        assert!((a - b).abs() < 1e-4 * b.abs().max(1.0));
    }
    assert_eq!(stats, RunningStats::new(1), "eval must not touch stats");

    let x = tape.leaf(t(&[2, 1], &[1.0, 3.0]), false);
    tape.batch_norm(x, gamma, beta, Mode::Train, &mut stats, opts).unwrap();
    assert!((stats.mean[0] - 0.2).abs() < 1e-12);
    assert!((stats.var[0] - (0.9 + 0.1 * 1.0)).abs() < 1e-12);

    let one = tape.leaf(t(&[1, 1], &[1.0]), false);
    assert!(matches!(
        tape.batch_norm(one, gamma, beta, Mode::Train, &mut stats, opts),
        Err(Error::Usage(_))
    ));
}

#[test]
fn batch_norm_train_output_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tape = Tape::new();
    let mut stats = RunningStats::new(3);
    let x = tape.leaf(random(&mut rng, &[16, 3]), false);
    let gamma = tape.leaf(t(&[3], &[1.0; 3]), false);
    let beta = tape.leaf(t(&[3], &[0.0; 3]), false);
    let y = tape
        .batch_norm(x, gamma, beta, Mode::Train, &mut stats, BatchNormOptions::default())
        .unwrap();
    let out = tape.value(y).data();
    for f in 0..3 {
        let col: Vec<f64> = (0..16).map(|b| out[b * 3 + f]).collect();
        let m = col.iter().sum::<f64>() / 16.0;
        let v = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / 16.0;
        assert!(m.abs() <= 1e-6);
        assert!((v - 1.0).abs() <= 1e-4);
    }
}

#[test]
fn relu_values_and_dead_gradient() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[3], &[-1.0, 0.0, 2.0]), true);
    let y = tape.relu(x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 1.0]);

    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2], &[-1.0, -3.0]), true);
    let y = tape.relu(x).unwrap();
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0]);
}

#[test]
fn max_pool_values_and_tie_rule() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), true);
    let y = tape.max_pool2d(x, 2, 2, 0).unwrap();
    assert_eq!(tape.value(y).data(), &[4.0]);

    let x = tape.leaf(Tensor::full(vec![1, 1, 4, 4], 5.0).unwrap(), true);
    let y = tape.max_pool2d(x, 2, 2, 0).unwrap();
    assert_eq!(tape.value(y).data(), &[5.0; 4]);
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    let g = tape.grad(x).unwrap();
    let mut want = [0.0; 16];
    for (r, c) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
        want[r * 4 + c] = 1.0;
    }
    assert_eq!(g, &want[..]);
    assert!(matches!(tape.max_pool2d(x, 5, 1, 0), Err(Error::Usage(_))));
    assert!(matches!(tape.max_pool2d(x, 0, 1, 0), Err(Error::Usage(_))));
}

#[test]
fn global_avg_pool_values() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::full(vec![1, 2, 3, 3], 1.5).unwrap(), false);
    let y = tape.global_avg_pool(x).unwrap();
    assert_eq!(tape.value(y).data(), &[1.5, 1.5]);
    let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), true);
    let y = tape.global_avg_pool(x).unwrap();
    assert_eq!(tape.value(y).data(), &[2.5]);
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.25; 4]);
}

#[test]
fn dropout_modes_and_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2, 2], &[1.0, -2.0, 3.0, 4.0]), false);
    assert_eq!(tape.dropout(x, 0.5, Mode::Eval, &mut rng).unwrap(), x);
    assert_eq!(tape.dropout(x, 0.0, Mode::Train, &mut rng).unwrap(), x);
    assert!(matches!(
        tape.dropout(x, 1.0, Mode::Train, &mut rng),
        Err(Error::Usage(_))
    ));

    let n = 100_000;
    let ones = tape.leaf(Tensor::full(vec![n], 1.0).unwrap(), false);
    let y = tape.dropout(ones, 0.5, Mode::Train, &mut rng).unwrap();
    let mean = tape.value(y).data().iter().sum::<f64>() / n as f64;
    // Each element is 0 or 2 with equal probability: σ of the mean = 1/√n.
    let sigma = 1.0 / (n as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
}

#[test]
fn concat_widths_and_gradient_split() {
    let mut tape = Tape::new();
    let parts: Vec<Var> = (0..5)
        .map(|i| tape.leaf(Tensor::full(vec![2, 128], i as f64).unwrap(), true))
        .collect();
    let y = tape.concat(&parts).unwrap();
    assert_eq!(tape.value(y).dims(), &[2, 640]);
    assert_eq!(tape.value(y).data()[128], 1.0);
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    for p in &parts {
        assert_eq!(tape.grad(*p).unwrap(), &vec![1.0; 256][..]);
    }

    let single = tape.leaf(t(&[1, 3], &[1.0, 2.0, 3.0]), false);
    let y = tape.concat(&[single]).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0]);
    let other = tape.leaf(t(&[2, 3], &[0.0; 6]), false);
    assert!(matches!(tape.concat(&[single, other]), Err(Error::Usage(_))));
}

#[test]
fn add_values_and_gradients() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2], &[1.0, 2.0]), true);
    let y = tape.leaf(t(&[2], &[3.0, 4.0]), true);
    let z = tape.leaf(t(&[2], &[0.0, 0.0]), false);
    let s = tape.add(x, y).unwrap();
    assert_eq!(tape.value(s).data(), &[4.0, 6.0]);
    let xz = tape.add(x, z).unwrap();
    assert_eq!(tape.value(xz).data(), &[1.0, 2.0]);
    let loss = tape.sum(s).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0]);
    assert_eq!(tape.grad(y).unwrap(), &[1.0, 1.0]);
    let w = tape.leaf(t(&[3], &[0.0; 3]), false);
    assert!(matches!(tape.add(x, w), Err(Error::Usage(_))));
}

#[test]
fn mse_and_l2_values() {
    let mut tape = Tape::new();
    let p = tape.leaf(t(&[1, 3], &[1.0, 2.0, 3.0]), false);
    let loss = tape.mse_loss(p, p).unwrap();
    assert_eq!(tape.value(loss).data(), &[0.0]);
    let p = tape.leaf(t(&[1], &[2.0]), false);
    let q = tape.leaf(t(&[1], &[0.0]), false);
    let loss = tape.mse_loss(p, q).unwrap();
    assert_eq!(tape.value(loss).data(), &[4.0]);

    let w = tape.leaf(t(&[1], &[3.0]), true);
    let pen = tape.l2_penalty(&[w], 0.0).unwrap();
    assert_eq!(tape.value(pen).data(), &[0.0]);
    let pen = tape.l2_penalty(&[w], 1.0).unwrap();
    assert_eq!(tape.value(pen).data(), &[9.0]);
    tape.backward(pen).unwrap();
    assert_eq!(tape.grad(w).unwrap(), &[6.0]);
    assert!(tape.l2_penalty(&[w], -1.0).is_err());
}

#[test]
fn backward_rejects_non_scalar_and_accumulates() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]), true);
    assert!(matches!(tape.backward(x), Err(Error::Usage(_))));
    let s = tape.sum(x).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0; 3]);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[2.0; 3]);
    tape.zero_grads();
    assert!(tape.grad(x).is_none());
}

#[test]
fn param_leaves_report_grads_by_key() {
    let w = Tensor::full(vec![2], 1.5).unwrap().into_trainable();
    let frozen = Tensor::full(vec![2], 1.0).unwrap();
    let mut tape = Tape::new();
    let a = tape.param(&w, 7);
    let b = tape.param(&frozen, 8);
    let s = tape.add(a, b).unwrap();
    let loss = tape.l2_penalty(&[s], 1.0).unwrap();
    tape.backward(loss).unwrap();
    let grads: Vec<(usize, Vec<f64>)> = tape.param_grads().map(|(k, g)| (k, g.to_vec())).collect();
    assert_eq!(grads, vec![(7, vec![5.0, 5.0])]);
}

#[test]
fn grad_check_linear_is_exact_and_relu_kink_is_excluded() {
    let x = t(&[3], &[0.3, -1.2, 2.5]);
    let report = grad_check(
        |tape, v| {
            let w = tape.leaf(t(&[3], &[2.0, -1.0, 0.5]), false);
            let target = tape.leaf(t(&[3], &[0.0; 3]), false);
            let s = tape.add(v[0], w)?;
            let _ = target;
            tape.sum(s)
        },
        &[x],
        H,
    )
    .unwrap();
    assert!(report.max_rel_err() < 1e-9, "{report:?}");

    let at_zero = t(&[3], &[0.0, 1.0, -1.0]);
    let report = grad_check(
        |tape, v| {
            let r = tape.relu(v[0])?;
            tape.sum(r)
        },
        &[at_zero],
        H,
    )
    .unwrap();
    assert_eq!(report.inputs[0].excluded, vec![0]);
    assert!(report.passes(TOL));
}

fn assert_grad(name: &str, report: GradCheckReport) {
    assert!(report.passes(TOL), "{name}: max rel err {}", report.max_rel_err());
}

#[test]
fn every_operator_passes_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let x = random(&mut rng, &[3, 4]);
        let w = random(&mut rng, &[4, 2]);
        let b = random(&mut rng, &[2]);
        assert_grad(
            "dense",
            grad_check(
                |tp, v| {
                    let y = tp.dense(v[0], v[1], v[2])?;
                    weighted_sum(tp, y)
                },
                &[x, w, b],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[1, 1, 5, 5]);
        let k = random(&mut rng, &[2, 1, 3, 3]);
        assert_grad(
            "conv2d",
            grad_check(
                |tp, v| {
                    let y = tp.conv2d(v[0], v[1], 2, 1)?;
                    weighted_sum(tp, y)
                },
                &[x, k],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[4, 3]);
        let g = random(&mut rng, &[3]);
        let be = random(&mut rng, &[3]);
        assert_grad(
            "batch_norm",
            grad_check(
                |tp, v| {
                    let mut stats = RunningStats::new(3);
                    let y = tp.batch_norm(v[0], v[1], v[2], Mode::Train, &mut stats, BatchNormOptions::default())?;
                    weighted_sum(tp, y)
                },
                &[x, g, be],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[2, 2, 3, 3]);
        let g = random(&mut rng, &[2]);
        let be = random(&mut rng, &[2]);
        assert_grad(
            "batch_norm (spatial)",
            grad_check(
                |tp, v| {
                    let mut stats = RunningStats::new(2);
                    let y = tp.batch_norm(v[0], v[1], v[2], Mode::Train, &mut stats, BatchNormOptions::default())?;
                    weighted_sum(tp, y)
                },
                &[x, g, be],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[2, 5]);
        assert_grad(
            "relu",
            grad_check(
                |tp, v| {
                    let y = tp.relu(v[0])?;
                    weighted_sum(tp, y)
                },
                &[x],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[1, 1, 4, 4]);
        assert_grad(
            "max_pool2d",
            grad_check(
                |tp, v| {
                    let y = tp.max_pool2d(v[0], 2, 2, 0)?;
                    weighted_sum(tp, y)
                },
                &[x],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[2, 3, 2, 2]);
        assert_grad(
            "global_avg_pool",
            grad_check(
                |tp, v| {
                    let y = tp.global_avg_pool(v[0])?;
                    weighted_sum(tp, y)
                },
                &[x],
                H,
            )
            .unwrap(),
        );

        let x = random(&mut rng, &[3, 4]);
        assert_grad(
            "dropout",
            grad_check(
                |tp, v| {
                    let mut r = ChaCha8Rng::seed_from_u64(99);
                    let y = tp.dropout(v[0], 0.3, Mode::Train, &mut r)?;
                    weighted_sum(tp, y)
                },
                &[x],
                H,
            )
            .unwrap(),
        );

        let a = random(&mut rng, &[2, 2]);
        let c = random(&mut rng, &[2, 3]);
        assert_grad(
            "concat",
            grad_check(
                |tp, v| {
                    let y = tp.concat(&[v[0], v[1]])?;
                    weighted_sum(tp, y)
                },
                &[a, c],
                H,
            )
            .unwrap(),
        );

        let a = random(&mut rng, &[2, 3]);
        let c = random(&mut rng, &[2, 3]);
        assert_grad(
            "add",
            grad_check(
                |tp, v| {
                    let y = tp.add(v[0], v[1])?;
                    weighted_sum(tp, y)
                },
                &[a, c],
                H,
            )
            .unwrap(),
        );

        let p = random(&mut rng, &[2, 3]);
        let q = random(&mut rng, &[2, 3]);
        assert_grad("mse", grad_check(|tp, v| tp.mse_loss(v[0], v[1]), &[p, q], H).unwrap());

        let w1 = random(&mut rng, &[3, 2]);
        let w2 = random(&mut rng, &[4]);
        assert_grad(
            "l2",
            grad_check(|tp, v| tp.l2_penalty(&[v[0], v[1]], 0.37), &[w1, w2], H).unwrap(),
        );
    }
}

#[test]
fn composite_graph_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[4, 3]);
    let w1 = random(&mut rng, &[3, 5]);
    let b1 = random(&mut rng, &[5]);
    let w2 = random(&mut rng, &[5, 3]);
    let b2 = random(&mut rng, &[3]);
    let target = random(&mut rng, &[4, 3]);
    let report = grad_check(
        |tp, v| {
            let h = tp.dense(v[0], v[1], v[2])?;
            let h = tp.relu(h)?;
            let y = tp.dense(h, v[3], v[4])?;
            tp.mse_loss(y, v[5])
        },
        &[x, w1, b1, w2, b2, target],
        H,
    )
    .unwrap();
    assert_grad("dense-relu-mse", report);
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tape = Tape::new();
        let x = tape.leaf(random(&mut rng, &[2, 1, 6, 6]), false);
        let k = tape.leaf(random(&mut rng, &[3, 1, 3, 3]), true);
        let y = tape.conv2d(x, k, 1, 1).unwrap();
        let y = tape.relu(y).unwrap();
        let p = tape.global_avg_pool(y).unwrap();
        let s = tape.sum(p).unwrap();
        tape.backward(s).unwrap();
        tape.grad(k).unwrap().to_vec()
    };
    let a = run();
    let b = run();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

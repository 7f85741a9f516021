use super::trainer::batches;
use super::*;
use crate::error::Error;
use crate::geometry::{FrameRecord, TargetTriple};
use crate::model::{
    build_unimodal_baseline, inputs_of, EncoderPreset, FusedModel, Modality, ModelConfig, ParamKind, ParameterStore,
};
use crate::synth::{gen_dataset, SynthConfig};
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use std::collections::HashSet;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("id{i}")).collect()
}

#[test]
fn paper_scale_split() {
    let s = split_ids(&ids(1020), 3).unwrap();
    assert_eq!((s.holdout.len(), s.train.len(), s.test.len()), (20, 800, 200));
    let all: HashSet<&String> = s.train.iter().chain(&s.test).chain(&s.holdout).collect();
    assert_eq!(all.len(), 1020);
    assert_eq!(s, split_ids(&ids(1020), 3).unwrap());
    assert_ne!(s, split_ids(&ids(1020), 4).unwrap());
}

#[test]
fn small_split_caps_holdout() {
    let s = split_ids(&ids(30), 1).unwrap();
    assert_eq!((s.holdout.len(), s.train.len(), s.test.len()), (6, 19, 5));
    assert!(matches!(split_ids(&ids(24), 1), Err(Error::Data(_))));
    let mut dup = ids(30);
    dup[4] = dup[5].clone();
    assert!(matches!(split_ids(&dup, 1), Err(Error::Data(_))));
}

proptest! {
    #[test]
    fn split_sizes_hold(n in 25usize..3000, seed in any::<u64>()) {
        let s = split_ids(&ids(n), seed).unwrap();
        let expected_holdout = if n >= 100 { 20 } else { (n * 2).div_ceil(10).min(20) };
        prop_assert_eq!(s.holdout.len(), expected_holdout);
        let rest = (n - expected_holdout) as f64;
        prop_assert!((s.train.len() as f64 - 0.8 * rest).abs() <= 1.0);
        prop_assert_eq!(s.train.len() + s.test.len() + s.holdout.len(), n);
        let all: HashSet<&String> = s.train.iter().chain(&s.test).chain(&s.holdout).collect();
        prop_assert_eq!(all.len(), n);
    }
}

fn triples(rows: &[[f64; 3]]) -> Vec<TargetTriple> {
    rows.iter().map(|r| TargetTriple::from_array(*r)).collect()
}

#[test]
fn normalizer_round_trip_and_moments() {
    let train = triples(&[
        [200.0, 9.0, 10.0],
        [150.0, 11.0, 12.5],
        [175.0, 10.0, 3.0],
        [120.0, 8.5, 7.25],
    ]);
    let n = Normalizer::fit(&train).unwrap();
    for t in &train {
        let back = n.invert(n.apply(*t)).to_array();
        for (a, b) in back.iter().zip(t.to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }
    for k in 0..3 {
        let z: Vec<f64> = train.iter().map(|t| n.apply(*t)[k]).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        assert!(mean.abs() <= 1e-9);
        assert!((std - 1.0).abs() <= 1e-9);
    }
    let flat = triples(&[[1.0, 2.0, 3.0], [1.0, 5.0, 3.5]]);
    assert!(matches!(Normalizer::fit(&flat), Err(Error::Data(_))));
    assert!(matches!(Normalizer::fit(&flat[..1]), Err(Error::Data(_))));
}

#[test]
fn scheduler_fires_on_plateau() {
    let s = PlateauScheduler::new(1.0, 3, 0.5, 1e-3, 1e-4);
    assert_eq!(s.replay(&[1.0, 0.9, 0.9, 0.9, 0.9]), vec![1.0, 1.0, 1.0, 1.0, 0.5]);
    let s = PlateauScheduler::new(1.0, 3, 0.5, 1e-3, 1e-4);
    let falling: Vec<f64> = (0..50).map(|i| 10.0 - i as f64 * 0.1).collect();
    assert!(s.replay(&falling).iter().all(|&lr| lr == 1.0));
    let s = PlateauScheduler::new(1e-7, 1, 0.5, 1e-7, 1e-4);
    assert!(s.replay(&[1.0; 10]).iter().all(|&lr| lr == 1e-7));
}

#[test]
fn scheduler_counter_resets_after_firing() {
    let s = PlateauScheduler::new(1.0, 2, 0.5, 0.0, 0.0);
    // Fires after the 3rd and 5th epochs, never in between.
    assert_eq!(s.replay(&[1.0, 1.0, 1.0, 1.0, 1.0]), vec![1.0, 1.0, 0.5, 0.5, 0.25]);
}

proptest! {
    #[test]
    fn lr_never_rises_nor_sinks_below_floor(
        losses in prop::collection::vec(0.0..10.0f64, 1..200),
        patience in 1usize..8,
        factor in 0.05..0.95f64,
    ) {
        let min_lr = 1e-4;
        let lrs = PlateauScheduler::new(1e-2, patience, factor, min_lr, 1e-4).replay(&losses);
        prop_assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(lrs.iter().all(|&lr| lr >= min_lr));
    }
}

#[test]
fn adam_first_step_is_lr_times_sign() {
    let mut store = ParameterStore::new();
    let id = store
        .add(
            "w",
            vec![3],
            ParamKind::Weight {
                fan_in: 1,
                decay: false,
            },
        )
        .unwrap();
    store.get_mut(id).data_mut().copy_from_slice(&[1.0, -2.0, 0.5]);
    let mut adam = Adam::new(&store);
    let g = [4.0, -0.01, 0.0];
    adam.step(&mut store, 0.1, [(0usize, &g[..])]);
    let w = store.get(id).data();
    assert_abs_diff_eq!(w[0], 0.9, epsilon = 1e-8);
    assert_abs_diff_eq!(w[1], -1.9, epsilon = 1e-5);
    assert_eq!(w[2], 0.5);
}

#[test]
fn table_two_error_averages() {
    let stress = percentage_error(&[207.5, 152.49], &[156.88, 133.19]).unwrap();
    let mass = percentage_error(&[9.68, 10.53], &[13.24, 13.60]).unwrap();
    let deflection = percentage_error(&[10.03, 11.74], &[7.78, 7.78]).unwrap();
    assert!((stress - 18.52).abs() <= 0.1, "{stress}");
    assert!((mass - 32.94).abs() <= 0.1, "{mass}");
    assert!((deflection - 28.33).abs() <= 0.5, "{deflection}");
    assert_eq!(percentage_error(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
    assert!(matches!(
        percentage_error(&[0.0, 1.0], &[1.0, 1.0]),
        Err(Error::Data(_))
    ));
}

#[test]
fn metrics_report_names_zero_actuals() {
    let actual = triples(&[[1.0, 2.0, 3.0], [1.0, 0.0, 3.0]]);
    match MetricsReport::from_predictions(&["a", "b"], &actual, &actual) {
        Err(Error::Data(msg)) => assert!(msg.contains("record b") && msg.contains("mass"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let good = triples(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]);
    let pred = triples(&[[1.5, 2.0, 3.0], [2.0, 4.0, 3.0]]);
    let r = MetricsReport::from_predictions(&["a", "b"], &good, &pred).unwrap();
    assert_eq!(r.error_pct, [25.0, 0.0, 25.0]);
    assert_eq!(r.residuals.len(), 6);
    assert!(r.to_csv().starts_with("target,error_pct,n\nstress,25,2\n"));
    assert!(r.residuals_csv().lines().nth(1).unwrap().starts_with("a,stress,1,1.5"));
}

#[test]
fn batches_absorb_trailing_singletons() {
    let order: Vec<usize> = (0..33).collect();
    let sizes: Vec<usize> = batches(&order, 16).iter().map(|b| b.len()).collect();
    assert_eq!(sizes, vec![16, 17]);
    let order: Vec<usize> = (0..34).collect();
    let sizes: Vec<usize> = batches(&order, 16).iter().map(|b| b.len()).collect();
    assert_eq!(sizes, vec![16, 16, 2]);
}

fn small_cfg() -> ModelConfig {
    ModelConfig {
        encoder: EncoderPreset::Mini,
        section_len: 16,
        depth_len: 8,
        seed: 5,
        ..ModelConfig::default()
    }
}

fn small_data(n: usize, seed: u64) -> Vec<FrameRecord> {
    let cfg = SynthConfig {
        section_len: 16,
        depth_len: 8,
        ..SynthConfig::default()
    };
    gen_dataset(n, seed, &cfg).unwrap()
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        initial_lr: 1e-3,
        epochs: 2,
        batch_size: 4,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_keeps_best_epoch() {
    let recs = small_data(8, 1);
    let (train_set, test_set): (Vec<&FrameRecord>, Vec<&FrameRecord>) =
        (recs[..6].iter().collect(), recs[6..].iter().collect());
    let norm = Normalizer::fit(&train_set.iter().map(|r| r.targets.unwrap()).collect::<Vec<_>>()).unwrap();
    let run = || {
        let mut model = FusedModel::multimodal(&small_cfg()).unwrap();
        model.fit_scaler(&inputs_of(&recs[..6])).unwrap();
        train(model, &norm, &train_set, &test_set, &quick_train()).unwrap()
    };
    let (m1, t1) = run();
    let (m2, t2) = run();
    assert_eq!(t1, t2);
    assert_eq!(t1.len(), 2);
    assert_eq!(t1.epochs[0].lr, 1e-3);
    assert!(t1.epochs.windows(2).all(|w| w[1].lr <= w[0].lr));
    assert_eq!(encode_checkpoint(&m1, &norm, 0), encode_checkpoint(&m2, &norm, 0));
    let best = t1.epochs.iter().map(|e| e.test_loss).fold(f64::INFINITY, f64::min);
    let inputs: Vec<_> = test_set.iter().map(|r| crate::model::ModelInput::from(*r)).collect();
    let loss = eval_mse(&m1, &inputs, &normalized_targets(&test_set, &norm).unwrap()).unwrap();
    assert_eq!(loss, best);
    assert!(t1.to_csv().starts_with("epoch,train_loss,test_loss,lr\n1,"));
}

#[test]
fn runaway_learning_rate_is_a_numeric_failure() {
    let recs = small_data(8, 2);
    let refs: Vec<&FrameRecord> = recs.iter().collect();
    let norm = Normalizer::fit(&recs.iter().map(|r| r.targets.unwrap()).collect::<Vec<_>>()).unwrap();
    let cfg = TrainConfig {
        initial_lr: 1e300,
        min_lr: 0.0,
        ..quick_train()
    };
    let model = FusedModel::multimodal(&small_cfg()).unwrap();
    match train(model, &norm, &refs, &refs, &cfg) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("epoch"), "{msg}"),
        other => panic!("expected numeric failure, got {:?}", other.map(|(_, t)| t)),
    }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let recs = small_data(4, 3);
    let inputs = inputs_of(&recs);
    let mut model = FusedModel::multimodal(&small_cfg()).unwrap();
    model.fit_scaler(&inputs).unwrap();
    // Move running statistics away from their defaults.
    let mut tape = crate::autodiff::Tape::new();
    model
        .forward_train(&mut tape, &inputs, &mut rand::rngs::mock::StepRng::new(1, 7))
        .unwrap();
    let norm = Normalizer {
        mean: [1.0, 2.0, 3.0],
        std: [0.5, 0.25, 4.0],
    };
    let bytes = encode_checkpoint(&model, &norm, 77);
    assert_eq!(&bytes[..4], MAGIC);
    let ck = decode_checkpoint(&bytes, Some(Modality::Multimodal)).unwrap();
    assert_eq!(ck.normalizer, norm);
    assert_eq!(ck.split_seed, 77);
    assert_eq!(ck.model.scaler, model.scaler);
    assert_eq!(
        ck.model.predict(&inputs).unwrap().data(),
        model.predict(&inputs).unwrap().data()
    );
    assert_eq!(encode_checkpoint(&ck.model, &ck.normalizer, 77), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &model, &norm, 77).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert!(load_checkpoint(&path, None).is_ok());
}

#[test]
fn checkpoint_rejects_damage_and_wrong_modality() {
    let model = build_unimodal_baseline(&small_cfg()).unwrap();
    let norm = Normalizer {
        mean: [0.0; 3],
        std: [1.0; 3],
    };
    let bytes = encode_checkpoint(&model, &norm, 1);
    match decode_checkpoint(&bytes[..bytes.len() - 5], None) {
        Err(Error::Data(msg)) => assert!(msg.contains("offset"), "{msg}"),
        other => panic!("{:?}", other.map(|_| ())),
    }
    match decode_checkpoint(&bytes, Some(Modality::Multimodal)) {
        Err(Error::Data(msg)) => assert!(msg.contains("modality mismatch"), "{msg}"),
        other => panic!("{:?}", other.map(|_| ())),
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_checkpoint(&bad, None), Err(Error::Data(_))));
    let mut newer = bytes.clone();
    newer[4] = 9;
    assert!(matches!(decode_checkpoint(&newer, None), Err(Error::Data(_))));
    assert_eq!(
        decode_checkpoint(&bytes, Some(Modality::ImageOnly))
            .unwrap()
            .model
            .modality(),
        Modality::ImageOnly
    );
}

#[test]
fn comparison_report_schema_and_repeatability() {
    let recs = small_data(25, 4);
    let cfg = TrainConfig {
        epochs: 1,
        ..quick_train()
    };
    let a = compare_modalities(&recs, &small_cfg(), &cfg).unwrap();
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.rows.iter().map(|r| r.error_pct.len()).sum::<usize>(), 12);
    for split in SPLITS {
        let (u, m) = (
            a.errors(split, Modality::ImageOnly).unwrap(),
            a.errors(split, Modality::Multimodal).unwrap(),
        );
        let d = a.delta(split).unwrap();
        for k in 0..3 {
            assert_eq!(d[k], m[k] - u[k]);
            assert!(u[k] >= 0.0 && m[k] >= 0.0);
        }
    }
    let b = compare_modalities(&recs, &small_cfg(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_csv().lines().count(), 7);
}

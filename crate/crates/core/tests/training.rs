mod checks;
mod common;

use fairgap::adaptive::{adaptive_train, static_gsmote_train, AdaptiveConfig, GroupMode, Provenance};
use fairgap::augment::{AugmentConfig, IdentityCodec};
use fairgap::data::Dataset;
use fairgap::models::{loss_and_gradient, Objective, PredictionModel, RegularizerScope, TrainConfig};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gradients_match_finite_differences() {
    let e = checks::worst_gradient_error(10, 31);
    assert!(e < 1e-4, "relative error {e}");
}

#[test]
fn loss_is_affine_in_reg_weight() {
    let mut r = common::rng(32);
    let model = checks::random_model(1, 3, &mut r);
    let batch = checks::random_batch(20, 3, &mut r);
    let loss = |w: f64| {
        loss_and_gradient(&model, &batch, w, (0, 1), RegularizerScope::Batch)
            .unwrap()
            .loss
    };
    let (l0, l1, l2) = (loss(0.5), loss(1.5), loss(3.5));
    // l1 sits one third of the way from l0 to l2
    assert!((l1 - (l0 + (l2 - l0) / 3.0)).abs() < 1e-10);
}

proptest! {
    #[test]
    fn scores_stay_strictly_inside_the_unit_interval(
        x in prop::collection::vec(-1e6f64..1e6, 3),
        seed in any::<u64>(),
        kind in 0usize..2,
    ) {
        let mut r = common::rng(seed);
        let mut model = checks::random_model(kind, 3, &mut r);
        for p in model.parameters_mut() {
            *p *= 50.0;
        }
        let s = model.predict_score(&x).unwrap();
        prop_assert!(s > 0.0 && s < 1.0, "score {}", s);
    }
}

#[test]
fn wide_mlp_fits_random_labels() {
    let mut r = common::rng(33);
    let n = 100;
    let dim = 5;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    let ds = Dataset::from_rows(&rows, labels, vec![0; n], vec!["all".into()]).unwrap();
    let cfg = TrainConfig {
        steps: 3000,
        batch_size: 100,
        learning_rate: 0.5,
        momentum: 0.9,
        eval_every: 3000,
        ..Default::default()
    };
    let model = fairgap::models::sgd_fit(PredictionModel::mlp(dim, 128, 1), &ds, &cfg).unwrap();
    let report = fairgap::models::evaluate(&model, &ds).unwrap();
    assert!(
        1.0 - report.overall_accuracy <= 0.01,
        "training error {}",
        1.0 - report.overall_accuracy
    );
}

#[test]
fn mix_prob_one_reproduces_plain_training() {
    assert!(checks::augmented_matches_plain(&AdaptiveConfig {
        mix_prob: 1.0,
        ..Default::default()
    }));
}

#[test]
fn zero_augment_batch_reproduces_plain_training() {
    let ad = AdaptiveConfig {
        mix_prob: 0.3,
        augment_batch: Some(0),
        ..Default::default()
    };
    assert!(checks::augmented_matches_plain(&ad));
}

#[test]
fn zero_reg_weight_reproduces_unregularized_loss() {
    assert!(checks::zero_reg_weight_matches_plain());
}

#[test]
fn mixing_fraction_matches_mix_prob() {
    let (tr, ev) = checks::reduction_splits();
    let steps = 10_000;
    let cfg = TrainConfig {
        steps,
        batch_size: 1,
        learning_rate: 0.01,
        eval_every: steps,
        seed: 8,
        ..Default::default()
    };
    let ad = AdaptiveConfig {
        mix_prob: 0.7,
        ..Default::default()
    };
    let out = adaptive_train(
        PredictionModel::logistic(2),
        &tr,
        &ev,
        &IdentityCodec,
        &AugmentConfig::default(),
        &ad,
        &cfg,
        Objective::MinGroupAccuracy,
    )
    .unwrap();
    assert_eq!(out.batches_from_train + out.batches_from_pool, steps);
    let frac = out.batches_from_train as f64 / steps as f64;
    let sigma = (0.7f64 * 0.3 / steps as f64).sqrt();
    assert!((frac - 0.7).abs() <= 3.0 * sigma, "fraction {frac}");
}

#[test]
fn synthetic_rows_target_the_weakest_group_and_pool_only_grows() {
    let (tr, ev) = checks::reduction_splits();
    for mode in [GroupMode::ProtectedOnly, GroupMode::ProtectedXLabel] {
        let ad = AdaptiveConfig {
            mix_prob: 0.5,
            augment_batch: Some(7),
            group_mode: mode,
        };
        let aug = AugmentConfig {
            m: 5,
            k: 2,
            ..Default::default()
        };
        let out = adaptive_train(
            PredictionModel::mlp(2, 8, 1),
            &tr,
            &ev,
            &IdentityCodec,
            &aug,
            &ad,
            &checks::reduction_train_config(),
            Objective::MinGroupAccuracy,
        )
        .unwrap();
        // original rows are an unchanged prefix
        assert_eq!(out.pool.original_len(), tr.len());
        for i in 0..tr.len() {
            assert_eq!(out.pool.data().row(i), tr.row(i));
            assert_eq!(out.pool.data().label(i), tr.label(i));
        }
        let added = out.pool.added();
        assert_eq!(added.len(), 7 * out.targets.len());
        let mut last_step = 0;
        for e in added {
            assert!(e.step >= last_step, "creation steps are non-decreasing");
            last_step = e.step;
            let rec = out.targets.iter().find(|t| t.step == e.step).unwrap();
            let w = rec.weakest.unwrap().target;
            assert_eq!(e.group, w.group);
            if let Some(y) = w.label {
                assert_eq!(e.label, y);
            }
            assert_ne!(e.provenance, Provenance::Original);
        }
        // provenance log agrees with the pool
        let mut buf = Vec::new();
        out.pool.write_log(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + out.pool.len());
    }
}

#[test]
fn static_gsmote_spreads_rows_uniformly_over_groups() {
    let (tr, ev) = checks::reduction_splits();
    let cfg = TrainConfig {
        steps: 2000,
        eval_every: 10,
        ..checks::reduction_train_config()
    };
    let ad = AdaptiveConfig {
        mix_prob: 0.5,
        augment_batch: Some(50),
        ..Default::default()
    };
    let aug = AugmentConfig {
        m: 5,
        k: 2,
        ..Default::default()
    };
    let out = static_gsmote_train(
        PredictionModel::logistic(2),
        &tr,
        &ev,
        &IdentityCodec,
        &aug,
        &ad,
        &cfg,
        Objective::MinGroupAccuracy,
    )
    .unwrap();
    let added = out.pool.added();
    let n = added.len() as f64;
    assert!(n >= 9000.0);
    let in_a = added.iter().filter(|e| e.group == 0).count() as f64;
    assert!((in_a - n / 2.0).abs() <= 3.0 * (n * 0.25).sqrt(), "{in_a} of {n}");
}

#[test]
fn tiny_cells_fall_back_to_duplication() {
    // group b has 3 rows per label, fewer than m = 5 neighbours
    let tr = common::two_group_blobs(60, 6, 3);
    let ev = common::two_group_blobs(40, 40, 4);
    let ad = AdaptiveConfig {
        mix_prob: 0.5,
        augment_batch: Some(10),
        ..Default::default()
    };
    let aug = AugmentConfig {
        m: 5,
        k: 2,
        ..Default::default()
    };
    let out = static_gsmote_train(
        PredictionModel::logistic(2),
        &tr,
        &ev,
        &IdentityCodec,
        &aug,
        &ad,
        &checks::reduction_train_config(),
        Objective::MinGroupAccuracy,
    )
    .unwrap();
    let dups: Vec<_> = out
        .pool
        .added()
        .iter()
        .filter(|e| e.provenance == Provenance::Duplicate)
        .collect();
    assert_eq!(dups.len(), out.fallbacks);
    assert!(out.fallbacks > 0);
    assert!(dups.iter().all(|e| e.group == 1));
}

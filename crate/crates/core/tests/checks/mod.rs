//! Checks shared by the module tests and the acceptance run. Each one drives
//! the library and compares it with an oracle from `common`.

#![allow(dead_code)]

use fairgap::adaptive::{adaptive_train, static_gsmote_train, AdaptiveConfig};
use fairgap::augment::{sample_simplex_with, AugmentConfig, IdentityCodec};
use fairgap::data::{Dataset, TrueConditional};
use fairgap::decomposition::{decompose_points, replicate_scores, Learner, LossKind, PointDecomposition, Truth};
use fairgap::models::{
    loss_and_gradient, train, Architecture, Objective, PredictionModel, RegularizerScope, RegularizerStatus, Scorer,
    TrainConfig,
};
use fairgap::rng;
use fairgap::Result;
use rand::Rng;

use crate::common;

// -------------------------------------------------------------- gradients

pub fn random_model(kind: usize, dim: usize, r: &mut impl Rng) -> PredictionModel {
    let arch = if kind == 0 {
        Architecture::Logistic { input_dim: dim }
    } else {
        Architecture::Mlp {
            input_dim: dim,
            hidden: 6,
        }
    };
    let params = (0..arch.param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
    PredictionModel::with_parameters(arch, params).unwrap()
}

/// Batch with at least one positive in each of two groups.
pub fn random_batch(n: usize, dim: usize, r: &mut impl Rng) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    let groups: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels[0] = 1;
    labels[1] = 1;
    Dataset::from_rows(&rows, labels, groups, vec!["a".into(), "b".into()]).unwrap()
}

/// Norm-relative error of the analytic gradient against central differences.
pub fn gradient_error(model: &PredictionModel, batch: &Dataset, reg_weight: f64) -> f64 {
    let h = 1e-5;
    let loss_at =
        |m: &PredictionModel| loss_and_gradient(m, batch, reg_weight, (0, 1), RegularizerScope::Batch).unwrap();
    let analytic = loss_at(model).gradient;
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let mut plus = model.clone();
        plus.parameters_mut()[i] += h;
        let mut minus = model.clone();
        minus.parameters_mut()[i] -= h;
        numeric.push((loss_at(&plus).loss - loss_at(&minus).loss) / (2.0 * h));
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Worst relative gradient error over `pairs` random (model, batch) pairs
/// per model kind, plain and regularized.
pub fn worst_gradient_error(pairs: usize, seed: u64) -> f64 {
    let mut r = common::rng(seed);
    let mut worst = 0.0f64;
    for kind in 0..2 {
        for _ in 0..pairs {
            let dim = r.random_range(1..=5);
            let model = random_model(kind, dim, &mut r);
            let batch = random_batch(r.random_range(4..=24), dim, &mut r);
            for reg in [0.0, 0.8] {
                worst = worst.max(gradient_error(&model, &batch, reg));
            }
        }
    }
    worst
}

// ---------------------------------------------------------- decomposition

/// One test row per domain point and observed label, all in one group.
pub fn domain_test_set() -> Dataset {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..common::DOMAIN_P.len() {
        for label in [0u8, 1] {
            x.push(i as f64);
            y.push(label);
        }
    }
    let n = y.len();
    Dataset::from_flat(x, 1, y, vec![0; n], vec!["all".into()]).unwrap()
}

pub fn domain_truth() -> Truth {
    Truth::new(
        Some(TrueConditional::from_fn(|x, _| common::DOMAIN_P[x[0] as usize])),
        false,
    )
    .unwrap()
}

fn to_dataset(set: &[(f64, u8)]) -> Dataset {
    let n = set.len();
    Dataset::from_flat(
        set.iter().map(|a| a.0).collect(),
        1,
        set.iter().map(|a| a.1).collect(),
        vec![0; n],
        vec!["all".into()],
    )
    .unwrap()
}

fn nn_learner(data: &Dataset, _seed: u64) -> Result<Box<dyn Scorer>> {
    let train: Vec<(f64, u8)> = (0..data.len()).map(|i| (data.row(i)[0], data.label(i))).collect();
    Ok(Box::new(move |x: &[f64]| f64::from(common::one_nn(&train, x[0]))))
}

/// Library decomposition over every training set of size `n`, one replicate each.
pub fn library_points(n: usize, loss: LossKind) -> Vec<PointDecomposition> {
    let sets: Vec<(Dataset, u64)> = common::all_training_sets(n)
        .iter()
        .map(|s| (to_dataset(s), 0))
        .collect();
    let test = domain_test_set();
    let learner: &dyn Learner = &nn_learner;
    let reps = replicate_scores(&test, learner, &sets).unwrap();
    decompose_points(&test, &domain_truth(), &reps, loss).unwrap()
}

/// Largest deviation of any term, or of `c1 N + B + c2 V`, from the
/// enumeration oracle over training-set sizes 1 to 4.
pub fn enumeration_max_error(loss: LossKind) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let points = library_points(n, loss);
        let expected_rows = if loss == LossKind::FalseNegativeRate { 5 } else { 10 };
        assert_eq!(points.len(), expected_rows);
        for d in &points {
            let x = d.row / 2;
            let p = common::DOMAIN_P[x];
            let preds: Vec<u8> = common::all_training_sets(n)
                .iter()
                .map(|s| common::one_nn(s, x as f64))
                .collect();
            let o = match loss {
                LossKind::Squared => {
                    common::oracle_squared(p, &preds.iter().map(|&f| f64::from(f)).collect::<Vec<_>>())
                }
                _ => common::oracle_zero_one(p, &preds),
            };
            for diff in [
                d.reconstructed() - o.err,
                d.err - o.err,
                d.noise - o.noise,
                d.bias - o.bias,
                d.variance - o.variance,
            ] {
                worst = worst.max(diff.abs());
            }
        }
    }
    worst
}

// ---------------------------------------------------------------- simplex

pub fn triangle() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![2.0, 0.5], vec![0.5, 1.5]]
}

/// Smallest barycentric coordinate over `n` triangle samples.
pub fn min_triangle_coordinate(n: usize, seed: u64) -> f64 {
    let v = triangle();
    let mut r = rng::stream(seed, "test", 0);
    let mut lowest = f64::INFINITY;
    for _ in 0..n {
        let p = sample_simplex_with(&v, &mut r).unwrap();
        let (b, dist) = common::barycentric(&v, &p);
        assert!(dist < 1e-9);
        lowest = b.iter().copied().fold(lowest, f64::min);
    }
    lowest
}

/// Maps uniform barycentric coordinates `(a, b, c)` to two independent
/// uniforms: `1 - (1 - c)^2` and `a / (a + b)`.
fn to_unit_square(b: &[f64]) -> (f64, f64) {
    let c = b[2].clamp(0.0, 1.0);
    let u1 = 1.0 - (1.0 - c).powi(2);
    let u2 = if b[0] + b[1] > 0.0 { b[0] / (b[0] + b[1]) } else { 0.5 };
    (u1, u2.clamp(0.0, 1.0))
}

/// Chi-square p-value of 10^5 triangle samples over a 10x10 grid.
pub fn grid_p_value(seed: u64) -> f64 {
    let v = triangle();
    let mut r = rng::stream(seed, "test", 0);
    let mut counts = vec![0usize; 100];
    for _ in 0..100_000 {
        let p = sample_simplex_with(&v, &mut r).unwrap();
        let (u1, u2) = to_unit_square(&common::barycentric(&v, &p).0);
        let i = ((u1 * 10.0) as usize).min(9);
        let j = ((u2 * 10.0) as usize).min(9);
        counts[i * 10 + j] += 1;
    }
    common::chi_square_uniform(&counts)
}

/// Segment coefficients `t` of `n` samples from a 1-simplex `(1 - t) a + t b`.
pub fn segment_coefficients(n: usize, seed: u64) -> Vec<f64> {
    let a = [1.0, -2.0, 0.5];
    let b = [3.0, 1.0, -1.5];
    let mut r = rng::stream(seed, "test", 0);
    (0..n)
        .map(|_| {
            let p = sample_simplex_with(&[&a[..], &b[..]], &mut r).unwrap();
            (p[0] - a[0]) / (b[0] - a[0])
        })
        .collect()
}

// ------------------------------------------------------------- reductions

pub fn reduction_splits() -> (Dataset, Dataset) {
    (common::two_group_blobs(120, 30, 1), common::two_group_blobs(60, 60, 2))
}

pub fn reduction_train_config() -> TrainConfig {
    TrainConfig {
        steps: 300,
        batch_size: 16,
        learning_rate: 0.05,
        eval_every: 25,
        seed: 4,
        ..Default::default()
    }
}

pub fn bits(m: &PredictionModel) -> Vec<u64> {
    m.parameters().iter().map(|p| p.to_bits()).collect()
}

/// Whether adaptive and static g-SMOTE training with `ad` end on exactly
/// the parameters of plain training.
pub fn augmented_matches_plain(ad: &AdaptiveConfig) -> bool {
    let (tr, ev) = reduction_splits();
    let cfg = reduction_train_config();
    let model = PredictionModel::mlp(2, 8, 3);
    let plain = train(model.clone(), &tr, &ev, &cfg, Objective::MinGroupAccuracy).unwrap();
    [adaptive_train, static_gsmote_train].into_iter().all(|f| {
        let out = f(
            model.clone(),
            &tr,
            &ev,
            &IdentityCodec,
            &AugmentConfig::default(),
            ad,
            &cfg,
            Objective::MinGroupAccuracy,
        )
        .unwrap();
        bits(&out.training.model) == bits(&plain.model)
    })
}

/// Whether `reg_weight = 0` leaves the regularizer unevaluated, so the loss
/// and gradient are bitwise those of plain cross-entropy under any scope, and
/// the loss matches an independent cross-entropy sum.
pub fn zero_reg_weight_matches_plain() -> bool {
    let model = PredictionModel::mlp(2, 8, 3);
    let mut r = common::rng(5);
    let batch = random_batch(30, 2, &mut r);
    // a context without positives would make an evaluated regularizer fail
    let n = 10;
    let no_positives = Dataset::from_rows(
        &vec![vec![0.0, 0.0]; n],
        vec![0; n],
        (0..n).map(|i| i % 2).collect(),
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let zero = loss_and_gradient(&model, &batch, 0.0, (0, 1), RegularizerScope::Batch).unwrap();
    let context = loss_and_gradient(&model, &batch, 0.0, (0, 1), RegularizerScope::Context(&no_positives)).unwrap();
    let mut direct = 0.0;
    for i in 0..batch.len() {
        let p = model.predict_score(batch.row(i)).unwrap();
        direct += if batch.label(i) == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    direct /= batch.len() as f64;
    zero.regularizer == RegularizerStatus::Disabled
        && zero.loss.to_bits() == context.loss.to_bits()
        && zero
            .gradient
            .iter()
            .map(|g| g.to_bits())
            .eq(context.gradient.iter().map(|g| g.to_bits()))
        && (zero.loss - direct).abs() < 1e-12
}

//! Adaptive g-SMOTE training: synthetic rows go to whichever group is
//! currently weakest on the eval split.

use fairgap::adaptive::{adaptive_train, AdaptiveConfig, GroupMode};
use fairgap::augment::{AugmentConfig, IdentityCodec};
use fairgap::data::{generate_synthetic, SyntheticSpec};
use fairgap::models::{evaluate, train, Objective, PredictionModel, TrainConfig};

fn main() -> fairgap::Result<()> {
    let spec = |n: Vec<usize>, seed| SyntheticSpec {
        n_per_group: n,
        dims: 2,
        cluster_means: vec![[vec![-2.0, 0.0], vec![2.0, 0.0]], [vec![1.5, 3.0], vec![-1.5, 3.0]]],
        cluster_stddev: vec![[1.0, 1.0], [1.0, 1.0]],
        label_noise_rate: vec![0.0, 0.0],
        seed,
        group_names: Some(vec!["majority".into(), "minority".into()]),
    };
    let train_set = generate_synthetic(&spec(vec![1000, 50], 1))?.dataset;
    let eval_set = generate_synthetic(&spec(vec![300, 300], 2))?.dataset;
    let test_set = generate_synthetic(&spec(vec![300, 300], 3))?.dataset;

    let cfg = TrainConfig {
        steps: 1500,
        eval_every: 50,
        learning_rate: 0.05,
        ..Default::default()
    };
    let model = PredictionModel::mlp(2, 16, 0);
    let plain = train(model.clone(), &train_set, &eval_set, &cfg, Objective::MinGroupAccuracy)?;

    let aug = AugmentConfig {
        m: 10,
        k: 3,
        ..Default::default()
    };
    let ad = AdaptiveConfig {
        mix_prob: 0.5,
        augment_batch: None,
        group_mode: GroupMode::ProtectedOnly,
    };
    let out = adaptive_train(
        model,
        &train_set,
        &eval_set,
        &IdentityCodec,
        &aug,
        &ad,
        &cfg,
        Objective::MinGroupAccuracy,
    )?;

    let to_minority = out.pool.added().iter().filter(|e| e.group == 1).count();
    println!(
        "pool grew from {} to {} rows ({} for the minority); batches: {} original, {} pool",
        out.pool.original_len(),
        out.pool.len(),
        to_minority,
        out.batches_from_train,
        out.batches_from_pool
    );
    for t in out.targets.iter().take(5) {
        println!("step {:>4}: target {:?}", t.step, t.weakest.map(|w| w.target));
    }
    let base = evaluate(&plain.best_model(), &test_set)?;
    let adapt = evaluate(&out.training.best_model(), &test_set)?;
    println!(
        "test min-group accuracy: baseline {:.3}, adaptive {:.3}",
        base.min_group_accuracy.unwrap_or(f64::NAN),
        adapt.min_group_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

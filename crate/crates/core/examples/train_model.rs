//! Trains a small MLP with SGD, keeping the checkpoint with the best
//! min-group accuracy on the eval split.

use fairgap::data::{generate_synthetic, stratified_split, SplitSpec, SyntheticSpec};
use fairgap::models::{evaluate, train, Objective, PredictionModel, TrainConfig};

fn main() -> fairgap::Result<()> {
    let spec = SyntheticSpec {
        n_per_group: vec![600, 120],
        dims: 2,
        cluster_means: vec![[vec![-1.5, 0.0], vec![1.5, 0.0]], [vec![1.0, 2.5], vec![-1.0, 2.5]]],
        cluster_stddev: vec![[1.0, 1.0], [1.0, 1.0]],
        label_noise_rate: vec![0.0, 0.0],
        seed: 2,
        group_names: Some(vec!["a".into(), "b".into()]),
    };
    let ds = generate_synthetic(&spec)?.dataset;
    let (train_set, eval_set, test_set) = stratified_split(&ds, &SplitSpec::default())?;

    let cfg = TrainConfig {
        steps: 1500,
        batch_size: 32,
        learning_rate: 0.05,
        eval_every: 250,
        ..Default::default()
    };
    let out = train(
        PredictionModel::mlp(2, 16, 0),
        &train_set,
        &eval_set,
        &cfg,
        Objective::MinGroupAccuracy,
    )?;
    for c in &out.checkpoints {
        println!(
            "step {:>5}  train loss {:>8}  eval min-group accuracy {:.3}",
            c.step,
            c.mean_train_loss.map_or("-".into(), |l| format!("{l:.4}")),
            c.objective
        );
    }
    let best = out.best_checkpoint().expect("at least one checkpoint");
    println!("best step {}", best.step);

    let report = evaluate(&out.best_model(), &test_set)?;
    println!(
        "test accuracy {:.3}, min-group {:?}",
        report.overall_accuracy, report.min_group_accuracy
    );

    let path = std::env::temp_dir().join("fairgap_example_model.json");
    out.best_model().save_json(&path)?;
    println!("saved {}", path.display());
    Ok(())
}

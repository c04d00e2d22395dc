//! Sweeps the equal-opportunity regularizer weight. The DEO gap shrinks, but
//! so can every group's accuracy: the audit calls that leveling down.

use fairgap::data::{generate_synthetic, stratified_split, SplitSpec, SyntheticSpec};
use fairgap::metrics::classify_intervention;
use fairgap::models::{evaluate, train, Objective, PredictionModel, TrainConfig};

fn main() -> fairgap::Result<()> {
    let spec = SyntheticSpec {
        n_per_group: vec![600, 600],
        dims: 2,
        cluster_means: vec![[vec![-2.0, 1.0], vec![2.0, 1.0]], [vec![-0.6, -1.0], vec![0.6, -1.0]]],
        cluster_stddev: vec![[1.0, 1.0], [1.0, 1.0]],
        label_noise_rate: vec![0.0, 0.0],
        seed: 7,
        group_names: Some(vec!["a".into(), "b".into()]),
    };
    let ds = generate_synthetic(&spec)?.dataset;
    let split = SplitSpec {
        train_fraction: 0.5,
        eval_fraction: 0.25,
        test_fraction: 0.25,
        seed: 7,
    };
    let (train_set, eval_set, test_set) = stratified_split(&ds, &split)?;

    let mut reports = Vec::new();
    println!("{:>6} {:>8} {:>8} {:>8}", "weight", "DEO", "acc a", "acc b");
    for w in [0.0, 1.0, 5.0, 10.0] {
        let cfg = TrainConfig {
            steps: 1500,
            eval_every: 50,
            reg_weight: w,
            ..Default::default()
        };
        let out = train(
            PredictionModel::logistic(2),
            &train_set,
            &eval_set,
            &cfg,
            Objective::MinGroupAccuracy,
        )?;
        let r = evaluate(&out.best_model(), &test_set)?;
        println!(
            "{w:>6} {:>8.4} {:>8.4} {:>8.4}",
            r.max_deo.unwrap_or(f64::NAN),
            r.groups[0].accuracy.unwrap_or(f64::NAN),
            r.groups[1].accuracy.unwrap_or(f64::NAN)
        );
        reports.push(r);
    }
    let v = classify_intervention(&reports[0], reports.last().unwrap(), 0.001)?;
    println!("weight 10 vs 0: {} (deltas {:?})", v.verdict, v.deltas);
    Ok(())
}

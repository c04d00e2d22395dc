//! Per-group noise, bias and variance of a learner over bootstrap
//! resamples, and the resulting fairness gap.

use fairgap::data::{generate_synthetic, SyntheticSpec};
use fairgap::decomposition::{decompose_fairness, DecompositionConfig, LossKind, SgdLearner, Truth};
use fairgap::models::{ModelSpec, TrainConfig};

fn main() -> fairgap::Result<()> {
    let spec = |n: Vec<usize>, seed| SyntheticSpec {
        n_per_group: n,
        dims: 2,
        cluster_means: vec![[vec![-1.5, 0.0], vec![1.5, 0.0]], [vec![1.0, 2.5], vec![-1.0, 2.5]]],
        cluster_stddev: vec![[1.0, 1.0], [1.0, 1.0]],
        label_noise_rate: vec![0.05, 0.05],
        seed,
        group_names: Some(vec!["large".into(), "small".into()]),
    };
    let train = generate_synthetic(&spec(vec![400, 40], 1))?;
    let test = generate_synthetic(&spec(vec![300, 300], 2))?;
    let truth = Truth::new(Some(train.conditional.clone()), false)?;
    let learner = SgdLearner {
        model: ModelSpec::Mlp { hidden: 16 },
        train: TrainConfig {
            steps: 600,
            batch_size: 32,
            learning_rate: 0.05,
            eval_every: 600,
            ..Default::default()
        },
    };
    let cfg = DecompositionConfig {
        replicates: 21,
        loss: LossKind::ZeroOne,
        ..Default::default()
    };
    let (report, points) = decompose_fairness(&test.dataset, &truth, &learner, &train.dataset, &cfg)?;

    println!(
        "{:<6} {:>8} {:>8} {:>8} {:>8}  regime",
        "group", "noise", "bias", "variance", "error"
    );
    for g in &report.groups {
        println!(
            "{:<6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {:?}",
            g.name, g.noise, g.bias, g.variance, g.mean_error, g.regime
        );
    }
    println!("E_fair = {:?}, |V_a - V_b| = {:?}", report.e_fair, report.variance_gap);
    println!(
        "{} points, identity residual {:.1e}",
        points.len(),
        report.identity_max_residual
    );
    Ok(())
}

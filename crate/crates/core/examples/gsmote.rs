//! Uniform simplex sampling and g-SMOTE synthetic points.

use fairgap::augment::{gsmote_sample, sample_simplex, AugmentConfig, IdentityCodec};
use fairgap::data::Dataset;

fn main() -> fairgap::Result<()> {
    let triangle = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    for seed in 0..3 {
        println!("simplex sample {seed}: {:?}", sample_simplex(&triangle, seed)?);
    }

    // A ring of label-1 points and a cluster of label-0 points.
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..12 {
        let t = i as f64 * std::f64::consts::TAU / 12.0;
        rows.push(vec![3.0 * t.cos(), 3.0 * t.sin()]);
        labels.push(1);
        rows.push(vec![0.3 * t.cos(), 0.3 * t.sin()]);
        labels.push(0);
    }
    let n = rows.len();
    let ds = Dataset::from_rows(&rows, labels, vec![0; n], vec!["all".into()])?;
    for k in [1, 2, 3] {
        let cfg = AugmentConfig {
            m: 4,
            k,
            include_seed: true,
            seed: 9,
        };
        let (x, y) = gsmote_sample(&ds, &IdentityCodec, 0, &cfg)?;
        println!("k = {k}: seed row {:?} -> synthetic {:?} with label {y}", ds.row(0), x);
    }
    Ok(())
}

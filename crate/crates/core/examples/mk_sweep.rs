//! Min-group accuracy of adaptive g-SMOTE over a small (m, k) grid, using
//! the shipped imbalanced benchmark config.

use std::path::Path;

use fairgap::experiment::{run_sweep_mk, ExperimentConfig, Method};

fn main() -> fairgap::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/imbalanced.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.seeds = vec![0, 1];
    cfg.sweep_mk.m = vec![5, 10];
    cfg.sweep_mk.k = vec![1, 3];
    println!("{:>3} {:>3} {:>8} {:>8}", "m", "k", "mean", "stddev");
    for c in run_sweep_mk(&cfg, Method::AdaptiveGsmote)? {
        println!(
            "{:>3} {:>3} {:>8.4} {:>8.4}",
            c.m,
            c.k,
            c.mean.unwrap_or(f64::NAN),
            c.stddev.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

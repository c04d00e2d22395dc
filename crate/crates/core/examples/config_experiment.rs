//! Runs a shipped experiment config for several seeds and aggregates the
//! test metrics, as `fairgap train` does.

use std::path::Path;

use fairgap::experiment::{aggregate, run_seeds, ExperimentConfig, Method};

fn main() -> fairgap::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/leveling_down.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.seeds.truncate(3);
    println!("{}", cfg.provenance_line());
    for method in [Method::Baseline, Method::Oversample] {
        let runs = run_seeds(&cfg, method, 0.0)?;
        let row = aggregate(method, 0.0, &runs);
        println!(
            "{:<10} seeds ok {}  accuracy {:.4}  min-group {:.4}",
            method.name(),
            row.seeds_ok,
            row.overall_accuracy.mean.unwrap_or(f64::NAN),
            row.min_group_accuracy.mean.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

//! Classifies an intervention by per-group accuracy changes.

use fairgap::data::Dataset;
use fairgap::metrics::{classify_intervention, confusion_by_group, GroupReport};

/// Report for two groups of 100 negatives with `wrong[g]` errors in group `g`.
fn report(wrong: [usize; 2]) -> fairgap::Result<GroupReport> {
    let groups: Vec<usize> = (0..200).map(|i| i / 100).collect();
    let ds = Dataset::from_flat(vec![0.0; 200], 1, vec![0; 200], groups, vec!["a".into(), "b".into()])?;
    let pred: Vec<u8> = (0..200).map(|i| u8::from(i % 100 < wrong[i / 100])).collect();
    confusion_by_group(&pred, &ds)
}

fn main() -> fairgap::Result<()> {
    let baseline = report([10, 30])?;
    for (name, wrong) in [
        ("unchanged", [10, 30]),
        ("both better", [8, 20]),
        ("worst group better", [15, 20]),
        ("worst group worse", [5, 35]),
        ("both worse", [15, 35]),
    ] {
        let v = classify_intervention(&baseline, &report(wrong)?, 0.001)?;
        println!(
            "{name:<20} deltas {:?} -> {} (acceptable: {})",
            v.deltas,
            v.verdict,
            v.verdict.is_acceptable()
        );
    }
    Ok(())
}

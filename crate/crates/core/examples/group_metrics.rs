//! Per-group confusion counts, equal-opportunity gaps and the worst group.

use fairgap::data::Dataset;
use fairgap::metrics::{confusion_by_group, minmax_summary};

fn main() -> fairgap::Result<()> {
    // Two groups of six; the classifier misses more positives in group "b".
    let labels = vec![1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0];
    let groups = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
    let pred = [1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0];
    let ds = Dataset::from_flat(vec![0.0; 12], 1, labels, groups, vec!["a".into(), "b".into()])?;

    let report = confusion_by_group(&pred, &ds)?;
    for g in &report.groups {
        println!(
            "{}: n={} accuracy={:?} tpr={:?} fpr={:?}",
            g.name, g.size, g.accuracy, g.tpr, g.fpr
        );
    }
    println!("DEO = {:?}, DEOdds = {:?}", report.max_deo, report.max_deodds);
    let worst = minmax_summary(&report)?;
    println!(
        "worst group: {} with accuracy {:.3}",
        report.groups[worst.argmin_group].name, worst.min_group_accuracy
    );
    Ok(())
}

//! Accuracy-based group fairness metrics and the Pareto audit.
//!
//! Rates that have no denominator (TPR of a group without positives, FPR of
//! a group without negatives) are `None`, never 0 or 1. Any gap that would
//! need such a rate is likewise `None`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Tag recorded in reports: equalized-odds gaps are the plain sum of the
/// TPR and FPR gaps, so they range over [0, 2].
pub const DEODDS_NORMALIZATION: &str = "raw_sum_in_0_2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub name: String,
    pub size: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

impl GroupConfusion {
    fn from_counts(name: String, tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let size = tp + fp + tn + fn_;
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            name,
            size,
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, size),
            tpr: ratio(tp, tp + fn_),
            fpr: ratio(fp, fp + tn),
        }
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }
}

/// Fairness gaps between one pair of groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub a: usize,
    pub b: usize,
    pub label: String,
    pub deo: Option<f64>,
    pub deodds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub groups: Vec<GroupConfusion>,
    pub overall_accuracy: f64,
    pub overall_tpr: Option<f64>,
    pub pairs: Vec<PairGap>,
    pub max_deo: Option<f64>,
    pub max_deodds: Option<f64>,
    pub min_group_accuracy: Option<f64>,
    pub argmin_group: Option<usize>,
    pub max_group_accuracy: Option<f64>,
    pub min_group_tpr: Option<f64>,
    pub max_group_tpr: Option<f64>,
    pub deodds_normalization: String,
}

impl GroupReport {
    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    pub fn accuracies(&self) -> Vec<Option<f64>> {
        self.groups.iter().map(|g| g.accuracy).collect()
    }

    /// Gaps for the pair `(a, b)` in either order.
    pub fn pair(&self, a: usize, b: usize) -> Option<&PairGap> {
        self.pairs.iter().find(|p| (p.a, p.b) == (a, b) || (p.a, p.b) == (b, a))
    }
}

fn fold_defined(values: impl Iterator<Item = Option<f64>>, pick: fn(f64, f64) -> f64) -> Option<f64> {
    values.flatten().reduce(pick)
}

/// Exact per-group confusion counts for hard predictions.
pub fn confusion_by_group(predictions: &[u8], ds: &Dataset) -> Result<GroupReport> {
    if predictions.len() != ds.len() {
        return Err(Error::LengthMismatch {
            expected: ds.len(),
            got: predictions.len(),
        });
    }
    let g = ds.n_groups();
    // [tp, fp, tn, fn] per group
    let mut counts = vec![[0usize; 4]; g];
    for (i, &pred) in predictions.iter().enumerate() {
        let slot = match (pred >= 1, ds.label(i) == 1) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        counts[ds.group(i)][slot] += 1;
    }
    let groups: Vec<GroupConfusion> = counts
        .iter()
        .zip(ds.group_names())
        .map(|(c, name)| GroupConfusion::from_counts(name.clone(), c[0], c[1], c[2], c[3]))
        .collect();

    let correct: usize = groups.iter().map(|c| c.tp + c.tn).sum();
    let tp: usize = groups.iter().map(|c| c.tp).sum();
    let pos: usize = groups.iter().map(GroupConfusion::positives).sum();

    let mut pairs = Vec::new();
    for a in 0..g {
        for b in a + 1..g {
            pairs.push(PairGap {
                a,
                b,
                label: format!("{}|{}", groups[a].name, groups[b].name),
                deo: tpr_gap(&groups, a, b).ok(),
                deodds: odds_gap(&groups, a, b).ok(),
            });
        }
    }

    let (min_group_accuracy, argmin_group) = min_accuracy(&groups);
    Ok(GroupReport {
        overall_accuracy: correct as f64 / ds.len() as f64,
        overall_tpr: (pos > 0).then(|| tp as f64 / pos as f64),
        max_deo: fold_defined(pairs.iter().map(|p| p.deo), f64::max),
        max_deodds: fold_defined(pairs.iter().map(|p| p.deodds), f64::max),
        min_group_accuracy,
        argmin_group,
        max_group_accuracy: fold_defined(groups.iter().map(|c| c.accuracy), f64::max),
        min_group_tpr: fold_defined(groups.iter().map(|c| c.tpr), f64::min),
        max_group_tpr: fold_defined(groups.iter().map(|c| c.tpr), f64::max),
        pairs,
        groups,
        deodds_normalization: DEODDS_NORMALIZATION.into(),
    })
}

fn min_accuracy(groups: &[GroupConfusion]) -> (Option<f64>, Option<usize>) {
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in groups.iter().enumerate() {
        if let Some(acc) = c.accuracy {
            // strict < keeps the lowest id on ties
            if best.is_none_or(|(b, _)| acc < b) {
                best = Some((acc, i));
            }
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

fn rate(groups: &[GroupConfusion], g: usize, pick: fn(&GroupConfusion) -> Option<f64>, what: &str) -> Result<f64> {
    let c = groups
        .get(g)
        .ok_or_else(|| Error::invalid("group", format!("no group {g}")))?;
    pick(c).ok_or_else(|| Error::UndefinedRate {
        group: g,
        reason: format!("group {:?} has no {what}", c.name),
    })
}

fn tpr_gap(groups: &[GroupConfusion], a: usize, b: usize) -> Result<f64> {
    let ta = rate(groups, a, |c| c.tpr, "positives")?;
    let tb = rate(groups, b, |c| c.tpr, "positives")?;
    Ok((ta - tb).abs())
}

fn odds_gap(groups: &[GroupConfusion], a: usize, b: usize) -> Result<f64> {
    let tpr = tpr_gap(groups, a, b)?;
    let fa = rate(groups, a, |c| c.fpr, "negatives")?;
    let fb = rate(groups, b, |c| c.fpr, "negatives")?;
    Ok(tpr + (fa - fb).abs())
}

/// Difference in equal opportunity: `|TPR_a - TPR_b|`.
pub fn deo(report: &GroupReport, a: usize, b: usize) -> Result<f64> {
    tpr_gap(&report.groups, a, b)
}

/// Difference in equalized odds: TPR gap plus FPR gap.
pub fn deodds(report: &GroupReport, a: usize, b: usize) -> Result<f64> {
    odds_gap(&report.groups, a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxSummary {
    pub min_group_accuracy: f64,
    pub argmin_group: usize,
    pub min_group_tpr: Option<f64>,
}

pub fn minmax_summary(report: &GroupReport) -> Result<MinMaxSummary> {
    if let Some(g) = report.groups.iter().position(|c| c.size == 0) {
        return Err(Error::EmptyGroup { group: g });
    }
    let (min, arg) = min_accuracy(&report.groups);
    Ok(MinMaxSummary {
        min_group_accuracy: min.ok_or(Error::EmptyDataset)?,
        argmin_group: arg.ok_or(Error::EmptyDataset)?,
        min_group_tpr: report.min_group_tpr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No group degrades and at least one improves.
    ParetoImprovement,
    /// The worst baseline group does not degrade, some group improves and another degrades.
    TradeOff,
    /// Every group degrades.
    LevelingDown,
    /// Some groups degrade, not all, and the worst group gains nothing at their expense.
    ParetoDegradationPartial,
    /// Every delta lies within the tolerance.
    Unchanged,
}

impl Verdict {
    /// Whether an audit gate should accept this outcome.
    pub fn is_acceptable(self) -> bool {
        matches!(
            self,
            Verdict::ParetoImprovement | Verdict::TradeOff | Verdict::Unchanged
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::ParetoImprovement => "pareto_improvement",
            Verdict::TradeOff => "trade_off",
            Verdict::LevelingDown => "leveling_down",
            Verdict::ParetoDegradationPartial => "pareto_degradation_partial",
            Verdict::Unchanged => "unchanged",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoVerdict {
    pub group_names: Vec<String>,
    pub deltas: Vec<f64>,
    pub verdict: Verdict,
    /// Group with the lowest baseline accuracy (lowest id on ties).
    pub worst_group: usize,
    pub worst_group_delta: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Up,
    Flat,
    Down,
}

/// Verdict from the signs of per-group accuracy deltas.
fn verdict_from_signs(signs: &[Sign], worst: usize) -> Verdict {
    let any_up = signs.contains(&Sign::Up);
    let any_down = signs.contains(&Sign::Down);
    if signs.iter().all(|&s| s == Sign::Down) {
        Verdict::LevelingDown
    } else if !any_down {
        if any_up {
            Verdict::ParetoImprovement
        } else {
            Verdict::Unchanged
        }
    } else if signs[worst] == Sign::Down || !any_up {
        Verdict::ParetoDegradationPartial
    } else {
        Verdict::TradeOff
    }
}

/// Compares per-group accuracies of an intervention against a baseline.
pub fn classify_intervention(
    baseline: &GroupReport,
    intervention: &GroupReport,
    tolerance: f64,
) -> Result<ParetoVerdict> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::invalid("tolerance", "must be non-negative"));
    }
    let names = baseline.group_names();
    if names != intervention.group_names() {
        return Err(Error::GroupMismatch {
            left: names,
            right: intervention.group_names(),
        });
    }
    let mut base_acc = Vec::with_capacity(names.len());
    let mut deltas = Vec::with_capacity(names.len());
    for (g, (b, i)) in baseline.groups.iter().zip(&intervention.groups).enumerate() {
        let (Some(b), Some(i)) = (b.accuracy, i.accuracy) else {
            return Err(Error::EmptyGroup { group: g });
        };
        base_acc.push(b);
        deltas.push(i - b);
    }
    let worst = base_acc
        .iter()
        .enumerate()
        .fold(0, |w, (g, &a)| if a < base_acc[w] { g } else { w });
    let signs: Vec<Sign> = deltas
        .iter()
        .map(|&d| {
            if d > tolerance {
                Sign::Up
            } else if d < -tolerance {
                Sign::Down
            } else {
                Sign::Flat
            }
        })
        .collect();
    Ok(ParetoVerdict {
        verdict: verdict_from_signs(&signs, worst),
        worst_group: worst,
        worst_group_delta: deltas[worst],
        group_names: names,
        deltas,
        tolerance,
    })
}

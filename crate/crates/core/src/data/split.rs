use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Smallest (group, label) cell that can be split three ways.
const MIN_CELL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub eval_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            eval_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, f) in [
            ("train_fraction", self.train_fraction),
            ("eval_fraction", self.eval_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(field, format!("{f} is not in (0, 1)")));
            }
        }
        let sum = self.train_fraction + self.eval_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "split fractions",
                format!("train_fraction + eval_fraction + test_fraction = {sum}, expected 1"),
            ));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.eval_fraction, self.test_fraction]
    }
}

/// Largest-remainder allocation of `total` items over `fractions`; every
/// count is within one item of its exact share.
fn allocate(total: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * total as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Row indices of the train/eval/test splits, each sorted ascending.
pub fn stratified_split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, "split", 0);
    let mut out: [Vec<usize>; 3] = Default::default();
    for g in 0..ds.n_groups() {
        for label in [0u8, 1] {
            let mut cell = ds.cell_indices(g, label);
            if cell.len() < MIN_CELL {
                return Err(Error::Stratification {
                    group: ds.group_names()[g].clone(),
                    label,
                    size: cell.len(),
                    needed: MIN_CELL,
                });
            }
            cell.shuffle(&mut rng);
            let counts = allocate(cell.len(), spec.fractions());
            let mut start = 0;
            for (split, &c) in out.iter_mut().zip(&counts) {
                split.extend_from_slice(&cell[start..start + c]);
                start += c;
            }
        }
    }
    for (split, name) in out.iter_mut().zip(["train", "eval", "test"]) {
        split.sort_unstable();
        let mut seen = vec![false; ds.n_groups()];
        for &i in split.iter() {
            seen[ds.group(i)] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(
                "split fractions",
                format!("{name} split would contain no rows of group {:?}", ds.group_names()[g]),
            ));
        }
    }
    Ok(out)
}

pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, eval, test] = stratified_split_indices(ds, spec)?;
    Ok((ds.select(&train)?, ds.select(&eval)?, ds.select(&test)?))
}

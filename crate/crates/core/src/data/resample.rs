use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// How a distribution over training sets is realized from one dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Resampling {
    /// `n` rows drawn uniformly with replacement.
    #[default]
    Bootstrap,
    /// `size` distinct rows drawn without replacement.
    Subsample { size: usize },
}

impl Resampling {
    pub fn apply(&self, ds: &Dataset, seed: u64) -> Result<Dataset> {
        match *self {
            Resampling::Bootstrap => bootstrap_resample(ds, seed),
            Resampling::Subsample { size } => subsample(ds, size, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Resampling::Bootstrap => "bootstrap".into(),
            Resampling::Subsample { size } => format!("subsample(size={size})"),
        }
    }
}

pub fn bootstrap_resample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let n = ds.len();
    let mut rng = rng::stream(seed, "bootstrap", 0);
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    ds.select(&idx)
}

/// Draws `size` rows without replacement; rows keep their original order.
pub fn subsample(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if size == 0 || size > ds.len() {
        return Err(Error::invalid(
            "size",
            format!("subsample size {size} must be in 1..={}", ds.len()),
        ));
    }
    let mut rng = rng::stream(seed, "subsample", 0);
    let mut idx = rand::seq::index::sample(&mut rng, ds.len(), size).into_vec();
    idx.sort_unstable();
    ds.select(&idx)
}

/// Duplicates rows of every non-empty (group, label) cell, cycling through
/// the cell in order, until each matches the largest cell. Original rows come
/// first.
pub fn oversample_cells(ds: &Dataset) -> Result<Dataset> {
    let cells: Vec<Vec<usize>> = (0..ds.n_groups())
        .flat_map(|g| [0u8, 1].map(|y| ds.cell_indices(g, y)))
        .filter(|c| !c.is_empty())
        .collect();
    let target = cells.iter().map(Vec::len).max().unwrap_or(0);
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    for cell in &cells {
        idx.extend(cell.iter().cycle().take(target - cell.len()));
    }
    ds.select(&idx)
}

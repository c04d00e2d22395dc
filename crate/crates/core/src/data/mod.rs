//! Datasets of feature vectors, binary labels and protected-group ids.
//!
//! A [`Dataset`] is immutable once built. Everything downstream (metrics,
//! training, augmentation, decomposition) consumes it by reference, and row
//! subsets are materialized with [`Dataset::select`].

mod io;
mod resample;
mod split;
mod synthetic;

pub use io::{load_csv, read_csv, save_csv, write_csv, CsvSchema, DatasetMetadata};
pub use resample::{bootstrap_resample, oversample_cells, subsample, Resampling};
pub use split::{stratified_split, stratified_split_indices, SplitSpec};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticSpec, TrueConditional};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    groups: Vec<usize>,
    group_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn from_flat(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<u8>,
        groups: Vec<usize>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "feature dimension must be at least 1"));
        }
        if features.len() != n * dim {
            return Err(Error::LengthMismatch {
                expected: n * dim,
                got: features.len(),
            });
        }
        if groups.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: groups.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::invalid("labels", format!("label {bad} is not binary")));
        }
        if let Some(&bad) = groups.iter().find(|&&g| g >= group_names.len()) {
            return Err(Error::invalid(
                "groups",
                format!("group id {bad} out of range for {} groups", group_names.len()),
            ));
        }
        Ok(Self {
            features,
            dim,
            labels,
            groups,
            group_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>, groups: Vec<usize>, group_names: Vec<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let features = rows.iter().flatten().copied().collect();
        Self::from_flat(features, dim, labels, groups, group_names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn group(&self, i: usize) -> usize {
        self.groups[i]
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// Number of rows per group id.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn group_indices(&self, group: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.groups[i] == group).collect()
    }

    /// Rows belonging to the (group, label) cell, in ascending order.
    pub fn cell_indices(&self, group: usize, label: u8) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.groups[i] == group && self.labels[i] == label)
            .collect()
    }

    /// Materializes the listed rows (duplicates allowed) as a new dataset
    /// sharing this dataset's group names.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut groups = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            groups.push(self.groups[i]);
        }
        Self::from_flat(features, self.dim, labels, groups, self.group_names.clone())
    }

    /// Appends one row; the caller guarantees a valid label and group id.
    pub(crate) fn push_row(&mut self, x: &[f64], label: u8, group: usize) {
        debug_assert!(x.len() == self.dim && label <= 1 && group < self.group_names.len());
        self.features.extend_from_slice(x);
        self.labels.push(label);
        self.groups.push(group);
    }

    /// Appends rows from `other`, which must share dimension and group names.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.group_names != self.group_names {
            return Err(Error::GroupMismatch {
                left: self.group_names.clone(),
                right: other.group_names.clone(),
            });
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.groups.extend_from_slice(&other.groups);
        Ok(out)
    }
}

//! Two-cluster-per-group Gaussian data with known label posterior.
//!
//! Each point gets a clean label from Bernoulli(0.5), a feature vector from
//! the isotropic Gaussian of its (group, clean label) cluster, and an
//! observed label that flips the clean one with the group's noise rate. The
//! posterior `P(Y = 1 | x, group)` is therefore available in closed form.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_group: Vec<usize>,
    pub dims: usize,
    /// `cluster_means[g][y]` is the mean of group `g`'s clean-label-`y` cluster.
    pub cluster_means: Vec<[Vec<f64>; 2]>,
    pub cluster_stddev: Vec<[f64; 2]>,
    pub label_noise_rate: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_names: Option<Vec<String>>,
}

impl SyntheticSpec {
    pub fn n_groups(&self) -> usize {
        self.n_per_group.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.n_groups();
        if g < 2 {
            return Err(Error::invalid("n_per_group", "at least 2 groups are required"));
        }
        if self.n_per_group.contains(&0) {
            return Err(Error::invalid("n_per_group", "every group needs at least one point"));
        }
        if self.dims == 0 {
            return Err(Error::invalid("dims", "must be positive"));
        }
        for (field, len) in [
            ("cluster_means", self.cluster_means.len()),
            ("cluster_stddev", self.cluster_stddev.len()),
            ("label_noise_rate", self.label_noise_rate.len()),
        ] {
            if len != g {
                return Err(Error::invalid(field, format!("expected {g} entries, got {len}")));
            }
        }
        for means in &self.cluster_means {
            for m in means {
                if m.len() != self.dims {
                    return Err(Error::invalid(
                        "cluster_means",
                        format!("mean has {} entries, expected {}", m.len(), self.dims),
                    ));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("cluster_means", "means must be finite"));
                }
            }
        }
        if self
            .cluster_stddev
            .iter()
            .flatten()
            .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return Err(Error::invalid("cluster_stddev", "must be positive and finite"));
        }
        if self.label_noise_rate.iter().any(|&r| !(0.0..0.5).contains(&r)) {
            return Err(Error::invalid("label_noise_rate", "rates must lie in [0, 0.5)"));
        }
        if let Some(names) = &self.group_names {
            if names.len() != g {
                return Err(Error::invalid("group_names", format!("expected {g} names")));
            }
        }
        Ok(())
    }

    pub fn group_names(&self) -> Vec<String> {
        self.group_names
            .clone()
            .unwrap_or_else(|| (0..self.n_groups()).map(|g| format!("group_{g}")).collect())
    }

    /// Exact `P(Y = 1 | x, group)` under this spec.
    pub fn posterior(&self, x: &[f64], group: usize) -> f64 {
        let log_density = |y: usize| {
            let mean = &self.cluster_means[group][y];
            let sd = self.cluster_stddev[group][y];
            let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
            -sq / (2.0 * sd * sd) - self.dims as f64 * sd.ln()
        };
        let clean_one = 1.0 / (1.0 + (log_density(0) - log_density(1)).exp());
        let rho = self.label_noise_rate[group];
        clean_one * (1.0 - rho) + (1.0 - clean_one) * rho
    }
}

/// Label posterior `P(Y = 1 | x, group)`.
type ConditionalFn = dyn Fn(&[f64], usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct TrueConditional {
    f: Arc<ConditionalFn>,
}

impl TrueConditional {
    pub fn from_fn(f: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn prob(&self, x: &[f64], group: usize) -> f64 {
        (self.f)(x, group).clamp(0.0, 1.0)
    }
}

impl fmt::Debug for TrueConditional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TrueConditional(..)")
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub conditional: TrueConditional,
    /// Labels before noise was applied.
    pub clean_labels: Vec<u8>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, "synthetic", 0);
    let total: usize = spec.n_per_group.iter().sum();
    let mut features = Vec::with_capacity(total * spec.dims);
    let mut labels = Vec::with_capacity(total);
    let mut clean_labels = Vec::with_capacity(total);
    let mut groups = Vec::with_capacity(total);
    for (g, &n) in spec.n_per_group.iter().enumerate() {
        for _ in 0..n {
            let clean = usize::from(rng.random_bool(0.5));
            let mean = &spec.cluster_means[g][clean];
            let sd = spec.cluster_stddev[g][clean];
            for &m in mean {
                let z: f64 = rng.sample(StandardNormal);
                features.push(m + sd * z);
            }
            let flip = rng.random_bool(spec.label_noise_rate[g]);
            let observed = if flip { 1 - clean } else { clean };
            clean_labels.push(clean as u8);
            labels.push(observed as u8);
            groups.push(g);
        }
    }
    let dataset = Dataset::from_flat(features, spec.dims, labels, groups, spec.group_names())?;
    let owned = spec.clone();
    Ok(Synthetic {
        dataset,
        conditional: TrueConditional::from_fn(move |x, g| owned.posterior(x, g)),
        clean_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: Vec<usize>, noise: Vec<f64>) -> SyntheticSpec {
        let g = n.len();
        SyntheticSpec {
            n_per_group: n,
            dims: 2,
            cluster_means: (0..g).map(|i| [vec![-1.0, i as f64], vec![1.0, i as f64]]).collect(),
            cluster_stddev: vec![[0.7, 0.7]; g],
            label_noise_rate: noise,
            seed: 3,
            group_names: None,
        }
    }

    #[test]
    fn exact_group_sizes_and_determinism() {
        let s = spec(vec![1000, 50], vec![0.1, 0.2]);
        let a = generate_synthetic(&s).unwrap();
        assert_eq!(a.dataset.group_sizes(), vec![1000, 50]);
        let b = generate_synthetic(&s).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn zero_noise_posterior_is_the_clean_mixture_posterior() {
        let s = spec(vec![10, 10], vec![0.0, 0.0]);
        let syn = generate_synthetic(&s).unwrap();
        assert_eq!(syn.dataset.labels(), syn.clean_labels.as_slice());
        // equal variances: posterior = sigmoid(2 * mu . x / sd^2) along the first axis
        let p = syn.conditional.prob(&[0.3, 0.0], 0);
        let expected = 1.0 / (1.0 + (-2.0 * 0.3 / 0.49f64).exp());
        assert!((p - expected).abs() < 1e-12);
        // far away the posterior saturates to 0 or 1, where the noise N(x) is 0
        assert_eq!(syn.conditional.prob(&[40.0, 0.0], 0), 1.0);
        assert!(syn.conditional.prob(&[-40.0, 0.0], 0) < 1e-60);
    }

    #[test]
    fn noise_rate_bounds_the_posterior() {
        let s = spec(vec![10, 10], vec![0.2, 0.0]);
        let syn = generate_synthetic(&s).unwrap();
        let p = syn.conditional.prob(&[50.0, 0.0], 0);
        assert!((p - 0.8).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(spec(vec![10], vec![0.0]).validate().is_err());
        assert!(spec(vec![10, 10], vec![0.0, 0.5]).validate().is_err());
        let mut s = spec(vec![10, 10], vec![0.0, 0.0]);
        s.cluster_means[1][0] = vec![f64::NAN, 0.0];
        assert!(s.validate().is_err());
    }
}

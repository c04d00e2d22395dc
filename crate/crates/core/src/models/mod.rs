//! Small binary classifiers trained from scratch.
//!
//! Two architectures share a flat parameter vector:
//!
//! * `logistic`: `[w_0 .. w_{d-1}, b]`, score `sigmoid(w . x + b)`.
//! * `mlp`: one tanh hidden layer of width `h`, laid out as
//!   `[W1 (h x d, row-major), b1 (h), w2 (h), b2]`, score
//!   `sigmoid(w2 . tanh(W1 x + b1) + b2)`.

mod loss;
mod train;

pub use loss::{deo_regularizer, loss_and_gradient, LossEval, RegularizerScope, RegularizerStatus};
pub(crate) use train::{check_splits, run_sgd};
pub use train::{
    evaluate, predict_labels, sgd_fit, train, BatchSource, Checkpoint, Objective, TrainConfig, TrainOutcome,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Logistic { input_dim: usize },
    Mlp { input_dim: usize, hidden: usize },
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Logistic { input_dim } | Architecture::Mlp { input_dim, .. } => input_dim,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Logistic { input_dim } => input_dim + 1,
            Architecture::Mlp { input_dim, hidden } => hidden * input_dim + 2 * hidden + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionModel {
    #[serde(flatten)]
    architecture: Architecture,
    parameters: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest f64 strictly below 1.
const SCORE_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

impl PredictionModel {
    /// Logistic regression with all-zero parameters.
    pub fn logistic(input_dim: usize) -> Self {
        let architecture = Architecture::Logistic { input_dim };
        Self {
            parameters: vec![0.0; architecture.param_count()],
            architecture,
        }
    }

    /// MLP with every weight and bias drawn from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn mlp(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let architecture = Architecture::Mlp { input_dim, hidden };
        let mut rng = rng::stream(seed, "init", 0);
        let mut parameters = Vec::with_capacity(architecture.param_count());
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        for _ in 0..hidden * input_dim + hidden {
            parameters.push(rng.random_range(-b1..=b1));
        }
        for _ in 0..hidden + 1 {
            parameters.push(rng.random_range(-b2..=b2));
        }
        Self {
            architecture,
            parameters,
        }
    }

    pub fn with_parameters(architecture: Architecture, parameters: Vec<f64>) -> Result<Self> {
        if parameters.len() != architecture.param_count() {
            return Err(Error::LengthMismatch {
                expected: architecture.param_count(),
                got: parameters.len(),
            });
        }
        if architecture.input_dim() == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        if let Architecture::Mlp { hidden: 0, .. } = architecture {
            return Err(Error::invalid("hidden", "must be positive"));
        }
        Ok(Self {
            architecture,
            parameters,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.parameters
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid output. Assumes `x` has the right dimension.
    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        let p = &self.parameters;
        match self.architecture {
            Architecture::Logistic { input_dim } => dot(&p[..input_dim], x) + p[input_dim],
            Architecture::Mlp { input_dim, hidden } => {
                let (w1, rest) = p.split_at(hidden * input_dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut z = b2[0];
                for j in 0..hidden {
                    let a = (dot(&w1[j * input_dim..(j + 1) * input_dim], x) + b1[j]).tanh();
                    z += w2[j] * a;
                }
                z
            }
        }
    }

    /// Returns the logit and adds `scale * d(logit)/d(params)` into `grad`.
    pub(crate) fn logit_backward(&self, x: &[f64], scale: f64, grad: &mut [f64], hidden_buf: &mut Vec<f64>) -> f64 {
        let p = &self.parameters;
        match self.architecture {
            Architecture::Logistic { input_dim } => {
                let z = dot(&p[..input_dim], x) + p[input_dim];
                for (g, &xi) in grad[..input_dim].iter_mut().zip(x) {
                    *g += scale * xi;
                }
                grad[input_dim] += scale;
                z
            }
            Architecture::Mlp { input_dim, hidden } => {
                let (w1, rest) = p.split_at(hidden * input_dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                hidden_buf.clear();
                let mut z = b2[0];
                for j in 0..hidden {
                    let a = (dot(&w1[j * input_dim..(j + 1) * input_dim], x) + b1[j]).tanh();
                    hidden_buf.push(a);
                    z += w2[j] * a;
                }
                let (g_w1, g_rest) = grad.split_at_mut(hidden * input_dim);
                let (g_b1, g_rest) = g_rest.split_at_mut(hidden);
                let (g_w2, g_b2) = g_rest.split_at_mut(hidden);
                g_b2[0] += scale;
                for j in 0..hidden {
                    let a = hidden_buf[j];
                    g_w2[j] += scale * a;
                    let d = scale * w2[j] * (1.0 - a * a);
                    if d != 0.0 {
                        g_b1[j] += d;
                        for (g, &xi) in g_w1[j * input_dim..(j + 1) * input_dim].iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
                z
            }
        }
    }

    /// Classification score in (0, 1).
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x)).clamp(f64::MIN_POSITIVE, SCORE_MAX)
    }

    /// Hard prediction: 1 iff score >= 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_score(x)? >= 0.5))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let raw: Self = serde_json::from_reader(File::open(path)?)?;
        Self::with_parameters(raw.architecture, raw.parameters)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Anything that maps a feature vector to a score in [0, 1].
pub trait Scorer {
    fn score(&self, x: &[f64]) -> f64;
}

impl Scorer for PredictionModel {
    fn score(&self, x: &[f64]) -> f64 {
        self.score_unchecked(x)
    }
}

impl<F: Fn(&[f64]) -> f64> Scorer for F {
    fn score(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Architecture choice without the input dimension, which comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic,
    Mlp { hidden: usize },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Mlp { hidden: 16 }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if let ModelSpec::Mlp { hidden: 0 } = self {
            return Err(Error::invalid("hidden", "must be positive"));
        }
        Ok(())
    }

    /// Fresh model; `seed` only matters for the MLP initialization.
    pub fn build(&self, input_dim: usize, seed: u64) -> PredictionModel {
        match *self {
            ModelSpec::Logistic => PredictionModel::logistic(input_dim),
            ModelSpec::Mlp { hidden } => PredictionModel::mlp(input_dim, hidden, seed),
        }
    }
}

//! Mean binary cross-entropy plus the squared equal-opportunity gap
//! regularizer `(mean score | positives of a  -  mean score | positives of b)^2`.

use serde::{Deserialize, Serialize};

use super::{sigmoid, PredictionModel};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which rows the regularizer is computed over.
#[derive(Debug, Clone, Copy)]
pub enum RegularizerScope<'a> {
    /// Positives of the current batch. The term is skipped (not an error)
    /// when the batch lacks positives of either group.
    Batch,
    /// Positives of a fixed dataset, typically the full training set.
    Context(&'a Dataset),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerStatus {
    Disabled,
    Applied { value: f64 },
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub regularizer: RegularizerStatus,
}

fn positives_of(ds: &Dataset, group: usize) -> Vec<usize> {
    ds.cell_indices(group, 1)
}

fn check_group(ds: &Dataset, g: usize) -> Result<()> {
    if g >= ds.n_groups() {
        return Err(Error::invalid("group_pair", format!("group {g} does not exist")));
    }
    Ok(())
}

/// Squared gap between the mean scores of the two groups' positives.
pub fn deo_regularizer(model: &PredictionModel, ds: &Dataset, group_pair: (usize, usize)) -> Result<f64> {
    let (a, b) = group_pair;
    check_group(ds, a)?;
    check_group(ds, b)?;
    if ds.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: ds.dim(),
        });
    }
    let mean_score = |g: usize| -> Result<f64> {
        let rows = positives_of(ds, g);
        if rows.is_empty() {
            return Err(Error::DegenerateGroup { group: g });
        }
        Ok(rows.iter().map(|&i| sigmoid(model.logit(ds.row(i)))).sum::<f64>() / rows.len() as f64)
    };
    let gap = mean_score(a)? - mean_score(b)?;
    Ok(gap * gap)
}

/// Adds `reg_weight * R` and its gradient; returns R.
fn add_regularizer(
    model: &PredictionModel,
    ds: &Dataset,
    (a, b): (usize, usize),
    reg_weight: f64,
    grad: &mut [f64],
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let pa = positives_of(ds, a);
    let pb = positives_of(ds, b);
    if pa.is_empty() {
        return Err(Error::DegenerateGroup { group: a });
    }
    if pb.is_empty() {
        return Err(Error::DegenerateGroup { group: b });
    }
    let scores = |rows: &[usize]| -> Vec<f64> { rows.iter().map(|&i| sigmoid(model.logit(ds.row(i)))).collect() };
    let sa = scores(&pa);
    let sb = scores(&pb);
    let ma = sa.iter().sum::<f64>() / sa.len() as f64;
    let mb = sb.iter().sum::<f64>() / sb.len() as f64;
    let gap = ma - mb;
    let outer = reg_weight * 2.0 * gap;
    for (rows, s, sign) in [(&pa, &sa, 1.0), (&pb, &sb, -1.0)] {
        let n = rows.len() as f64;
        for (&i, &si) in rows.iter().zip(s) {
            let scale = sign * outer * si * (1.0 - si) / n;
            model.logit_backward(ds.row(i), scale, grad, buf);
        }
    }
    Ok(gap * gap)
}

/// Mean BCE over `batch` plus `reg_weight` times the regularizer.
///
/// With `reg_weight == 0` the regularizer is never evaluated, so the result
/// is bitwise the plain cross-entropy.
pub fn loss_and_gradient(
    model: &PredictionModel,
    batch: &Dataset,
    reg_weight: f64,
    group_pair: (usize, usize),
    scope: RegularizerScope<'_>,
) -> Result<LossEval> {
    if batch.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: batch.dim(),
        });
    }
    if reg_weight.is_nan() || reg_weight < 0.0 {
        return Err(Error::invalid("reg_weight", "must be non-negative"));
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; model.parameters().len()];
    let mut buf = Vec::new();
    let mut loss = 0.0;
    for i in 0..batch.len() {
        let x = batch.row(i);
        let y = f64::from(batch.label(i));
        let z = model.logit(x);
        // softplus(z) - y z, computed stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        model.logit_backward(x, (sigmoid(z) - y) / n, &mut grad, &mut buf);
    }
    loss /= n;

    let regularizer = if reg_weight == 0.0 {
        RegularizerStatus::Disabled
    } else {
        let ctx = match scope {
            RegularizerScope::Batch => batch,
            RegularizerScope::Context(ds) => ds,
        };
        check_group(ctx, group_pair.0)?;
        check_group(ctx, group_pair.1)?;
        match add_regularizer(model, ctx, group_pair, reg_weight, &mut grad, &mut buf) {
            Ok(r) => {
                loss += reg_weight * r;
                RegularizerStatus::Applied { value: r }
            }
            Err(Error::DegenerateGroup { .. }) if matches!(scope, RegularizerScope::Batch) => {
                RegularizerStatus::Skipped
            }
            Err(e) => return Err(e),
        }
    };
    Ok(LossEval {
        loss,
        gradient: grad,
        regularizer,
    })
}

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_gradient, RegularizerScope, RegularizerStatus};
use super::PredictionModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{confusion_by_group, GroupReport};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub eval_every: usize,
    pub seed: u64,
    /// Weight of the equal-opportunity regularizer; 0 disables it.
    pub reg_weight: f64,
    pub group_pair: (usize, usize),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            learning_rate: 0.1,
            momentum: 0.9,
            eval_every: 50,
            seed: 0,
            reg_weight: 0.0,
            group_pair: (0, 1),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            return Err(Error::invalid("reg_weight", "must be non-negative"));
        }
        Ok(())
    }
}

/// Checkpoint selection criterion, evaluated on the held-out split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    OverallAccuracy,
    #[default]
    MinGroupAccuracy,
}

impl Objective {
    pub fn value(self, report: &GroupReport) -> f64 {
        match self {
            Objective::OverallAccuracy => report.overall_accuracy,
            Objective::MinGroupAccuracy => report.min_group_accuracy.unwrap_or(f64::NEG_INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub parameters: Vec<f64>,
    pub report: GroupReport,
    pub objective: f64,
    /// Mean training loss over the steps since the previous checkpoint.
    pub mean_train_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last step.
    pub model: PredictionModel,
    pub checkpoints: Vec<Checkpoint>,
    /// Index into `checkpoints` of the best objective (earliest on ties).
    pub best: Option<usize>,
    pub objective: Objective,
    pub regularizer_applied: usize,
    pub regularizer_skipped: usize,
}

impl TrainOutcome {
    pub fn best_checkpoint(&self) -> Option<&Checkpoint> {
        self.best.map(|i| &self.checkpoints[i])
    }

    /// Model restored from the best checkpoint, or the final model when no
    /// evaluation split was used.
    pub fn best_model(&self) -> PredictionModel {
        match self.best_checkpoint() {
            Some(c) => {
                let mut m = self.model.clone();
                m.parameters_mut().copy_from_slice(&c.parameters);
                m
            }
            None => self.model.clone(),
        }
    }

    /// Fraction of steps whose batch lacked positives for the regularized pair.
    pub fn regularizer_skip_rate(&self) -> f64 {
        let total = self.regularizer_applied + self.regularizer_skipped;
        if total == 0 {
            0.0
        } else {
            self.regularizer_skipped as f64 / total as f64
        }
    }

    pub fn write_checkpoint_log<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        let Some(first) = self.checkpoints.first() else {
            return Ok(());
        };
        let names: Vec<&str> = first.report.groups.iter().map(|g| g.name.as_str()).collect();
        let mut header = vec![
            "step".to_string(),
            "mean_train_loss".into(),
            "objective".into(),
            "overall_accuracy".into(),
            "min_group_accuracy".into(),
            "max_deo".into(),
            "max_deodds".into(),
        ];
        header.extend(names.iter().map(|n| format!("accuracy_{n}")));
        header.extend(names.iter().map(|n| format!("tpr_{n}")));
        writeln!(w, "{}", header.join(","))?;
        for c in &self.checkpoints {
            let r = &c.report;
            let mut row = vec![
                c.step.to_string(),
                fmt_opt(c.mean_train_loss),
                fmt_opt(Some(c.objective)),
                fmt_opt(Some(r.overall_accuracy)),
                fmt_opt(r.min_group_accuracy),
                fmt_opt(r.max_deo),
                fmt_opt(r.max_deodds),
            ];
            row.extend(r.groups.iter().map(|g| fmt_opt(g.accuracy)));
            row.extend(r.groups.iter().map(|g| fmt_opt(g.tpr)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite())
        .map_or_else(String::new, |x| format!("{x:.17}"))
}

/// Supplies training batches and observes evaluations.
pub trait BatchSource {
    fn next_batch(&mut self, step: usize, batch_size: usize, rng: &mut Rng) -> Result<Dataset>;

    fn after_evaluation(&mut self, _step: usize, _model: &PredictionModel, _report: &GroupReport) -> Result<()> {
        Ok(())
    }
}

struct Uniform<'a>(&'a Dataset);

impl BatchSource for Uniform<'_> {
    fn next_batch(&mut self, _step: usize, batch_size: usize, rng: &mut Rng) -> Result<Dataset> {
        let n = self.0.len();
        let idx: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
        self.0.select(&idx)
    }
}

pub fn predict_labels(model: &PredictionModel, ds: &Dataset) -> Result<Vec<u8>> {
    ds.rows().map(|x| model.predict(x)).collect()
}

pub fn evaluate(model: &PredictionModel, ds: &Dataset) -> Result<GroupReport> {
    confusion_by_group(&predict_labels(model, ds)?, ds)
}

/// Momentum SGD over batches from `source`. Evaluates on `eval` at step 0,
/// every `eval_every` steps and after the final step.
pub(crate) fn run_sgd(
    mut model: PredictionModel,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
    objective: Objective,
    source: &mut dyn BatchSource,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, "batch", 0);
    let mut velocity = vec![0.0; model.parameters().len()];
    let mut outcome = TrainOutcome {
        model: model.clone(),
        checkpoints: Vec::new(),
        best: None,
        objective,
        regularizer_applied: 0,
        regularizer_skipped: 0,
    };
    let mut loss_sum = 0.0;
    let mut loss_steps = 0usize;

    let checkpoint = |model: &PredictionModel,
                      step: usize,
                      mean_loss: Option<f64>,
                      outcome: &mut TrainOutcome,
                      source: &mut dyn BatchSource|
     -> Result<()> {
        let Some(eval) = eval else { return Ok(()) };
        let report = evaluate(model, eval)?;
        let value = objective.value(&report);
        let better = outcome.best_checkpoint().is_none_or(|b| value > b.objective);
        source.after_evaluation(step, model, &report)?;
        outcome.checkpoints.push(Checkpoint {
            step,
            parameters: model.parameters().to_vec(),
            report,
            objective: value,
            mean_train_loss: mean_loss,
        });
        if better {
            outcome.best = Some(outcome.checkpoints.len() - 1);
        }
        Ok(())
    };

    checkpoint(&model, 0, None, &mut outcome, source)?;
    for step in 1..=cfg.steps {
        let batch = source.next_batch(step, cfg.batch_size, &mut rng)?;
        let eval_step = loss_and_gradient(&model, &batch, cfg.reg_weight, cfg.group_pair, RegularizerScope::Batch)?;
        if !eval_step.loss.is_finite() {
            return Err(Error::Divergence {
                step,
                loss: eval_step.loss,
            });
        }
        match eval_step.regularizer {
            RegularizerStatus::Applied { .. } => outcome.regularizer_applied += 1,
            RegularizerStatus::Skipped => outcome.regularizer_skipped += 1,
            RegularizerStatus::Disabled => {}
        }
        loss_sum += eval_step.loss;
        loss_steps += 1;
        for ((p, v), g) in model
            .parameters_mut()
            .iter_mut()
            .zip(velocity.iter_mut())
            .zip(&eval_step.gradient)
        {
            *v = cfg.momentum * *v + g;
            *p -= cfg.learning_rate * *v;
        }
        if model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { step, loss: f64::NAN });
        }
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let mean = loss_sum / loss_steps as f64;
            loss_sum = 0.0;
            loss_steps = 0;
            checkpoint(&model, step, Some(mean), &mut outcome, source)?;
        }
    }
    outcome.model = model;
    Ok(outcome)
}

/// Trains on uniformly sampled batches of `train`, checkpointing on `eval`.
pub fn train(
    model: PredictionModel,
    train: &Dataset,
    eval: &Dataset,
    cfg: &TrainConfig,
    objective: Objective,
) -> Result<TrainOutcome> {
    check_splits(&model, train, eval)?;
    run_sgd(model, Some(eval), cfg, objective, &mut Uniform(train))
}

/// Trains without evaluation and returns the final model.
pub fn sgd_fit(model: PredictionModel, data: &Dataset, cfg: &TrainConfig) -> Result<PredictionModel> {
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    Ok(run_sgd(model, None, cfg, Objective::default(), &mut Uniform(data))?.model)
}

pub(crate) fn check_splits(model: &PredictionModel, train: &Dataset, eval: &Dataset) -> Result<()> {
    for ds in [train, eval] {
        if ds.dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                got: ds.dim(),
            });
        }
    }
    if train.group_names() != eval.group_names() {
        return Err(Error::GroupMismatch {
            left: train.group_names().to_vec(),
            right: eval.group_names().to_vec(),
        });
    }
    Ok(())
}

//! Adaptive sampling: train on batches drawn from either the original
//! training set or a growing augmented pool, and at every evaluation add
//! g-SMOTE samples for the group that is currently weakest on held-out data.
//!
//! Randomness is split into independent streams so that degenerate settings
//! line up exactly with plain training: the batch rows come from the same
//! stream `train` uses, the pool choice from a `mix` stream and augmentation
//! from an `augment` stream.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, LatentCodec, LatentIndex};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::GroupReport;
use crate::models::{predict_labels, run_sgd, BatchSource, Objective, PredictionModel, TrainConfig, TrainOutcome};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    #[default]
    ProtectedOnly,
    /// Protected group crossed with the label.
    ProtectedXLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    /// Probability that a batch comes from the original training set.
    pub mix_prob: f64,
    /// Synthetic rows added per evaluation; defaults to the batch size.
    pub augment_batch: Option<usize>,
    pub group_mode: GroupMode,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            mix_prob: 0.5,
            augment_batch: None,
            group_mode: GroupMode::ProtectedOnly,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix_prob) {
            return Err(Error::invalid("mix_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn augment_batch(&self, train: &TrainConfig) -> usize {
        self.augment_batch.unwrap_or(train.batch_size)
    }
}

/// A group (or group-label cell) selected for augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub group: usize,
    /// Set under [`GroupMode::ProtectedXLabel`].
    pub label: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakestGroup {
    pub target: Target,
    pub accuracy: f64,
    /// Another group had the same accuracy; the lowest id won.
    pub tied: bool,
}

/// Group (or cell) with the lowest accuracy of `model` on `eval`, ties to
/// the lowest id. Cells are ordered `(group 0, label 0), (group 0, label 1), ...`.
pub fn weakest_group(model: &PredictionModel, eval: &Dataset, mode: GroupMode) -> Result<WeakestGroup> {
    let preds = predict_labels(model, eval)?;
    let cells: Vec<Target> = match mode {
        GroupMode::ProtectedOnly => (0..eval.n_groups())
            .map(|group| Target { group, label: None })
            .collect(),
        GroupMode::ProtectedXLabel => (0..eval.n_groups())
            .flat_map(|group| [0, 1].map(|y| Target { group, label: Some(y) }))
            .collect(),
    };
    let mut correct = vec![0usize; cells.len()];
    let mut total = vec![0usize; cells.len()];
    for (i, &pred) in preds.iter().enumerate() {
        let c = match mode {
            GroupMode::ProtectedOnly => eval.group(i),
            GroupMode::ProtectedXLabel => 2 * eval.group(i) + usize::from(eval.label(i)),
        };
        total[c] += 1;
        correct[c] += usize::from(pred == eval.label(i));
    }
    let mut best: Option<WeakestGroup> = None;
    for (c, target) in cells.iter().enumerate() {
        if total[c] == 0 {
            return Err(Error::EmptyGroup { group: c });
        }
        let acc = correct[c] as f64 / total[c] as f64;
        match &mut best {
            Some(b) if acc == b.accuracy => b.tied = true,
            Some(b) if acc > b.accuracy => {}
            _ => {
                best = Some(WeakestGroup {
                    target: *target,
                    accuracy: acc,
                    tied: false,
                })
            }
        }
    }
    Ok(best.expect("at least one group"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    /// g-SMOTE sample.
    Synthetic,
    /// Copy of the seed row because its cohort was too small for g-SMOTE.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub provenance: Provenance,
    pub group: usize,
    pub label: u8,
    /// Training step at which the row was added; 0 for original rows.
    pub step: usize,
    /// Training row the sample was seeded at.
    pub seed_row: Option<usize>,
}

/// The extended training set: the original rows followed by appended
/// synthetic rows.
#[derive(Debug, Clone)]
pub struct AugmentedPool {
    data: Dataset,
    entries: Vec<PoolEntry>,
    original_len: usize,
}

impl AugmentedPool {
    pub fn new(train: &Dataset) -> Self {
        let entries = (0..train.len())
            .map(|i| PoolEntry {
                provenance: Provenance::Original,
                group: train.group(i),
                label: train.label(i),
                step: 0,
                seed_row: None,
            })
            .collect();
        Self {
            data: train.clone(),
            entries,
            original_len: train.len(),
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn added(&self) -> &[PoolEntry] {
        &self.entries[self.original_len..]
    }

    fn push(&mut self, x: &[f64], entry: PoolEntry) {
        self.data.push_row(x, entry.label, entry.group);
        self.entries.push(entry);
    }

    /// CSV with one line per row: id, provenance, group, label, step, seed row.
    pub fn write_log<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "row_id,provenance,group,label,step,seed_row")?;
        let names = self.data.group_names();
        for (i, e) in self.entries.iter().enumerate() {
            let prov = match e.provenance {
                Provenance::Original => "original",
                Provenance::Synthetic => "synthetic",
                Provenance::Duplicate => "duplicate",
            };
            let seed = e.seed_row.map_or_else(String::new, |s| s.to_string());
            writeln!(w, "{i},{prov},{},{},{},{seed}", names[e.group], e.label, e.step)?;
        }
        Ok(())
    }
}

/// Augmentation decision recorded at one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub step: usize,
    pub weakest: Option<WeakestGroup>,
    pub added: usize,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub training: TrainOutcome,
    pub pool: AugmentedPool,
    pub batches_from_train: usize,
    pub batches_from_pool: usize,
    /// Rows duplicated instead of sampled because the cohort was too small.
    pub fallbacks: usize,
    pub targets: Vec<TargetRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Targeting {
    Weakest,
    UniformGroup,
}

struct PoolSource<'a> {
    train: &'a Dataset,
    eval: &'a Dataset,
    index: LatentIndex<'a>,
    aug_cfg: AugmentConfig,
    cfg: AdaptiveConfig,
    augment_batch: usize,
    steps: usize,
    targeting: Targeting,
    pool: AugmentedPool,
    mix_rng: Rng,
    aug_rng: Rng,
    from_train: usize,
    from_pool: usize,
    fallbacks: usize,
    targets: Vec<TargetRecord>,
}

impl PoolSource<'_> {
    fn seed_rows(&self, target: Target) -> Vec<usize> {
        match target.label {
            Some(y) => self.train.cell_indices(target.group, y),
            None => self.train.group_indices(target.group),
        }
    }

    fn add_sample(&mut self, step: usize, target: Target) -> Result<()> {
        let seeds = self.seed_rows(target);
        if seeds.is_empty() {
            return Err(Error::EmptyGroup { group: target.group });
        }
        let seed_row = seeds[self.aug_rng.random_range(0..seeds.len())];
        let cohort = self.index.cell_cohort(seed_row);
        let label = self.train.label(seed_row);
        let mut entry = PoolEntry {
            provenance: Provenance::Synthetic,
            group: target.group,
            label,
            step,
            seed_row: Some(seed_row),
        };
        match self
            .index
            .sample_from(seed_row, &cohort, &self.aug_cfg, &mut self.aug_rng)
        {
            Ok((x, _)) => self.pool.push(&x, entry),
            Err(Error::AugmentationUnavailable { .. }) => {
                entry.provenance = Provenance::Duplicate;
                self.fallbacks += 1;
                let x = self.train.row(seed_row).to_vec();
                self.pool.push(&x, entry);
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

impl BatchSource for PoolSource<'_> {
    fn next_batch(&mut self, _step: usize, batch_size: usize, rng: &mut Rng) -> Result<Dataset> {
        let source = if self.mix_rng.random_bool(self.cfg.mix_prob) {
            self.from_train += 1;
            self.train
        } else {
            self.from_pool += 1;
            self.pool.data()
        };
        let n = source.len();
        let idx: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
        source.select(&idx)
    }

    fn after_evaluation(&mut self, step: usize, model: &PredictionModel, _report: &GroupReport) -> Result<()> {
        if step == 0 || step >= self.steps || self.augment_batch == 0 {
            return Ok(());
        }
        let weakest = match self.targeting {
            Targeting::Weakest => Some(weakest_group(model, self.eval, self.cfg.group_mode)?),
            Targeting::UniformGroup => None,
        };
        for _ in 0..self.augment_batch {
            let target = match weakest {
                Some(w) => w.target,
                None => Target {
                    group: self.aug_rng.random_range(0..self.train.n_groups()),
                    label: None,
                },
            };
            self.add_sample(step, target)?;
        }
        self.targets.push(TargetRecord {
            step,
            weakest,
            added: self.augment_batch,
        });
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    model: PredictionModel,
    train: &Dataset,
    eval: &Dataset,
    codec: &dyn LatentCodec,
    aug_cfg: &AugmentConfig,
    cfg: &AdaptiveConfig,
    train_cfg: &TrainConfig,
    objective: Objective,
    targeting: Targeting,
) -> Result<AdaptiveOutcome> {
    cfg.validate()?;
    aug_cfg.validate()?;
    crate::models::check_splits(&model, train, eval)?;
    let mut source = PoolSource {
        train,
        eval,
        index: LatentIndex::build(train, codec)?,
        aug_cfg: *aug_cfg,
        cfg: *cfg,
        augment_batch: cfg.augment_batch(train_cfg),
        steps: train_cfg.steps,
        targeting,
        pool: AugmentedPool::new(train),
        mix_rng: rng::stream(train_cfg.seed, "mix", 0),
        aug_rng: rng::stream(train_cfg.seed ^ aug_cfg.seed, "augment", 0),
        from_train: 0,
        from_pool: 0,
        fallbacks: 0,
        targets: Vec::new(),
    };
    let training = run_sgd(model, Some(eval), train_cfg, objective, &mut source)?;
    Ok(AdaptiveOutcome {
        training,
        pool: source.pool,
        batches_from_train: source.from_train,
        batches_from_pool: source.from_pool,
        fallbacks: source.fallbacks,
        targets: source.targets,
    })
}

/// Adaptive g-SMOTE training: augmentation targets the weakest group on `eval`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_train(
    model: PredictionModel,
    train: &Dataset,
    eval: &Dataset,
    codec: &dyn LatentCodec,
    aug_cfg: &AugmentConfig,
    cfg: &AdaptiveConfig,
    train_cfg: &TrainConfig,
    objective: Objective,
) -> Result<AdaptiveOutcome> {
    run(
        model,
        train,
        eval,
        codec,
        aug_cfg,
        cfg,
        train_cfg,
        objective,
        Targeting::Weakest,
    )
}

/// g-SMOTE without adaptivity: every added row targets a uniformly random group.
#[allow(clippy::too_many_arguments)]
pub fn static_gsmote_train(
    model: PredictionModel,
    train: &Dataset,
    eval: &Dataset,
    codec: &dyn LatentCodec,
    aug_cfg: &AugmentConfig,
    cfg: &AdaptiveConfig,
    train_cfg: &TrainConfig,
    objective: Objective,
) -> Result<AdaptiveOutcome> {
    run(
        model,
        train,
        eval,
        codec,
        aug_cfg,
        cfg,
        train_cfg,
        objective,
        Targeting::UniformGroup,
    )
}

//! Config-driven experiments: data preparation, method dispatch, multi-seed
//! runs, regularization sweeps, decomposition runs and (m, k) sweeps.
//!
//! Everything is a pure function of the config and the run seeds, so the CLI
//! only handles files and exit codes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive::{adaptive_train, static_gsmote_train, AdaptiveConfig, AdaptiveOutcome};
use crate::augment::{mk_grid, sweep_mk, AugmentConfig, FileBackedCodec, IdentityCodec, LatentCodec, SweepCell};
use crate::data::{
    generate_synthetic, load_csv, oversample_cells, stratified_split, CsvSchema, Dataset, Resampling, SplitSpec,
    SyntheticSpec, TrueConditional,
};
use crate::decomposition::{
    decompose_fairness, DecompositionConfig, DecompositionReport, LossKind, PointDecomposition, SgdLearner, Truth,
};
use crate::error::{Error, Result};
use crate::metrics::{classify_intervention, GroupReport, ParetoVerdict};
use crate::models::{evaluate, train, ModelSpec, Objective, PredictionModel, TrainConfig, TrainOutcome};
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Baseline,
    /// Equal-opportunity regularized loss with `train.reg_weight`.
    Regularized,
    /// g-SMOTE rows for uniformly random groups.
    Gsmote,
    /// g-SMOTE rows for the weakest group.
    AdaptiveGsmote,
    /// Every (group, label) cell duplicated up to the largest cell.
    Oversample,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Regularized => "regularized",
            Method::Gsmote => "gsmote",
            Method::AdaptiveGsmote => "adaptive_gsmote",
            Method::Oversample => "oversample",
        }
    }
}

/// Which parameters a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Checkpoint with the best objective on the eval split.
    #[default]
    BestCheckpoint,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        /// Per-group sizes of separately generated eval and test sets. When
        /// set, the whole generated dataset is the training split.
        #[serde(default)]
        holdout_per_group: Option<Vec<usize>>,
    },
    /// Pre-split CSV files; relative paths resolve against the config file.
    Files {
        train: PathBuf,
        eval: PathBuf,
        test: PathBuf,
        #[serde(default)]
        group_names: Option<Vec<String>>,
        /// Optional `row_id, z_0 ..` latents for the training rows.
        #[serde(default)]
        latents: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub replicates: usize,
    pub loss: LossKind,
    pub resampling: Resampling,
    /// Use observed labels as the truth (noise 0) instead of a posterior.
    pub single_label: bool,
    /// Learner architecture; the top-level model when absent.
    pub model: Option<ModelSpec>,
    /// Learner budget; the top-level training config when absent.
    pub train: Option<TrainConfig>,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            replicates: 41,
            loss: LossKind::ZeroOne,
            resampling: Resampling::Bootstrap,
            single_label: false,
            model: None,
            train: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MkSection {
    pub m: Vec<usize>,
    pub k: Vec<usize>,
}

impl Default for MkSection {
    fn default() -> Self {
        Self {
            m: vec![5, 10, 20],
            k: vec![1, 2, 3],
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_tolerance() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    /// Regularization weights for `sweep`.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Generate a fresh synthetic dataset per run seed.
    #[serde(default)]
    pub data_per_seed: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub sweep_mk: MkSection,
    #[serde(default = "default_tolerance")]
    pub audit_tolerance: f64,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// SHA-256 of the config text.
    #[serde(skip)]
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.hash = sha256_hex(text.as_bytes());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic {
            spec,
            holdout_per_group,
        } = &self.data
        {
            spec.validate()?;
            if let Some(h) = holdout_per_group {
                SyntheticSpec {
                    n_per_group: h.clone(),
                    ..spec.clone()
                }
                .validate()
                .map_err(|_| Error::invalid("holdout_per_group", "expected one positive size per group"))?;
            }
        }
        self.split.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.augment.validate()?;
        self.adaptive.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() {
                return Err(Error::invalid("sweep", "sweep list is empty"));
            }
            if s.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::invalid("sweep", "weights must be finite and non-negative"));
            }
        }
        if self.audit_tolerance.is_nan() || self.audit_tolerance < 0.0 {
            return Err(Error::invalid("audit_tolerance", "must be non-negative"));
        }
        DecompositionConfig {
            replicates: self.decompose.replicates,
            ..Default::default()
        }
        .validate()?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Shifts every run seed by `offset`.
    pub fn offset_seeds(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    /// Toolkit version and config hash, for output headers.
    pub fn provenance_line(&self) -> String {
        format!("fairgap {} config_sha256={}", env!("CARGO_PKG_VERSION"), self.hash)
    }

    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "fairgap",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.hash,
        })
    }
}

/// Train / eval / test splits and, for synthetic data, the label posterior.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub eval: Dataset,
    pub test: Dataset,
    pub conditional: Option<TrueConditional>,
    pub latents: Option<PathBuf>,
}

/// Builds the splits. `run_seed` only matters with `data_per_seed`.
pub fn prepare_data(cfg: &ExperimentConfig, run_seed: u64) -> Result<Splits> {
    match &cfg.data {
        DataSource::Synthetic {
            spec,
            holdout_per_group,
        } => {
            let mut spec = spec.clone();
            let mut split = cfg.split;
            if cfg.data_per_seed {
                spec.seed = rng::derive_seed(spec.seed, "data", run_seed);
                split.seed = rng::derive_seed(split.seed, "split", run_seed);
            }
            let syn = generate_synthetic(&spec)?;
            let (train, eval, test) = match holdout_per_group {
                None => stratified_split(&syn.dataset, &split)?,
                Some(h) => {
                    let held = |tag: &str| {
                        generate_synthetic(&SyntheticSpec {
                            n_per_group: h.clone(),
                            seed: rng::derive_seed(spec.seed, tag, 0),
                            ..spec.clone()
                        })
                        .map(|s| s.dataset)
                    };
                    (syn.dataset.clone(), held("eval")?, held("test")?)
                }
            };
            Ok(Splits {
                train,
                eval,
                test,
                conditional: Some(syn.conditional),
                latents: None,
            })
        }
        DataSource::Files {
            train,
            eval,
            test,
            group_names,
            latents,
        } => {
            let first = load_csv(&cfg.resolve(train), &schema_for(group_names.clone()))?;
            let schema = schema_for(Some(
                group_names.clone().unwrap_or_else(|| first.group_names().to_vec()),
            ));
            Ok(Splits {
                train: load_csv(&cfg.resolve(train), &schema)?,
                eval: load_csv(&cfg.resolve(eval), &schema)?,
                test: load_csv(&cfg.resolve(test), &schema)?,
                conditional: None,
                latents: latents.as_ref().map(|p| cfg.resolve(p)),
            })
        }
    }
}

fn schema_for(names: Option<Vec<String>>) -> CsvSchema {
    match names {
        Some(n) => CsvSchema::default().with_group_names(n),
        None => CsvSchema::default(),
    }
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub reg_weight: f64,
    /// Step of the reported parameters.
    pub step: usize,
    pub eval_report: GroupReport,
    pub test_report: GroupReport,
    pub augmented_rows: usize,
    pub fallbacks: usize,
    pub regularizer_skip_rate: f64,
}

/// Trained model and its result.
#[derive(Debug, Clone)]
pub struct Run {
    pub result: RunResult,
    pub model: PredictionModel,
    pub training: TrainOutcome,
    pub adaptive: Option<AdaptiveOutcome>,
}

fn codec_for(splits: &Splits) -> Result<Box<dyn LatentCodec>> {
    Ok(match &splits.latents {
        Some(p) => Box::new(FileBackedCodec::load(p, &splits.train)?),
        None => Box::new(IdentityCodec),
    })
}

/// Trains `method` on `splits` with run seed `seed` and evaluates on test.
pub fn run_method(cfg: &ExperimentConfig, splits: &Splits, method: Method, reg_weight: f64, seed: u64) -> Result<Run> {
    let train_cfg = TrainConfig {
        seed,
        reg_weight: if method == Method::Regularized { reg_weight } else { 0.0 },
        ..cfg.train.clone()
    };
    let model = cfg.model.build(splits.train.dim(), seed);
    let aug_cfg = AugmentConfig {
        seed: rng::derive_seed(cfg.augment.seed, "augment", seed),
        ..cfg.augment
    };
    let (training, adaptive) = match method {
        Method::Baseline | Method::Regularized => (
            train(model, &splits.train, &splits.eval, &train_cfg, cfg.objective)?,
            None,
        ),
        Method::Oversample => {
            let data = oversample_cells(&splits.train)?;
            (train(model, &data, &splits.eval, &train_cfg, cfg.objective)?, None)
        }
        Method::Gsmote | Method::AdaptiveGsmote => {
            let codec = codec_for(splits)?;
            let f = if method == Method::Gsmote {
                static_gsmote_train
            } else {
                adaptive_train
            };
            let out = f(
                model,
                &splits.train,
                &splits.eval,
                codec.as_ref(),
                &aug_cfg,
                &cfg.adaptive,
                &train_cfg,
                cfg.objective,
            )?;
            (out.training.clone(), Some(out))
        }
    };
    let (model, step) = match cfg.selection {
        Selection::BestCheckpoint => (
            training.best_model(),
            training.best_checkpoint().map_or(train_cfg.steps, |c| c.step),
        ),
        Selection::Final => (training.model.clone(), train_cfg.steps),
    };
    let result = RunResult {
        method,
        seed,
        reg_weight: train_cfg.reg_weight,
        step,
        eval_report: evaluate(&model, &splits.eval)?,
        test_report: evaluate(&model, &splits.test)?,
        augmented_rows: adaptive.as_ref().map_or(0, |a| a.pool.added().len()),
        fallbacks: adaptive.as_ref().map_or(0, |a| a.fallbacks),
        regularizer_skip_rate: training.regularizer_skip_rate(),
    };
    Ok(Run {
        result,
        model,
        training,
        adaptive,
    })
}

/// Per-seed outcome: a run or the error that stopped it.
pub type SeedOutcome = (u64, std::result::Result<Run, String>);

/// Runs `method` for every config seed in parallel, ordered by seed position.
pub fn run_seeds(cfg: &ExperimentConfig, method: Method, reg_weight: f64) -> Result<Vec<SeedOutcome>> {
    let shared = if cfg.data_per_seed {
        None
    } else {
        Some(prepare_data(cfg, 0)?)
    };
    Ok(cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let out = match &shared {
                Some(s) => run_method(cfg, s, method, reg_weight, seed),
                None => prepare_data(cfg, seed).and_then(|s| run_method(cfg, &s, method, reg_weight, seed)),
            };
            (seed, out.map_err(|e| e.to_string()))
        })
        .collect())
}

/// Mean and sample standard deviation over successful seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: stats::mean(values),
            std: stats::stddev(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub reg_weight: f64,
    pub seeds_ok: usize,
    pub failed_seeds: Vec<u64>,
    pub overall_accuracy: MeanStd,
    pub min_group_accuracy: MeanStd,
    pub max_group_accuracy: MeanStd,
    pub min_group_tpr: MeanStd,
    pub max_group_tpr: MeanStd,
    pub deo: MeanStd,
    pub deodds: MeanStd,
    pub group_accuracy: Vec<MeanStd>,
    pub group_names: Vec<String>,
}

pub fn aggregate(method: Method, reg_weight: f64, runs: &[SeedOutcome]) -> AggregateRow {
    let ok: Vec<&RunResult> = runs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().map(|r| &r.result))
        .collect();
    let col = |f: &dyn Fn(&GroupReport) -> Option<f64>| {
        MeanStd::of(&ok.iter().filter_map(|r| f(&r.test_report)).collect::<Vec<_>>())
    };
    let group_names = ok.first().map(|r| r.test_report.group_names()).unwrap_or_default();
    AggregateRow {
        method,
        reg_weight,
        seeds_ok: ok.len(),
        failed_seeds: runs.iter().filter(|(_, r)| r.is_err()).map(|(s, _)| *s).collect(),
        overall_accuracy: col(&|r| Some(r.overall_accuracy)),
        min_group_accuracy: col(&|r| r.min_group_accuracy),
        max_group_accuracy: col(&|r| r.max_group_accuracy),
        min_group_tpr: col(&|r| r.min_group_tpr),
        max_group_tpr: col(&|r| r.max_group_tpr),
        deo: col(&|r| r.max_deo),
        deodds: col(&|r| r.max_deodds),
        group_accuracy: (0..group_names.len()).map(|g| col(&|r| r.groups[g].accuracy)).collect(),
        group_names,
    }
}

fn fmt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite())
        .map_or_else(String::new, |x| format!("{x:.17}"))
}

/// Aggregate table, one row per (method, reg_weight).
pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], mut w: W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    let names = rows.first().map(|r| r.group_names.clone()).unwrap_or_default();
    let mut header = vec![
        "method".to_string(),
        "reg_weight".into(),
        "seeds_ok".into(),
        "failed_seeds".into(),
    ];
    for m in [
        "overall_accuracy",
        "min_group_accuracy",
        "max_group_accuracy",
        "min_group_tpr",
        "max_group_tpr",
        "deo",
        "deodds",
    ] {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    for n in &names {
        header.push(format!("accuracy_{n}_mean"));
        header.push(format!("accuracy_{n}_std"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let failed: Vec<String> = r.failed_seeds.iter().map(u64::to_string).collect();
        let mut line = vec![
            r.method.name().to_string(),
            format!("{}", r.reg_weight),
            r.seeds_ok.to_string(),
            failed.join(";"),
        ];
        for m in [
            r.overall_accuracy,
            r.min_group_accuracy,
            r.max_group_accuracy,
            r.min_group_tpr,
            r.max_group_tpr,
            r.deo,
            r.deodds,
        ]
        .iter()
        .chain(&r.group_accuracy)
        {
            line.push(fmt(m.mean));
            line.push(fmt(m.std));
        }
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Sorted by ascending weight.
    pub rows: Vec<AggregateRow>,
    /// `runs[i]` belongs to `rows[i]`.
    pub runs: Vec<Vec<SeedOutcome>>,
    /// Spearman correlation of weight with mean DEO; absent when undefined.
    pub spearman_deo: Option<f64>,
    pub spearman_min_group_accuracy: Option<f64>,
}

impl SweepResult {
    /// Per-seed verdict of the largest weight against weight 0, when both ran.
    pub fn verdicts(&self, tolerance: f64) -> Result<Vec<(u64, ParetoVerdict)>> {
        let (Some(first), Some(last)) = (self.runs.first(), self.runs.last()) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for ((seed, base), (_, inter)) in first.iter().zip(last) {
            if let (Ok(b), Ok(i)) = (base, inter) {
                out.push((
                    *seed,
                    classify_intervention(&b.result.test_report, &i.result.test_report, tolerance)?,
                ));
            }
        }
        Ok(out)
    }
}

/// Regularized runs for every sweep weight and seed.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut weights = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::invalid("sweep", "no sweep weights configured"))?;
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &w in &weights {
        let r = run_seeds(cfg, Method::Regularized, w)?;
        rows.push(aggregate(Method::Regularized, w, &r));
        runs.push(r);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.reg_weight).collect();
    let col = |f: fn(&AggregateRow) -> Option<f64>| -> Option<Vec<f64>> { rows.iter().map(f).collect() };
    let spearman_deo = col(|r| r.deo.mean).and_then(|y| stats::spearman(&xs, &y));
    let spearman_min_group_accuracy = col(|r| r.min_group_accuracy.mean).and_then(|y| stats::spearman(&xs, &y));
    Ok(SweepResult {
        rows,
        runs,
        spearman_deo,
        spearman_min_group_accuracy,
    })
}

/// Decomposition of one run seed: learners are trained on resamples of the
/// train split and evaluated on the test split.
pub fn run_decomposition(
    cfg: &ExperimentConfig,
    seed: u64,
    model_override: Option<ModelSpec>,
) -> Result<(DecompositionReport, Vec<PointDecomposition>)> {
    let splits = prepare_data(cfg, seed)?;
    let truth = Truth::new(splits.conditional.clone(), cfg.decompose.single_label)?;
    let learner = SgdLearner {
        model: model_override.or(cfg.decompose.model).unwrap_or(cfg.model),
        train: cfg.decompose.train.clone().unwrap_or_else(|| cfg.train.clone()),
    };
    learner.model.validate()?;
    learner.train.validate()?;
    let dcfg = DecompositionConfig {
        replicates: cfg.decompose.replicates,
        loss: cfg.decompose.loss,
        resampling: cfg.decompose.resampling,
        seed,
    };
    decompose_fairness(&splits.test, &truth, &learner, &splits.train, &dcfg)
}

/// Min-group test accuracy of adaptive g-SMOTE over the configured (m, k) grid.
pub fn run_sweep_mk(cfg: &ExperimentConfig, method: Method) -> Result<Vec<SweepCell>> {
    let shared = if cfg.data_per_seed {
        None
    } else {
        Some(prepare_data(cfg, 0)?)
    };
    let grid = mk_grid(&cfg.sweep_mk.m, &cfg.sweep_mk.k);
    Ok(sweep_mk(&grid, &cfg.seeds, &cfg.augment, |aug, seed| {
        let mut c = cfg.clone();
        c.augment = *aug;
        let run = match &shared {
            Some(s) => run_method(&c, s, method, 0.0, seed)?,
            None => run_method(&c, &prepare_data(cfg, seed)?, method, 0.0, seed)?,
        };
        run.result
            .test_report
            .min_group_accuracy
            .ok_or(Error::EmptyGroup { group: 0 })
    }))
}

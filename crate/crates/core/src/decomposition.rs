//! Monte-Carlo bias / variance / noise decomposition of the expected loss,
//! per point and per group, and the expected fairness violation built from it.
//!
//! For a test point `x` with label posterior `p = P(Y = 1 | x)`, models
//! `f_1 .. f_R` trained on resampled training sets give
//!
//! * optimal prediction `y*` and noise `N = E_y L(y, y*)`,
//! * main prediction `y_m` (mean for squared loss, majority vote otherwise),
//! * bias `B = L(y*, y_m)` and variance `V = mean_r L(y_m, f_r(x))`,
//! * error `err = mean_r E_y L(y, f_r(x))`.
//!
//! For squared loss `err = N + B + V`. For zero-one loss
//! `err = c1 N + B + c2 V` with `c2 = +1` if `y_m = y*` else `-1` and
//! `c1 = 2 P(f = y*) - 1`. Both identities hold exactly for the empirical
//! distribution over replicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Resampling, TrueConditional};
use crate::error::{Error, Result};
use crate::models::{sgd_fit, ModelSpec, Scorer, TrainConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    #[default]
    ZeroOne,
    /// Zero-one loss restricted to points whose observed label is 1.
    FalseNegativeRate,
}

impl LossKind {
    fn is_squared(self) -> bool {
        self == LossKind::Squared
    }
}

/// Source of the label distribution at a test point.
#[derive(Debug, Clone)]
pub enum Truth {
    Conditional(TrueConditional),
    /// One observed label per point: `y*` is that label and the noise is 0.
    SingleLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    Conditional,
    SingleLabel,
}

impl Truth {
    pub fn new(conditional: Option<TrueConditional>, single_label: bool) -> Result<Self> {
        match (conditional, single_label) {
            (_, true) => Ok(Truth::SingleLabel),
            (Some(c), false) => Ok(Truth::Conditional(c)),
            (None, false) => Err(Error::MissingConditional),
        }
    }

    pub fn mode(&self) -> TruthMode {
        match self {
            Truth::Conditional(_) => TruthMode::Conditional,
            Truth::SingleLabel => TruthMode::SingleLabel,
        }
    }

    /// `P(Y = 1)` at the point.
    pub fn p_one(&self, x: &[f64], group: usize, y_obs: u8) -> f64 {
        match self {
            Truth::Conditional(c) => c.prob(x, group),
            Truth::SingleLabel => f64::from(y_obs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPrediction {
    pub y_star: f64,
    pub noise: f64,
}

/// Loss-minimizing prediction under `P(Y = 1) = p_one` and its expected loss.
pub fn optimal_prediction(p_one: f64, loss: LossKind) -> OptimalPrediction {
    if loss.is_squared() {
        OptimalPrediction {
            y_star: p_one,
            noise: p_one * (1.0 - p_one),
        }
    } else if p_one >= 0.5 {
        OptimalPrediction {
            y_star: 1.0,
            noise: 1.0 - p_one,
        }
    } else {
        OptimalPrediction {
            y_star: 0.0,
            noise: p_one,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainPrediction {
    pub value: f64,
    /// The vote was split evenly and resolved to 1.
    pub tie: bool,
}

fn hard(score: f64) -> f64 {
    if score >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Mean of the scores (squared loss) or majority vote of the thresholded
/// scores, ties to 1.
pub fn main_prediction(scores: &[f64], loss: LossKind) -> Result<MainPrediction> {
    if scores.is_empty() {
        return Err(Error::invalid(
            "replicates",
            "main prediction needs at least one replicate",
        ));
    }
    let r = scores.len() as f64;
    if loss.is_squared() {
        return Ok(MainPrediction {
            value: scores.iter().sum::<f64>() / r,
            tie: false,
        });
    }
    let ones = scores.iter().filter(|&&s| s >= 0.5).count();
    let zeros = scores.len() - ones;
    Ok(MainPrediction {
        value: if ones >= zeros { 1.0 } else { 0.0 },
        tie: ones == zeros,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDecomposition {
    /// Row id in the test set.
    pub row: usize,
    pub group: usize,
    pub y_obs: u8,
    pub p_one: f64,
    pub y_star: f64,
    pub y_main: f64,
    pub noise: f64,
    pub bias: f64,
    pub variance: f64,
    pub c1: f64,
    pub c2: f64,
    pub err: f64,
    pub replicate_count: usize,
    pub main_tie: bool,
}

impl PointDecomposition {
    /// `c1 N + B + c2 V`, which equals `err`.
    pub fn reconstructed(&self) -> f64 {
        self.c1 * self.noise + self.bias + self.c2 * self.variance
    }
}

/// Decomposes one point from its replicate scores.
pub fn decompose_scores(p_one: f64, scores: &[f64], loss: LossKind) -> Result<PointDecomposition> {
    let opt = optimal_prediction(p_one, loss);
    let main = main_prediction(scores, loss)?;
    let r = scores.len() as f64;
    let mut d = PointDecomposition {
        row: 0,
        group: 0,
        y_obs: 0,
        p_one,
        y_star: opt.y_star,
        y_main: main.value,
        noise: opt.noise,
        bias: 0.0,
        variance: 0.0,
        c1: 1.0,
        c2: 1.0,
        err: 0.0,
        replicate_count: scores.len(),
        main_tie: main.tie,
    };
    if loss.is_squared() {
        d.bias = (opt.y_star - main.value).powi(2);
        d.variance = scores.iter().map(|&f| (f - main.value).powi(2)).sum::<f64>() / r;
        d.err = scores
            .iter()
            .map(|&f| p_one * (1.0 - f).powi(2) + (1.0 - p_one) * f * f)
            .sum::<f64>()
            / r;
    } else {
        let preds: Vec<f64> = scores.iter().map(|&s| hard(s)).collect();
        d.bias = f64::from(u8::from(opt.y_star != main.value));
        d.variance = preds.iter().filter(|&&f| f != main.value).count() as f64 / r;
        let hit = preds.iter().filter(|&&f| f == opt.y_star).count() as f64 / r;
        d.c1 = 2.0 * hit - 1.0;
        d.c2 = if main.value == opt.y_star { 1.0 } else { -1.0 };
        d.err = preds
            .iter()
            .map(|&f| if f == 1.0 { 1.0 - p_one } else { p_one })
            .sum::<f64>()
            / r;
    }
    Ok(d)
}

/// Fits a scorer to a training set. Implementations must be deterministic in
/// `(data, seed)`.
pub trait Learner: Sync {
    fn fit(&self, data: &Dataset, seed: u64) -> Result<Box<dyn Scorer>>;
}

impl<F> Learner for F
where
    F: Fn(&Dataset, u64) -> Result<Box<dyn Scorer>> + Sync,
{
    fn fit(&self, data: &Dataset, seed: u64) -> Result<Box<dyn Scorer>> {
        self(data, seed)
    }
}

/// Momentum SGD with a fixed budget; the replicate seed drives both the
/// initialization and the batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdLearner {
    pub model: ModelSpec,
    pub train: TrainConfig,
}

impl Learner for SgdLearner {
    fn fit(&self, data: &Dataset, seed: u64) -> Result<Box<dyn Scorer>> {
        let cfg = TrainConfig {
            seed,
            ..self.train.clone()
        };
        let model = sgd_fit(self.model.build(data.dim(), seed), data, &cfg)?;
        Ok(Box::new(model))
    }
}

/// Scores of every replicate on every test row, `scores[r][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateScores {
    pub scores: Vec<Vec<f64>>,
    pub attempted: usize,
    /// Replicate indices whose training diverged.
    pub failed: Vec<usize>,
}

impl ReplicateScores {
    fn column(&self, i: usize) -> Vec<f64> {
        self.scores.iter().map(|s| s[i]).collect()
    }
}

/// Trains one model per training set (in parallel) and scores `test`.
/// Diverged replicates are skipped; fewer than half succeeding is an error.
pub fn replicate_scores(
    test: &Dataset,
    learner: &dyn Learner,
    training_sets: &[(Dataset, u64)],
) -> Result<ReplicateScores> {
    let results: Vec<Result<Option<Vec<f64>>>> = training_sets
        .par_iter()
        .map(|(data, seed)| match learner.fit(data, *seed) {
            Ok(scorer) => Ok(Some(test.rows().map(|x| scorer.score(x)).collect())),
            Err(Error::Divergence { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut scores = Vec::new();
    let mut failed = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res? {
            Some(s) => scores.push(s),
            None => failed.push(r),
        }
    }
    let attempted = training_sets.len();
    if attempted == 0 || 2 * scores.len() < attempted {
        return Err(Error::Replicates {
            succeeded: scores.len(),
            attempted,
        });
    }
    Ok(ReplicateScores {
        scores,
        attempted,
        failed,
    })
}

/// Point decompositions for every test row the loss applies to.
pub fn decompose_points(
    test: &Dataset,
    truth: &Truth,
    replicates: &ReplicateScores,
    loss: LossKind,
) -> Result<Vec<PointDecomposition>> {
    let mut out = Vec::new();
    for i in 0..test.len() {
        let y_obs = test.label(i);
        if loss == LossKind::FalseNegativeRate && y_obs != 1 {
            continue;
        }
        let p_one = truth.p_one(test.row(i), test.group(i), y_obs);
        let mut d = decompose_scores(p_one, &replicates.column(i), loss)?;
        d.row = i;
        d.group = test.group(i);
        d.y_obs = y_obs;
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Bias plus noise exceed variance.
    BiasNoise,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDecomposition {
    pub group: usize,
    pub name: String,
    pub points: usize,
    /// Mean of `c1 N`.
    pub noise: f64,
    pub bias: f64,
    /// Mean of `c2 V`; can be negative.
    pub variance: f64,
    pub noise_raw: f64,
    pub variance_raw: f64,
    pub mean_error: f64,
    /// `(bias + noise_raw) / variance_raw`; absent when the variance is 0.
    pub regime_ratio: Option<f64>,
    pub regime: Regime,
}

impl GroupDecomposition {
    /// `N_G + B_G + V_G`, equal to the mean error.
    pub fn total(&self) -> f64 {
        self.noise + self.bias + self.variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFairness {
    pub a: usize,
    pub b: usize,
    pub label: String,
    /// `|(N_a + B_a + V_a) - (N_b + B_b + V_b)|`.
    pub e_fair: f64,
    /// `|V_a - V_b|`, the high-capacity approximation of `e_fair`.
    pub variance_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub replicates: usize,
    pub loss: LossKind,
    pub resampling: Resampling,
    pub seed: u64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            replicates: 41,
            loss: LossKind::ZeroOne,
            resampling: Resampling::Bootstrap,
            seed: 0,
        }
    }
}

impl DecompositionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::invalid("replicates", "at least 2 replicates are required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub loss: LossKind,
    pub truth: TruthMode,
    pub resampling: String,
    pub seed: u64,
    pub replicates_attempted: usize,
    pub replicates_succeeded: usize,
    pub failed_replicates: Vec<usize>,
    /// Points whose main prediction came from an even split.
    pub main_prediction_ties: usize,
    /// Largest `|err - (c1 N + B + c2 V)|` over points.
    pub identity_max_residual: f64,
    pub groups: Vec<GroupDecomposition>,
    pub pairs: Vec<PairFairness>,
    /// Present for exactly two groups.
    pub e_fair: Option<f64>,
    pub variance_gap: Option<f64>,
}

impl DecompositionReport {
    pub fn group(&self, g: usize) -> Option<&GroupDecomposition> {
        self.groups.iter().find(|d| d.group == g)
    }
}

/// Per-group means and pairwise fairness split from point decompositions.
pub fn aggregate(
    points: &[PointDecomposition],
    group_names: &[String],
    loss: LossKind,
) -> Result<(Vec<GroupDecomposition>, Vec<PairFairness>)> {
    let mut groups = Vec::with_capacity(group_names.len());
    for (g, name) in group_names.iter().enumerate() {
        let members: Vec<&PointDecomposition> = points.iter().filter(|p| p.group == g).collect();
        if members.is_empty() {
            return Err(match loss {
                LossKind::FalseNegativeRate => Error::DegenerateGroup { group: g },
                _ => Error::EmptyGroup { group: g },
            });
        }
        let n = members.len() as f64;
        let mean = |f: &dyn Fn(&PointDecomposition) -> f64| members.iter().map(|p| f(p)).sum::<f64>() / n;
        let bias = mean(&|p| p.bias);
        let noise_raw = mean(&|p| p.noise);
        let variance_raw = mean(&|p| p.variance);
        groups.push(GroupDecomposition {
            group: g,
            name: name.clone(),
            points: members.len(),
            noise: mean(&|p| p.c1 * p.noise),
            bias,
            variance: mean(&|p| p.c2 * p.variance),
            noise_raw,
            variance_raw,
            mean_error: mean(&|p| p.err),
            regime_ratio: (variance_raw > 0.0).then(|| (bias + noise_raw) / variance_raw),
            regime: if bias + noise_raw > variance_raw {
                Regime::BiasNoise
            } else {
                Regime::Variance
            },
        });
    }
    let mut pairs = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            pairs.push(PairFairness {
                a,
                b,
                label: format!("{} vs {}", group_names[a], group_names[b]),
                e_fair: (groups[a].total() - groups[b].total()).abs(),
                variance_gap: (groups[a].variance - groups[b].variance).abs(),
            });
        }
    }
    Ok((groups, pairs))
}

/// Builds a report from precomputed replicate scores.
pub fn report_from_scores(
    test: &Dataset,
    truth: &Truth,
    replicates: &ReplicateScores,
    cfg: &DecompositionConfig,
) -> Result<(DecompositionReport, Vec<PointDecomposition>)> {
    let points = decompose_points(test, truth, replicates, cfg.loss)?;
    let (groups, pairs) = aggregate(&points, test.group_names(), cfg.loss)?;
    let two = pairs.len() == 1;
    let report = DecompositionReport {
        loss: cfg.loss,
        truth: truth.mode(),
        resampling: cfg.resampling.describe(),
        seed: cfg.seed,
        replicates_attempted: replicates.attempted,
        replicates_succeeded: replicates.scores.len(),
        failed_replicates: replicates.failed.clone(),
        main_prediction_ties: points.iter().filter(|p| p.main_tie).count(),
        identity_max_residual: points
            .iter()
            .map(|p| (p.err - p.reconstructed()).abs())
            .fold(0.0, f64::max),
        e_fair: two.then(|| pairs[0].e_fair),
        variance_gap: two.then(|| pairs[0].variance_gap),
        groups,
        pairs,
    };
    Ok((report, points))
}

/// Resampled training sets with their learner seeds, in replicate order.
pub fn training_sets(base: &Dataset, cfg: &DecompositionConfig) -> Result<Vec<(Dataset, u64)>> {
    (0..cfg.replicates as u64)
        .map(|r| {
            let data = cfg
                .resampling
                .apply(base, rng::derive_seed(cfg.seed, "replicate-data", r))?;
            Ok((data, rng::derive_seed(cfg.seed, "replicate-fit", r)))
        })
        .collect()
}

/// Estimates the decomposition on `test` from `cfg.replicates` models trained
/// on resamples of `base`.
pub fn decompose_fairness(
    test: &Dataset,
    truth: &Truth,
    learner: &dyn Learner,
    base: &Dataset,
    cfg: &DecompositionConfig,
) -> Result<(DecompositionReport, Vec<PointDecomposition>)> {
    cfg.validate()?;
    if test.dim() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: test.dim(),
        });
    }
    let sets = training_sets(base, cfg)?;
    let replicates = replicate_scores(test, learner, &sets)?;
    report_from_scores(test, truth, &replicates, cfg)
}

/// Decomposition of a single point.
#[allow(clippy::too_many_arguments)]
pub fn decompose_point(
    x: &[f64],
    group: usize,
    y_obs: u8,
    truth: &Truth,
    learner: &dyn Learner,
    base: &Dataset,
    cfg: &DecompositionConfig,
) -> Result<PointDecomposition> {
    cfg.validate()?;
    let point = Dataset::from_flat(
        x.to_vec(),
        x.len(),
        vec![y_obs],
        vec![0],
        vec![base.group_names().get(group).cloned().unwrap_or_default()],
    )?;
    let sets = training_sets(base, cfg)?;
    let replicates = replicate_scores(&point, learner, &sets)?;
    let p_one = truth.p_one(x, group, y_obs);
    let mut d = decompose_scores(p_one, &replicates.column(0), cfg.loss)?;
    d.group = group;
    d.y_obs = y_obs;
    Ok(d)
}

/// Per-point CSV for plotting.
pub fn write_points_csv<W: std::io::Write>(
    points: &[PointDecomposition],
    mut w: W,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    for p in points {
        csv.serialize(p)?;
    }
    csv.flush()?;
    Ok(())
}

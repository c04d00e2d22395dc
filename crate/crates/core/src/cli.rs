//! Command-line front end. Each subcommand reads an experiment config, runs
//! the matching library pipeline and writes CSV/JSON artifacts under the
//! output directory. Every artifact carries the toolkit version and the
//! config hash.
//!
//! Exit codes: 0 success, 2 validation error, 3 audit failure, 4 runtime error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::adaptive::GroupMode;
use crate::augment::write_sweep_csv;
use crate::data::{load_csv, save_csv, CsvSchema, DatasetMetadata};
use crate::decomposition::{write_points_csv, DecompositionReport, LossKind};
use crate::error::{Error, Result};
use crate::experiment::{
    aggregate, prepare_data, run_decomposition, run_seeds, run_sweep, run_sweep_mk, sha256_hex, write_aggregate_csv,
    DataSource, ExperimentConfig, Method,
};
use crate::metrics::{classify_intervention, GroupReport, ParetoVerdict};
use crate::models::{evaluate, ModelSpec, PredictionModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fairgap",
    version,
    about = "Fairness metrics, decompositions and interventions for small classifiers"
)]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for seeds, replicates and sweep cells.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Added to every configured run seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed_offset: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/eval/test CSVs and a metadata sidecar.
    Generate,
    /// Train the configured method for every seed.
    Train(TrainArgs),
    /// Score a saved model on a dataset CSV.
    Evaluate(EvaluateArgs),
    /// Bias-variance-noise decomposition of per-group error.
    Decompose(DecomposeArgs),
    /// Regularization-weight sweep.
    Sweep,
    /// Compare an intervention report against a baseline report.
    Audit(AuditArgs),
    /// Min-group accuracy over a grid of g-SMOTE (m, k) values.
    SweepMk(SweepMkArgs),
}

#[derive(Debug, Default, Args)]
pub struct AugmentArgs {
    /// Neighbour pool size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Neighbours per simplex.
    #[arg(long)]
    pub k: Option<usize>,
    /// Whether the seed point is a simplex vertex.
    #[arg(long)]
    pub include_seed: Option<bool>,
    /// Probability that a batch comes from the original training set.
    #[arg(long)]
    pub mix_prob: Option<f64>,
    /// Synthetic rows added per evaluation.
    #[arg(long)]
    pub augment_batch: Option<usize>,
    /// `protected_only` or `protected_x_label`.
    #[arg(long, value_parser = parse_name::<GroupMode>)]
    pub group_mode: Option<GroupMode>,
}

#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// baseline, regularized, gsmote, adaptive_gsmote or oversample.
    #[arg(long, value_parser = parse_name::<Method>)]
    pub method: Option<Method>,
    /// Equal-opportunity regularizer weight (method `regularized`).
    #[arg(long)]
    pub reg_weight: Option<f64>,
    #[command(flatten)]
    pub augment: AugmentArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Group names in id order; first-appearance order when omitted.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
}

#[derive(Debug, Default, Args)]
pub struct DecomposeArgs {
    /// Learner architecture override: `logistic` or `mlp`.
    #[arg(long, value_parser = ["logistic", "mlp"])]
    pub learner: Option<String>,
    /// Hidden width for `--learner mlp`.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// `squared`, `zero_one` or `false_negative_rate`.
    #[arg(long, value_parser = parse_name::<LossKind>)]
    pub loss: Option<LossKind>,
    /// Use observed labels as the truth.
    #[arg(long)]
    pub single_label: bool,
    /// Also write per-point CSVs.
    #[arg(long)]
    pub points: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Baseline report JSON (a group report or a `train` run report).
    pub baseline: PathBuf,
    /// Intervention report JSON.
    pub intervention: PathBuf,
    /// Accuracy change treated as no change; the config value or 0.001.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SweepMkArgs {
    /// Comma-separated neighbour pool sizes.
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// Comma-separated simplex neighbour counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// `gsmote` or `adaptive_gsmote` (default).
    #[arg(long, value_parser = parse_name::<Method>)]
    pub method: Option<Method>,
    #[arg(long)]
    pub include_seed: Option<bool>,
}

/// Parses a snake_case enum name through its serde representation.
fn parse_name<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingColumn(_)
        | Error::Parse { .. }
        | Error::EmptyDataset
        | Error::Invalid { .. }
        | Error::Stratification { .. }
        | Error::DimensionMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::GroupMismatch { .. }
        | Error::MissingConditional
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Toml(_) => EXIT_INVALID,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

/// Parses arguments from the process and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_INVALID;
        }
        // Fails only when a global pool already exists, e.g. in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Generate => cmd_generate(cli),
        Command::Train(a) => cmd_train(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Decompose(a) => cmd_decompose(cli, a),
        Command::Sweep => cmd_sweep(cli),
        Command::Audit(a) => cmd_audit(cli, a),
        Command::SweepMk(a) => cmd_sweep_mk(cli, a),
    }
}

/// Version and hash stamped into outputs.
struct Provenance {
    line: String,
    json: serde_json::Value,
}

impl Provenance {
    fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            line: cfg.provenance_line(),
            json: cfg.provenance(),
        }
    }

    /// For commands without a config: hashes the named inputs instead.
    fn of_inputs(inputs: &[&Path]) -> Result<Self> {
        let mut text = String::new();
        for p in inputs {
            text.push_str(&sha256_hex(&fs::read(p)?));
        }
        let hash = sha256_hex(text.as_bytes());
        Ok(Self {
            line: format!("fairgap {} inputs_sha256={hash}", env!("CARGO_PKG_VERSION")),
            json: serde_json::json!({
                "tool": "fairgap",
                "version": env!("CARGO_PKG_VERSION"),
                "inputs_sha256": hash,
            }),
        })
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::invalid("config", "this command needs --config"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.offset_seeds(cli.seed_offset);
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = match (&cli.out, cfg.and_then(|c| c.out_dir.as_ref().map(|d| c.resolve(d)))) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => d,
        (None, None) => PathBuf::from("fairgap-out"),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Writes `value` as pretty JSON with a `provenance` member added.
fn write_json<T: Serialize>(path: &Path, value: &T, prov: &Provenance) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("provenance".into(), prov.json.clone());
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

fn cmd_generate(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let DataSource::Synthetic { spec, .. } = &cfg.data else {
        return Err(Error::invalid("data.kind", "generate needs a synthetic data section"));
    };
    let prov = Provenance::of(&cfg);
    let dir = out_dir(cli, Some(&cfg))?;
    let splits = prepare_data(&cfg, cfg.seeds[0])?;
    for (name, ds) in [("train", &splits.train), ("eval", &splits.eval), ("test", &splits.test)] {
        save_csv(ds, &dir.join(format!("{name}.csv")), Some(&prov.line))?;
        println!("{name}: {} rows", ds.len());
    }
    DatasetMetadata {
        group_names: splits.train.group_names().to_vec(),
        seed: Some(spec.seed),
        spec: serde_json::to_value(&cfg.data)?,
        provenance: Some(prov.json.clone()),
    }
    .save(&dir.join("metadata.json"))?;
    Ok(EXIT_OK)
}

fn apply_train_args(cfg: &mut ExperimentConfig, a: &TrainArgs) -> Result<()> {
    if let Some(m) = a.method {
        cfg.method = m;
    }
    if let Some(w) = a.reg_weight {
        cfg.train.reg_weight = w;
    }
    let g = &a.augment;
    if let Some(m) = g.m {
        cfg.augment.m = m;
    }
    if let Some(k) = g.k {
        cfg.augment.k = k;
    }
    if let Some(s) = g.include_seed {
        cfg.augment.include_seed = s;
    }
    if let Some(p) = g.mix_prob {
        cfg.adaptive.mix_prob = p;
    }
    if let Some(b) = g.augment_batch {
        cfg.adaptive.augment_batch = Some(b);
    }
    if let Some(mode) = g.group_mode {
        cfg.adaptive.group_mode = mode;
    }
    cfg.validate()
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<i32> {
    let mut cfg = load_config(cli)?;
    apply_train_args(&mut cfg, a)?;
    let prov = Provenance::of(&cfg);
    let dir = out_dir(cli, Some(&cfg))?;
    let weight = cfg.train.reg_weight;
    let runs = run_seeds(&cfg, cfg.method, weight)?;
    for (seed, run) in &runs {
        let seed_dir = dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&seed_dir)?;
        match run {
            Ok(run) => {
                write_json(&seed_dir.join("model.json"), &run.model, &prov)?;
                write_json(&seed_dir.join("report.json"), &run.result, &prov)?;
                let mut w = create(&seed_dir.join("checkpoints.csv"))?;
                run.training.write_checkpoint_log(&mut w, Some(&prov.line))?;
                w.flush()?;
                if let Some(ad) = &run.adaptive {
                    let mut w = create(&seed_dir.join("pool.csv"))?;
                    ad.pool.write_log(&mut w, Some(&prov.line))?;
                    w.flush()?;
                }
                let r = &run.result.test_report;
                println!(
                    "seed {seed}: accuracy {:.4}  min-group {}  DEO {}  DEOdds {}",
                    r.overall_accuracy,
                    fmt_opt(r.min_group_accuracy),
                    fmt_opt(r.max_deo),
                    fmt_opt(r.max_deodds)
                );
            }
            Err(e) => {
                fs::write(seed_dir.join("error.txt"), format!("{e}\n"))?;
                eprintln!("seed {seed}: failed: {e}");
            }
        }
    }
    let row = aggregate(cfg.method, weight, &runs);
    let mut w = create(&dir.join("aggregate.csv"))?;
    write_aggregate_csv(std::slice::from_ref(&row), &mut w, Some(&prov.line))?;
    w.flush()?;
    if row.seeds_ok == 0 {
        eprintln!("error: every seed failed");
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<i32> {
    let model = PredictionModel::load_json(&a.model)?;
    let schema = match &a.groups {
        Some(g) => CsvSchema::default().with_group_names(g.clone()),
        None => CsvSchema::default(),
    };
    let ds = load_csv(&a.data, &schema)?;
    let prov = Provenance::of_inputs(&[&a.model, &a.data])?;
    let report = evaluate(&model, &ds)?;
    let dir = out_dir(cli, None)?;
    write_json(&dir.join("report.json"), &report, &prov)?;
    print_report(&report);
    Ok(EXIT_OK)
}

fn print_report(r: &GroupReport) {
    println!("{:<16} {:>8} {:>10} {:>8}", "group", "n", "accuracy", "tpr");
    for g in &r.groups {
        println!(
            "{:<16} {:>8} {:>10} {:>8}",
            g.name,
            g.size,
            fmt_opt(g.accuracy),
            fmt_opt(g.tpr)
        );
    }
    println!(
        "overall accuracy {:.4}  min-group accuracy {}  DEO {}  DEOdds {}",
        r.overall_accuracy,
        fmt_opt(r.min_group_accuracy),
        fmt_opt(r.max_deo),
        fmt_opt(r.max_deodds)
    );
}

fn cmd_decompose(cli: &Cli, a: &DecomposeArgs) -> Result<i32> {
    let mut cfg = load_config(cli)?;
    if let Some(r) = a.replicates {
        cfg.decompose.replicates = r;
    }
    if let Some(l) = a.loss {
        cfg.decompose.loss = l;
    }
    if a.single_label {
        cfg.decompose.single_label = true;
    }
    cfg.validate()?;
    let learner = match a.learner.as_deref() {
        None => {
            if a.hidden.is_some() {
                return Err(Error::invalid("hidden", "needs --learner mlp"));
            }
            None
        }
        Some("logistic") => Some(ModelSpec::Logistic),
        Some(_) => Some(ModelSpec::Mlp {
            hidden: a.hidden.unwrap_or(match cfg.model {
                ModelSpec::Mlp { hidden } => hidden,
                ModelSpec::Logistic => 16,
            }),
        }),
    };
    let prov = Provenance::of(&cfg);
    let dir = out_dir(cli, Some(&cfg))?;
    for &seed in &cfg.seeds {
        let (report, points) = run_decomposition(&cfg, seed, learner)?;
        write_json(&dir.join(format!("decomposition_seed_{seed}.json")), &report, &prov)?;
        if a.points {
            let mut w = create(&dir.join(format!("points_seed_{seed}.csv")))?;
            write_points_csv(&points, &mut w, Some(&prov.line))?;
            w.flush()?;
        }
        println!("seed {seed}");
        print_decomposition(&report);
        if report.loss == LossKind::Squared {
            let worst = squared_identity_gap(&report);
            println!("  squared-loss check: max |err - (N + B + V)| = {worst:.3e}");
            if worst > 1e-9 {
                return Err(Error::invalid("decomposition", "squared-loss identity violated"));
            }
        }
    }
    Ok(EXIT_OK)
}

/// Largest per-group gap between mean error and `N + B + V`.
fn squared_identity_gap(report: &DecompositionReport) -> f64 {
    report
        .groups
        .iter()
        .map(|g| (g.mean_error - (g.noise + g.bias + g.variance)).abs())
        .fold(0.0, f64::max)
}

fn print_decomposition(r: &DecompositionReport) {
    println!(
        "  {:<12} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}  regime",
        "group", "points", "noise", "bias", "variance", "error", "(B+N)/V"
    );
    for g in &r.groups {
        println!(
            "  {:<12} {:>6} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9}  {:?}",
            g.name,
            g.points,
            g.noise,
            g.bias,
            g.variance,
            g.mean_error,
            g.regime_ratio.map_or_else(|| "inf".to_string(), |x| format!("{x:.3}")),
            g.regime
        );
    }
    if let (Some(e), Some(v)) = (r.e_fair, r.variance_gap) {
        println!("  E_fair {e:.5}  |V_A - V_B| {v:.5}");
    }
    if !r.failed_replicates.is_empty() {
        println!(
            "  {} of {} replicates failed",
            r.failed_replicates.len(),
            r.replicates_attempted
        );
    }
}

#[derive(Serialize)]
struct SweepSummary {
    weights: Vec<f64>,
    spearman_deo: Option<f64>,
    spearman_min_group_accuracy: Option<f64>,
    /// Largest weight against weight 0, per seed.
    verdicts: Vec<SeedVerdict>,
}

#[derive(Serialize)]
struct SeedVerdict {
    seed: u64,
    verdict: ParetoVerdict,
}

fn cmd_sweep(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let prov = Provenance::of(&cfg);
    let dir = out_dir(cli, Some(&cfg))?;
    let sweep = run_sweep(&cfg)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    write_aggregate_csv(&sweep.rows, &mut w, Some(&prov.line))?;
    w.flush()?;
    let summary = SweepSummary {
        weights: sweep.rows.iter().map(|r| r.reg_weight).collect(),
        spearman_deo: sweep.spearman_deo,
        spearman_min_group_accuracy: sweep.spearman_min_group_accuracy,
        verdicts: sweep
            .verdicts(cfg.audit_tolerance)?
            .into_iter()
            .map(|(seed, verdict)| SeedVerdict { seed, verdict })
            .collect(),
    };
    write_json(&dir.join("sweep_summary.json"), &summary, &prov)?;
    println!(
        "{:>10} {:>10} {:>10} {:>10}",
        "reg_weight", "accuracy", "min-group", "DEO"
    );
    for r in &sweep.rows {
        println!(
            "{:>10} {:>10} {:>10} {:>10}",
            r.reg_weight,
            fmt_opt(r.overall_accuracy.mean),
            fmt_opt(r.min_group_accuracy.mean),
            fmt_opt(r.deo.mean)
        );
    }
    let show = |v: Option<f64>| {
        v.map_or_else(
            || "undefined (fewer than two distinct points)".into(),
            |x| format!("{x:.3}"),
        )
    };
    println!("spearman(reg_weight, DEO) = {}", show(summary.spearman_deo));
    println!(
        "spearman(reg_weight, min-group accuracy) = {}",
        show(summary.spearman_min_group_accuracy)
    );
    Ok(EXIT_OK)
}

/// Reads a group report, accepting a `train` run report in its place.
pub fn read_report(path: &Path) -> Result<GroupReport> {
    let mut v: serde_json::Value = serde_json::from_reader(File::open(path)?)?;
    if let Some(inner) = v.get_mut("test_report") {
        v = inner.take();
    }
    Ok(serde_json::from_value(v)?)
}

fn cmd_audit(cli: &Cli, a: &AuditArgs) -> Result<i32> {
    let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
    let tolerance = a.tolerance.or(cfg.as_ref().map(|c| c.audit_tolerance)).unwrap_or(0.001);
    let baseline = read_report(&a.baseline)?;
    let intervention = read_report(&a.intervention)?;
    let verdict = classify_intervention(&baseline, &intervention, tolerance)?;
    let prov = Provenance::of_inputs(&[&a.baseline, &a.intervention])?;
    if cli.out.is_some() || cfg.as_ref().is_some_and(|c| c.out_dir.is_some()) {
        let dir = out_dir(cli, cfg.as_ref())?;
        write_json(&dir.join("verdict.json"), &verdict, &prov)?;
    }
    println!("{}", serde_json::to_string(&verdict)?);
    println!(
        "{:<16} {:>10} {:>12} {:>10}",
        "group", "baseline", "intervention", "delta"
    );
    for (g, (b, i)) in baseline.groups.iter().zip(&intervention.groups).enumerate() {
        let mark = if g == verdict.worst_group { " (worst)" } else { "" };
        println!(
            "{:<16} {:>10} {:>12} {:>+10.4}{mark}",
            b.name,
            fmt_opt(b.accuracy),
            fmt_opt(i.accuracy),
            verdict.deltas[g]
        );
    }
    println!("verdict: {}", verdict.verdict);
    Ok(if verdict.verdict.is_acceptable() {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

fn cmd_sweep_mk(cli: &Cli, a: &SweepMkArgs) -> Result<i32> {
    let mut cfg = load_config(cli)?;
    if let Some(m) = &a.m {
        cfg.sweep_mk.m = m.clone();
    }
    if let Some(k) = &a.k {
        cfg.sweep_mk.k = k.clone();
    }
    if let Some(s) = a.include_seed {
        cfg.augment.include_seed = s;
    }
    let method = a.method.unwrap_or(Method::AdaptiveGsmote);
    if !matches!(method, Method::Gsmote | Method::AdaptiveGsmote) {
        return Err(Error::invalid("method", "sweep-mk needs gsmote or adaptive_gsmote"));
    }
    if cfg.sweep_mk.m.is_empty() || cfg.sweep_mk.k.is_empty() {
        return Err(Error::invalid("sweep_mk", "m and k lists must be non-empty"));
    }
    let prov = Provenance::of(&cfg);
    let dir = out_dir(cli, Some(&cfg))?;
    let cells = run_sweep_mk(&cfg, method)?;
    let mut w = create(&dir.join("sweep_mk.csv"))?;
    write_sweep_csv(&cells, &mut w, Some(&prov.line))?;
    w.flush()?;
    println!("{:>4} {:>4} {:>10} {:>10}  status", "m", "k", "mean", "stddev");
    for c in &cells {
        println!(
            "{:>4} {:>4} {:>10} {:>10}  {:?}",
            c.m,
            c.k,
            fmt_opt(c.mean),
            fmt_opt(c.stddev),
            c.status
        );
    }
    Ok(EXIT_OK)
}

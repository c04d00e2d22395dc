//! Synthetic minority oversampling in a latent space.
//!
//! g-SMOTE encodes the dataset once, finds the `m` nearest same-label
//! neighbours of a seed row, picks `k` of them, samples uniformly from the
//! simplex spanned by the seed and the chosen neighbours and decodes the
//! result. With `k = 1` and the identity codec this is textbook SMOTE.
//!
//! Whether a simplex in latent space stays label-consistent is a property
//! of the codec; nothing here can check it.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::stats;

/// Barycentric weights of a uniform draw from a `count`-vertex simplex.
///
/// Grows the sample one vertex at a time: with `lambda ~ U[0, 1]` and
/// `t = lambda^(1/i)`, the current point is pulled to `t * rho + (1 - t) * p_{i+1}`.
pub fn simplex_weights(count: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::EmptyVertices);
    }
    let mut w = Vec::with_capacity(count);
    w.push(1.0);
    for i in 1..count {
        let lambda: f64 = rng.random();
        let t = lambda.powf(1.0 / i as f64);
        for v in &mut w {
            *v *= t;
        }
        w.push(1.0 - t);
    }
    Ok(w)
}

/// Uniform point from the convex hull of `vertices`, using `rng`.
pub fn sample_simplex_with<V: AsRef<[f64]>>(vertices: &[V], rng: &mut Rng) -> Result<Vec<f64>> {
    let first = vertices.first().ok_or(Error::EmptyVertices)?.as_ref();
    let dim = first.len();
    if let Some(v) = vertices.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.as_ref().len(),
        });
    }
    let w = simplex_weights(vertices.len(), rng)?;
    let mut out = vec![0.0; dim];
    for (v, &wi) in vertices.iter().zip(&w) {
        for (o, &x) in out.iter_mut().zip(v.as_ref()) {
            *o += wi * x;
        }
    }
    Ok(out)
}

/// Uniform point from the convex hull of `vertices`, seeded.
pub fn sample_simplex<V: AsRef<[f64]>>(vertices: &[V], seed: u64) -> Result<Vec<f64>> {
    sample_simplex_with(vertices, &mut rng::stream(seed, "simplex", 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Identity,
    FileBacked,
}

/// Encoder / decoder pair between feature space and a latent space.
pub trait LatentCodec: Send + Sync {
    fn kind(&self) -> CodecKind;

    /// Latent of row `row` of `ds`.
    fn encode_row(&self, ds: &Dataset, row: usize) -> Result<Vec<f64>>;

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>>;
}

/// Latent space equals feature space.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl LatentCodec for IdentityCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::Identity
    }

    fn encode_row(&self, ds: &Dataset, row: usize) -> Result<Vec<f64>> {
        Ok(ds.row(row).to_vec())
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(z.to_vec())
    }
}

/// Latents computed offline, one per training row.
///
/// Decoding looks up an exact match in the optional generator table first;
/// otherwise it returns the features of the training row whose stored latent
/// is nearest.
#[derive(Debug, Clone)]
pub struct FileBackedCodec {
    latents: Vec<Vec<f64>>,
    features: Vec<Vec<f64>>,
    generator: Vec<(Vec<f64>, Vec<f64>)>,
}

impl FileBackedCodec {
    /// Pairs `latents[i]` with row `i` of `ds`.
    pub fn new(ds: &Dataset, latents: Vec<Vec<f64>>) -> Result<Self> {
        if latents.len() != ds.len() {
            return Err(Error::LengthMismatch {
                expected: ds.len(),
                got: latents.len(),
            });
        }
        let dim = latents.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("latents", "latent dimension must be positive"));
        }
        if let Some(z) = latents.iter().find(|z| z.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
        Ok(Self {
            latents,
            features: ds.rows().map(<[f64]>::to_vec).collect(),
            generator: Vec::new(),
        })
    }

    /// Reads a CSV with columns `row_id, z_0 .. z_{n-1}`, one line per row of `ds`.
    pub fn load(path: &Path, ds: &Dataset) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(File::open(path)?);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("row_id") {
            return Err(Error::MissingColumn("row_id".into()));
        }
        let dim = headers.len() - 1;
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("z_{j}") {
                return Err(Error::MissingColumn(format!("z_{j}")));
            }
        }
        let mut latents: Vec<Option<Vec<f64>>> = vec![None; ds.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let parse_err = |message: String| Error::Parse { row, message };
            let id: usize = record[0]
                .parse()
                .map_err(|_| parse_err(format!("row_id {:?} is not an index", &record[0])))?;
            let slot = latents
                .get_mut(id)
                .ok_or_else(|| parse_err(format!("row_id {id} is out of range")))?;
            if slot.is_some() {
                return Err(parse_err(format!("row_id {id} appears twice")));
            }
            let z = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| parse_err(format!("latent value {v:?} is not a number")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if z.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: z.len(),
                });
            }
            *slot = Some(z);
        }
        let latents = latents
            .into_iter()
            .enumerate()
            .map(|(i, z)| z.ok_or_else(|| Error::invalid("latents", format!("row {i} has no latent"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ds, latents)
    }

    /// Adds explicit `(latent, features)` decodings.
    pub fn with_generator(mut self, table: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        self.generator = table;
        self
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl LatentCodec for FileBackedCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::FileBacked
    }

    fn encode_row(&self, ds: &Dataset, row: usize) -> Result<Vec<f64>> {
        if ds.len() != self.latents.len() || ds.row(row) != self.features[row].as_slice() {
            return Err(Error::invalid("codec", "dataset does not match the stored latents"));
        }
        Ok(self.latents[row].clone())
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latents[0].len() {
            return Err(Error::DimensionMismatch {
                expected: self.latents[0].len(),
                got: z.len(),
            });
        }
        if let Some((_, x)) = self.generator.iter().find(|(g, _)| g.as_slice() == z) {
            return Ok(x.clone());
        }
        let best = (0..self.latents.len())
            .min_by(|&a, &b| sq_dist(&self.latents[a], z).total_cmp(&sq_dist(&self.latents[b], z)))
            .expect("codec holds at least one row");
        Ok(self.features[best].clone())
    }
}

/// `m` row ids from `cohort` nearest to `seed` by squared Euclidean distance,
/// ties broken by lower row id. The cohort must exclude the seed itself.
pub fn nearest_neighbors<V: AsRef<[f64]>>(seed: &[f64], cohort: &[(V, usize)], m: usize) -> Result<Vec<usize>> {
    if cohort.len() < m {
        return Err(Error::CohortTooSmall {
            available: cohort.len(),
            needed: m,
        });
    }
    let mut scored: Vec<(f64, usize)> = cohort.iter().map(|(z, id)| (sq_dist(seed, z.as_ref()), *id)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(m).map(|(_, id)| id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Neighbour pool size.
    pub m: usize,
    /// Neighbours chosen from the pool.
    pub k: usize,
    /// Whether the seed point is a simplex vertex.
    pub include_seed: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            m: 10,
            k: 3,
            include_seed: true,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k", "must be positive"));
        }
        if self.k > self.m {
            return Err(Error::invalid("k", format!("k = {} exceeds m = {}", self.k, self.m)));
        }
        Ok(())
    }
}

/// A dataset with its latents encoded once.
pub struct LatentIndex<'a> {
    ds: &'a Dataset,
    codec: &'a dyn LatentCodec,
    latents: Vec<Vec<f64>>,
}

impl<'a> LatentIndex<'a> {
    pub fn build(ds: &'a Dataset, codec: &'a dyn LatentCodec) -> Result<Self> {
        let latents = (0..ds.len()).map(|i| codec.encode_row(ds, i)).collect::<Result<_>>()?;
        Ok(Self { ds, codec, latents })
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    pub fn latent(&self, row: usize) -> &[f64] {
        &self.latents[row]
    }

    /// Rows with the seed's label, excluding the seed.
    pub fn label_cohort(&self, seed_row: usize) -> Vec<usize> {
        let y = self.ds.label(seed_row);
        (0..self.ds.len())
            .filter(|&i| i != seed_row && self.ds.label(i) == y)
            .collect()
    }

    /// Rows sharing the seed's group and label, excluding the seed.
    pub fn cell_cohort(&self, seed_row: usize) -> Vec<usize> {
        let (g, y) = (self.ds.group(seed_row), self.ds.label(seed_row));
        self.ds
            .cell_indices(g, y)
            .into_iter()
            .filter(|&i| i != seed_row)
            .collect()
    }

    /// g-SMOTE sample seeded at `seed_row`, with neighbours from `cohort`.
    pub fn sample_from(
        &self,
        seed_row: usize,
        cohort: &[usize],
        cfg: &AugmentConfig,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, u8)> {
        cfg.validate()?;
        let pool: Vec<(&[f64], usize)> = cohort.iter().map(|&i| (self.latent(i), i)).collect();
        let neighbors = nearest_neighbors(self.latent(seed_row), &pool, cfg.m).map_err(|e| match e {
            Error::CohortTooSmall { available, needed } => Error::AugmentationUnavailable {
                row: seed_row,
                available,
                needed,
            },
            other => other,
        })?;
        let mut chosen = index::sample(rng, cfg.m, cfg.k).into_vec();
        chosen.sort_unstable();
        let mut vertices: Vec<&[f64]> = Vec::with_capacity(cfg.k + 1);
        if cfg.include_seed {
            vertices.push(self.latent(seed_row));
        }
        vertices.extend(chosen.iter().map(|&c| self.latent(neighbors[c])));
        let z = sample_simplex_with(&vertices, rng)?;
        Ok((self.codec.decode(&z)?, self.ds.label(seed_row)))
    }

    /// g-SMOTE sample with neighbours of the same label.
    pub fn sample(&self, seed_row: usize, cfg: &AugmentConfig, rng: &mut Rng) -> Result<(Vec<f64>, u8)> {
        self.sample_from(seed_row, &self.label_cohort(seed_row), cfg, rng)
    }
}

/// One g-SMOTE sample; randomness comes from `(cfg.seed, seed_row)`.
pub fn gsmote_sample(
    ds: &Dataset,
    codec: &dyn LatentCodec,
    seed_row: usize,
    cfg: &AugmentConfig,
) -> Result<(Vec<f64>, u8)> {
    if seed_row >= ds.len() {
        return Err(Error::invalid("seed_row", format!("row {seed_row} does not exist")));
    }
    let index = LatentIndex::build(ds, codec)?;
    index.sample(seed_row, cfg, &mut rng::stream(cfg.seed, "gsmote", seed_row as u64))
}

/// SMOTE: a uniform point on the segment from the seed to one of its `m`
/// nearest same-label neighbours.
pub fn smote_classic(
    ds: &Dataset,
    codec: &dyn LatentCodec,
    seed_row: usize,
    m: usize,
    seed: u64,
) -> Result<(Vec<f64>, u8)> {
    let cfg = AugmentConfig {
        m,
        k: 1,
        include_seed: true,
        seed,
    };
    gsmote_sample(ds, codec, seed_row, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// `k > m`; not run.
    Invalid,
    /// At least one seed failed; statistics cover the rest.
    Failed {
        errors: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: usize,
    pub k: usize,
    pub status: CellStatus,
    /// Min-group accuracy per successful seed, in seed order.
    pub values: Vec<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

/// Cartesian product of the `m` and `k` lists.
pub fn mk_grid(ms: &[usize], ks: &[usize]) -> Vec<(usize, usize)> {
    ms.iter().flat_map(|&m| ks.iter().map(move |&k| (m, k))).collect()
}

/// Runs `protocol(cfg, seed)` for every valid grid cell and seed. The protocol
/// returns the min-group accuracy of one trained-and-evaluated run. Errors are
/// recorded per cell.
pub fn sweep_mk<F>(grid: &[(usize, usize)], seeds: &[u64], base: &AugmentConfig, protocol: F) -> Vec<SweepCell>
where
    F: Fn(&AugmentConfig, u64) -> Result<f64> + Sync,
{
    let jobs: Vec<(usize, u64)> = grid
        .iter()
        .enumerate()
        .filter(|(_, &(m, k))| k >= 1 && k <= m)
        .flat_map(|(c, _)| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (m, k) = grid[c];
            protocol(&AugmentConfig { m, k, ..*base }, seed)
        })
        .collect();
    grid.iter()
        .enumerate()
        .map(|(c, &(m, k))| {
            if k == 0 || k > m {
                return SweepCell {
                    m,
                    k,
                    status: CellStatus::Invalid,
                    values: Vec::new(),
                    mean: None,
                    stddev: None,
                };
            }
            let mut values = Vec::new();
            let mut errors = Vec::new();
            for (_, r) in jobs.iter().zip(&results).filter(|((jc, _), _)| *jc == c) {
                match r {
                    Ok(v) => values.push(*v),
                    Err(e) => errors.push(e.to_string()),
                }
            }
            SweepCell {
                m,
                k,
                status: if errors.is_empty() {
                    CellStatus::Ok
                } else {
                    CellStatus::Failed { errors }
                },
                mean: stats::mean(&values),
                stddev: stats::stddev(&values),
                values,
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], mut w: W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "m,k,status,seeds,mean_min_group_accuracy,std_min_group_accuracy")?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.17}"));
    for c in cells {
        let status = match c.status {
            CellStatus::Ok => "ok",
            CellStatus::Invalid => "invalid",
            CellStatus::Failed { .. } => "failed",
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.m,
            c.k,
            status,
            c.values.len(),
            fmt(c.mean),
            fmt(c.stddev)
        )?;
    }
    Ok(())
}

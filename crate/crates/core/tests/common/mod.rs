//! Independent oracles and statistical helpers shared by the integration
//! tests. Nothing here calls into the code it is used to check.

#![allow(dead_code)]

use fairgap::data::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(g: usize) -> Vec<String> {
    (0..g).map(|i| format!("g{i}")).collect()
}

// ---------------------------------------------------------------- metrics

/// Per-group rates recomputed by filtering, one group at a time.
#[derive(Debug, Clone)]
pub struct BruteGroup {
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn brute_group(pred: &[u8], label: &[u8], group: &[usize], g: usize) -> BruteGroup {
    let idx: Vec<usize> = (0..pred.len()).filter(|&i| group[i] == g).collect();
    let frac = |keep: &dyn Fn(usize) -> bool, hit: &dyn Fn(usize) -> bool| {
        let sel: Vec<usize> = idx.iter().copied().filter(|&i| keep(i)).collect();
        if sel.is_empty() {
            None
        } else {
            Some(sel.iter().filter(|&&i| hit(i)).count() as f64 / sel.len() as f64)
        }
    };
    BruteGroup {
        accuracy: frac(&|_| true, &|i| pred[i] == label[i]),
        tpr: frac(&|i| label[i] == 1, &|i| pred[i] == 1),
        fpr: frac(&|i| label[i] == 0, &|i| pred[i] == 1),
    }
}

pub fn brute_deo(a: &BruteGroup, b: &BruteGroup) -> Option<f64> {
    Some((a.tpr? - b.tpr?).abs())
}

pub fn brute_deodds(a: &BruteGroup, b: &BruteGroup) -> Option<f64> {
    Some((a.tpr? - b.tpr?).abs() + (a.fpr? - b.fpr?).abs())
}

/// Smallest defined accuracy and the first group attaining it.
pub fn brute_min_group(groups: &[BruteGroup]) -> Option<(f64, usize)> {
    let min = groups.iter().filter_map(|g| g.accuracy).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let arg = groups.iter().position(|g| g.accuracy == Some(min))?;
    Some((min, arg))
}

/// Random instance with `n` rows over `g` groups; returns (pred, dataset).
pub fn random_instance(r: &mut ChaCha8Rng, n: usize, g: usize) -> (Vec<u8>, Dataset) {
    let label: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    let group: Vec<usize> = (0..n).map(|_| r.random_range(0..g)).collect();
    let pred: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ds = Dataset::from_flat(x, 1, label, group, names(g)).unwrap();
    (pred, ds)
}

/// Largest absolute discrepancy between the library report and the
/// brute-force oracle; `None` where definedness differs.
pub fn metric_discrepancy(pred: &[u8], ds: &Dataset) -> Option<f64> {
    let report = fairgap::metrics::confusion_by_group(pred, ds).ok()?;
    let g = ds.n_groups();
    let brute: Vec<BruteGroup> = (0..g).map(|k| brute_group(pred, ds.labels(), ds.groups(), k)).collect();
    let mut worst = 0.0f64;
    let mut cmp = |lib: Option<f64>, oracle: Option<f64>| -> Option<()> {
        match (lib, oracle) {
            (Some(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                Some(())
            }
            (None, None) => Some(()),
            _ => None,
        }
    };
    for (k, b) in brute.iter().enumerate() {
        cmp(report.groups[k].accuracy, b.accuracy)?;
        cmp(report.groups[k].tpr, b.tpr)?;
        cmp(report.groups[k].fpr, b.fpr)?;
    }
    let mut max_deo: Option<f64> = None;
    for a in 0..g {
        for b in a + 1..g {
            let d = brute_deo(&brute[a], &brute[b]);
            let lib = fairgap::metrics::deo(&report, a, b).ok();
            cmp(lib, d)?;
            cmp(
                fairgap::metrics::deodds(&report, a, b).ok(),
                brute_deodds(&brute[a], &brute[b]),
            )?;
            cmp(report.pair(a, b).and_then(|p| p.deo), d)?;
            if let Some(d) = d {
                max_deo = Some(max_deo.map_or(d, |m| m.max(d)));
            }
        }
    }
    cmp(report.max_deo, max_deo)?;
    let min = brute_min_group(&brute);
    cmp(report.min_group_accuracy, min.map(|m| m.0))?;
    if report.argmin_group != min.map(|m| m.1) {
        return None;
    }
    let correct = (0..ds.len()).filter(|&i| pred[i] == ds.label(i)).count();
    cmp(Some(report.overall_accuracy), Some(correct as f64 / ds.len() as f64))?;
    Some(worst)
}

// ---------------------------------------------------------- decomposition

/// Exhaustively enumerable 1-d problem: five points with `P(Y=1|x)` in
/// quarters. A training draw picks one of twenty equally likely atoms
/// `(x, slot)` with label `slot < 4 p(x)`, which matches sampling
/// `x` uniformly and `y ~ Bernoulli(p(x))`.
pub const DOMAIN_P: [f64; 5] = [0.25, 0.5, 1.0, 0.0, 0.75];

pub fn atoms() -> Vec<(f64, u8)> {
    let mut out = Vec::new();
    for (x, p) in DOMAIN_P.iter().enumerate() {
        for slot in 0..4 {
            out.push((x as f64, u8::from((slot as f64) < 4.0 * p)));
        }
    }
    out
}

/// Every ordered training set of `n` atoms, each equally likely.
pub fn all_training_sets(n: usize) -> Vec<Vec<(f64, u8)>> {
    let a = atoms();
    let mut sets: Vec<Vec<(f64, u8)>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(sets.len() * a.len());
        for s in &sets {
            for &atom in &a {
                let mut t = s.clone();
                t.push(atom);
                next.push(t);
            }
        }
        sets = next;
    }
    sets
}

/// 1-nearest-neighbour label, ties to the earliest training row.
pub fn one_nn(train: &[(f64, u8)], x: f64) -> u8 {
    let mut best = (f64::INFINITY, 0u8);
    for &(xi, yi) in train {
        let d = (xi - x).abs();
        if d < best.0 {
            best = (d, yi);
        }
    }
    best.1
}

/// Direct definitions of the decomposition for one point, from the list of
/// predictions (one per equally likely training set).
#[derive(Debug, Clone, Copy)]
pub struct OracleTerms {
    pub err: f64,
    pub noise: f64,
    pub bias: f64,
    pub variance: f64,
}

pub fn oracle_zero_one(p: f64, preds: &[u8]) -> OracleTerms {
    let n = preds.len() as f64;
    let loss = |y: u8, f: u8| f64::from(u8::from(y != f));
    let exp_loss = |f: u8| p * loss(1, f) + (1.0 - p) * loss(0, f);
    let y_star = if exp_loss(1) <= exp_loss(0) { 1 } else { 0 };
    let ones = preds.iter().filter(|&&f| f == 1).count();
    let y_m = if 2 * ones >= preds.len() { 1 } else { 0 };
    OracleTerms {
        err: preds.iter().map(|&f| exp_loss(f)).sum::<f64>() / n,
        noise: exp_loss(y_star),
        bias: loss(y_star, y_m),
        variance: preds.iter().map(|&f| loss(y_m, f)).sum::<f64>() / n,
    }
}

pub fn oracle_squared(p: f64, preds: &[f64]) -> OracleTerms {
    let n = preds.len() as f64;
    let exp_loss = |f: f64| p * (1.0 - f).powi(2) + (1.0 - p) * f * f;
    let mean = preds.iter().sum::<f64>() / n;
    OracleTerms {
        err: preds.iter().map(|&f| exp_loss(f)).sum::<f64>() / n,
        noise: exp_loss(p),
        bias: (p - mean).powi(2),
        variance: preds.iter().map(|&f| (f - mean).powi(2)).sum::<f64>() / n,
    }
}

// ------------------------------------------------------------- statistics

/// Kolmogorov distribution tail `P(K > t)`.
pub fn kolmogorov_tail(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * t * t).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample KS test against U(0, 1); returns (statistic, p-value).
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d))
}

/// Two-sample KS test; returns (statistic, asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    (d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d))
}

/// Pearson chi-square test of equal cell probabilities; returns the p-value.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

// --------------------------------------------------------------- geometry

/// Barycentric coordinates of `p` with respect to affinely independent
/// `vertices`, by least squares on the edge vectors. Also returns the
/// distance from `p` to the affine hull.
pub fn barycentric(vertices: &[Vec<f64>], p: &[f64]) -> (Vec<f64>, f64) {
    let k = vertices.len() - 1;
    let v0 = &vertices[0];
    let e: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(v0).map(|(a, b)| a - b).collect())
        .collect();
    let rhs: Vec<f64> = p.iter().zip(v0).map(|(a, b)| a - b).collect();
    // normal equations (E^T E) c = E^T rhs
    let mut m = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum();
        }
        m[i][k] = e[i].iter().zip(&rhs).map(|(a, b)| a * b).sum();
    }
    let c = solve(m);
    let mut coords = vec![1.0 - c.iter().sum::<f64>()];
    coords.extend(&c);
    let mut recon = v0.clone();
    for (ci, ei) in c.iter().zip(&e) {
        for (r, x) in recon.iter_mut().zip(ei) {
            *r += ci * x;
        }
    }
    let dist = recon.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    (coords, dist)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let k = m.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = m[row][col] / m[col][col];
                let pivot = m[col].clone();
                for (c, v) in pivot.iter().enumerate().skip(col) {
                    m[row][c] -= f * v;
                }
            }
        }
    }
    (0..k).map(|i| m[i][k] / m[i][i]).collect()
}

/// Random vertex set of `count` points in `dim` dimensions.
pub fn random_vertices(r: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect())
        .collect()
}

// ------------------------------------------------------------------- data

/// Two Gaussian-ish groups in 2-d with labels split by the first feature.
pub fn two_group_blobs(n_a: usize, n_b: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (g, n, shift) in [(0usize, n_a, 0.0), (1, n_b, 2.5)] {
        for i in 0..n {
            let y = (i % 2) as u8;
            let cx = if y == 1 { 1.2 } else { -1.2 };
            rows.push(vec![cx + r.random_range(-1.0..1.0), shift + r.random_range(-1.0..1.0)]);
            labels.push(y);
            groups.push(g);
        }
    }
    Dataset::from_rows(&rows, labels, groups, vec!["a".into(), "b".into()]).unwrap()
}

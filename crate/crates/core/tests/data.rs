mod common;

use fairgap::data::{
    generate_synthetic, oversample_cells, read_csv, stratified_split, stratified_split_indices, write_csv, CsvSchema,
    Dataset, SplitSpec, SyntheticSpec,
};
use proptest::prelude::*;
use rand::Rng;

fn spec(n: Vec<usize>, noise: Vec<f64>, seed: u64) -> SyntheticSpec {
    let g = n.len();
    SyntheticSpec {
        n_per_group: n,
        dims: 3,
        cluster_means: (0..g)
            .map(|i| [vec![-1.0, i as f64, 0.5], vec![1.0, i as f64, -0.5]])
            .collect(),
        cluster_stddev: vec![[0.8, 1.2]; g],
        label_noise_rate: noise,
        seed,
        group_names: Some((0..g).map(|i| format!("grp {i}")).collect()),
    }
}

#[test]
fn synthetic_flip_rate_matches_noise_rate() {
    let rates = [0.1, 0.3];
    let syn = generate_synthetic(&spec(vec![50_000, 50_000], rates.to_vec(), 7)).unwrap();
    let ds = &syn.dataset;
    for (g, &rho) in rates.iter().enumerate() {
        let idx = ds.group_indices(g);
        let flips = idx.iter().filter(|&&i| ds.label(i) != syn.clean_labels[i]).count() as f64;
        let n = idx.len() as f64;
        let sigma = (n * rho * (1.0 - rho)).sqrt();
        assert!(
            (flips - n * rho).abs() <= 3.0 * sigma,
            "group {g}: {flips} flips of {n}"
        );
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let s = spec(vec![200, 20], vec![0.05, 0.2], 11);
    let a = generate_synthetic(&s).unwrap();
    let b = generate_synthetic(&s).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.clean_labels, b.clean_labels);
    let other = generate_synthetic(&spec(vec![200, 20], vec![0.05, 0.2], 12)).unwrap();
    assert_ne!(a.dataset, other.dataset);
}

#[test]
fn posterior_matches_empirical_label_frequency() {
    // rows in a slab around the class boundary
    let s = spec(vec![200_000, 10], vec![0.15, 0.0], 13);
    let syn = generate_synthetic(&s).unwrap();
    let ds = &syn.dataset;
    let (mut sum_p, mut sum_y, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for i in ds.group_indices(0) {
        let x = ds.row(i);
        if x[0].abs() < 0.3 {
            sum_p += syn.conditional.prob(x, 0);
            sum_y += f64::from(ds.label(i));
            n += 1.0;
        }
    }
    // mean posterior over the slab is an unbiased estimate of the label rate
    let se = (0.25 / n).sqrt();
    assert!(
        (sum_p / n - sum_y / n).abs() < 4.0 * se,
        "{} vs {}",
        sum_p / n,
        sum_y / n
    );
}

#[test]
fn csv_round_trip_is_lossless() {
    let mut r = common::rng(3);
    let n = 300;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            vec![
                r.random::<f64>() * 10f64.powi(r.random_range(-300..300)),
                -r.random::<f64>(),
                f64::MIN_POSITIVE,
                1.0 / 3.0,
            ]
        })
        .collect();
    let labels = (0..n).map(|_| r.random_range(0..2)).collect();
    let groups = (0..n).map(|i| i % 3).collect();
    let names = vec!["a".to_string(), "b, with comma".to_string(), "c \"quoted\"".to_string()];
    let ds = Dataset::from_rows(&rows, labels, groups, names.clone()).unwrap();
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf, Some("provenance line\nsecond line")).unwrap();
    let back = read_csv(buf.as_slice(), &CsvSchema::default().with_group_names(names)).unwrap();
    assert_eq!(back.len(), ds.len());
    for i in 0..n {
        let a: Vec<u64> = ds.row(i).iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.row(i).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
    assert_eq!(back, ds);
}

#[test]
fn split_union_is_input_and_parts_are_disjoint() {
    let syn = generate_synthetic(&spec(vec![333, 47], vec![0.1, 0.1], 5)).unwrap();
    let ds = &syn.dataset;
    let split = SplitSpec {
        train_fraction: 0.5,
        eval_fraction: 0.3,
        test_fraction: 0.2,
        seed: 9,
    };
    let parts = stratified_split_indices(ds, &split).unwrap();
    let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
    let (tr, ev, te) = stratified_split(ds, &split).unwrap();
    assert_eq!(tr.len() + ev.len() + te.len(), ds.len());
    assert_eq!(stratified_split_indices(ds, &split).unwrap(), parts);
}

#[test]
fn invalid_split_fractions_are_rejected() {
    let ds = common::two_group_blobs(50, 50, 1);
    for f in [[0.5, 0.5, 0.1], [0.0, 0.5, 0.5], [1.2, -0.1, -0.1]] {
        let split = SplitSpec {
            train_fraction: f[0],
            eval_fraction: f[1],
            test_fraction: f[2],
            seed: 0,
        };
        assert!(stratified_split(&ds, &split).is_err(), "{f:?}");
    }
}

#[test]
fn oversampling_gives_equal_cells_and_keeps_originals_first() {
    let syn = generate_synthetic(&spec(vec![300, 40], vec![0.1, 0.2], 6)).unwrap();
    let ds = &syn.dataset;
    let over = oversample_cells(ds).unwrap();
    let sizes: Vec<usize> = (0..2)
        .flat_map(|g| [0u8, 1].map(|y| over.cell_indices(g, y).len()))
        .collect();
    assert!(sizes.iter().all(|&s| s == sizes[0]), "{sizes:?}");
    assert_eq!(over.select(&(0..ds.len()).collect::<Vec<_>>()).unwrap(), *ds);
}

proptest! {
    #[test]
    fn split_is_stratified_within_one_per_cell(
        a0 in 3usize..60, a1 in 3usize..60, b0 in 3usize..60, b1 in 3usize..60,
        train in 0.2f64..0.6, eval_share in 0.2f64..0.8, seed in any::<u64>(),
    ) {
        let eval = (1.0 - train) * eval_share;
        let fractions = [train, eval, 1.0 - train - eval];
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for (g, y, n) in [(0, 0u8, a0), (0, 1, a1), (1, 0, b0), (1, 1, b1)] {
            labels.extend(std::iter::repeat_n(y, n));
            groups.extend(std::iter::repeat_n(g, n));
        }
        let n = labels.len();
        let ds = Dataset::from_flat((0..n).map(|i| i as f64).collect(), 1, labels, groups, common::names(2)).unwrap();
        let split = SplitSpec { train_fraction: fractions[0], eval_fraction: fractions[1], test_fraction: fractions[2], seed };
        let parts = stratified_split_indices(&ds, &split).unwrap();
        for g in 0..2 {
            for y in [0u8, 1] {
                let cell = ds.cell_indices(g, y);
                for (k, part) in parts.iter().enumerate() {
                    let got = part.iter().filter(|&&i| ds.group(i) == g && ds.label(i) == y).count() as f64;
                    let exact = fractions[k] * cell.len() as f64;
                    prop_assert!((got - exact).abs() <= 1.0, "cell ({}, {}) part {}: {} vs {}", g, y, k, got, exact);
                }
            }
        }
    }
}

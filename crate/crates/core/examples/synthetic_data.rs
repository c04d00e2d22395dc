//! Two-group Gaussian data with a known posterior, split and written as CSV.

use fairgap::data::{generate_synthetic, load_csv, save_csv, stratified_split, CsvSchema, SplitSpec, SyntheticSpec};

fn main() -> fairgap::Result<()> {
    let spec = SyntheticSpec {
        n_per_group: vec![800, 80],
        dims: 2,
        cluster_means: vec![[vec![-1.5, 0.0], vec![1.5, 0.0]], [vec![-0.5, 2.0], vec![0.5, 2.0]]],
        cluster_stddev: vec![[1.0, 1.0], [1.0, 1.0]],
        label_noise_rate: vec![0.05, 0.1],
        seed: 1,
        group_names: Some(vec!["majority".into(), "minority".into()]),
    };
    let syn = generate_synthetic(&spec)?;
    let ds = &syn.dataset;
    println!("group sizes {:?}", ds.group_sizes());
    for x in [[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]] {
        println!("P(Y=1 | x={x:?}, majority) = {:.3}", syn.conditional.prob(&x, 0));
    }

    let (train, eval, test) = stratified_split(ds, &SplitSpec::default())?;
    println!("train/eval/test = {}/{}/{}", train.len(), eval.len(), test.len());

    let path = std::env::temp_dir().join("fairgap_example_train.csv");
    save_csv(&train, &path, Some("synthetic_data example"))?;
    let back = load_csv(&path, &CsvSchema::default().with_group_names(spec.group_names()))?;
    println!(
        "wrote {} and read back {} identical rows: {}",
        path.display(),
        back.len(),
        back == train
    );
    Ok(())
}

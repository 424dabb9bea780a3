//! Classification and retrieval on the built-in synthetic corpus.
//!
//! cargo run --release --example synthetic_run -- [KM|SC|FC] [splits]

use std::time::Instant;

use scop::pipeline::{Cache, Dataset, Experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = ExperimentConfig::preset("synthetic")?;
    if let Some(m) = args.get(1) {
        config.method = m.parse()?;
    }
    if let Some(s) = args.get(2) {
        config.splits = s.parse()?;
    }
    let dataset = Dataset::load(&config.dataset)?;
    let cache = Cache::from_env();
    let t = Instant::now();
    let exp = Experiment::new(&config, &dataset, &cache)?;
    println!("trees: {:.2}s", t.elapsed().as_secs_f64());
    let shapes: usize = (0..dataset.len()).map(|i| exp.levels(i)[0].tree.len()).sum();
    println!("mean shapes per image: {}", shapes / dataset.len());
    let t = Instant::now();
    let result = exp.classify()?;
    println!(
        "{}: {:.3} ± {:.3} over {} splits ({:.1}s), r = {}",
        config.method,
        result.mean,
        result.std,
        result.splits.len(),
        t.elapsed().as_secs_f64(),
        result.splits[0].r
    );
    let t = Instant::now();
    let (ret, _) = exp.retrieval()?;
    let (g, p) = ret.recall_at(ret.summary_nr);
    println!("recall@{}: geodesic {g:.3}, plain {p:.3} ({:.1}s)", ret.summary_nr, t.elapsed().as_secs_f64());
    Ok(())
}

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scop::coding::Method;
use scop::imaging::GrayImage;
use scop::pipeline::{
    run_classification, split_seed, stratified_split, synthetic_corpus, Cache, Dataset, DatasetSource, Experiment,
    ExperimentConfig,
};

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::preset("synthetic").unwrap();
    c.dataset = DatasetSource::Synthetic { per_class: 4, size: 48, seed: 11 };
    c.k = c.k.keys().map(|&p| (p, 8)).collect();
    c.train_per_class = 2;
    c.splits = 2;
    c
}

fn noise(like: &GrayImage, rng: &mut ChaCha8Rng) -> GrayImage {
    GrayImage::from_fn(like.width(), like.height(), |_, _| rng.gen_range(0..256))
}

#[test]
fn test_images_never_reach_training() {
    let config = small_config();
    let dataset = Dataset::load(&config.dataset).unwrap();
    let (train, test) = stratified_split(&dataset, config.train_per_class, split_seed(config.seed, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut perturbed = dataset.clone();
    for &i in &test {
        perturbed.images[i] = noise(&dataset.images[i], &mut rng);
    }
    for method in [Method::KMeans, Method::Fisher] {
        let config = ExperimentConfig { method, ..config.clone() };
        let cache = Cache::disabled();
        let a = Experiment::new(&config, &dataset, &cache).unwrap().train_split(&train, 5).unwrap();
        let b = Experiment::new(&config, &perturbed, &cache).unwrap().train_split(&train, 5).unwrap();
        assert_eq!(a, b, "{method:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let config = small_config();
    let cache = Cache::disabled();
    let a = run_classification(&config, &cache).unwrap();
    let b = run_classification(&config, &cache).unwrap();
    assert!(a.same_outcome(&b));
    let other = run_classification(&ExperimentConfig { seed: config.seed + 1, ..config.clone() }, &cache).unwrap();
    assert_ne!(a.splits.iter().map(|s| s.seed).collect::<Vec<_>>(), other.splits.iter().map(|s| s.seed).collect::<Vec<_>>());
}

#[test]
fn fast_mode_matches_sequential() {
    let config = small_config();
    let cache = Cache::disabled();
    let seq = run_classification(&config, &cache).unwrap();
    let fast = run_classification(&ExperimentConfig { fast: true, ..config }, &cache).unwrap();
    assert_eq!(seq.splits, fast.splits);
}

#[test]
fn warm_cache_reproduces_and_is_faster() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig { method: Method::Fisher, ..small_config() };

    let cold_cache = Cache::at(dir.path());
    let start = Instant::now();
    let cold = run_classification(&config, &cold_cache).unwrap();
    let cold_s = start.elapsed().as_secs_f64();
    assert_eq!(cold_cache.stats().hits.values().sum::<usize>(), 0);

    let warm_cache = Cache::at(dir.path());
    let start = Instant::now();
    let warm = run_classification(&config, &warm_cache).unwrap();
    let warm_s = start.elapsed().as_secs_f64();
    assert!(cold.same_outcome(&warm));
    let stats = warm_cache.stats();
    assert_eq!(stats.misses.values().sum::<usize>(), 0, "{stats:?}");
    assert!(cold_s >= 5.0 * warm_s, "cold {cold_s:.3} s, warm {warm_s:.3} s");
}

#[test]
fn tampered_entries_are_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let first = run_classification(&config, &Cache::at(dir.path())).unwrap();

    let entry = std::fs::read_dir(dir.path().join("codebooks")).unwrap().next().unwrap().unwrap().path();
    let mut bytes = std::fs::read(&entry).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 1;
    std::fs::write(&entry, bytes).unwrap();

    let cache = Cache::at(dir.path());
    let second = run_classification(&config, &cache).unwrap();
    assert!(first.same_outcome(&second));
    let stats = cache.stats();
    assert_eq!(stats.corrupt, 1);
    assert_eq!(stats.misses("codebooks"), 1);

    // the recomputed entry was written back
    let third = Cache::at(dir.path());
    run_classification(&config, &third).unwrap();
    assert_eq!(third.stats().corrupt, 0);
}

#[test]
fn lambda_change_reuses_trees_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    run_classification(&config, &Cache::at(dir.path())).unwrap();

    let cache = Cache::at(dir.path());
    run_classification(&ExperimentConfig { lambda: config.lambda * 2.0, ..config }, &cache).unwrap();
    let stats = cache.stats();
    assert_eq!(stats.misses("trees"), 0);
    assert_eq!(stats.misses("samples"), 0);
    assert!(stats.hits("trees") > 0);
    assert_eq!(stats.hits("codebooks"), 0);
    assert!(stats.misses("codebooks") > 0);
}

#[test]
fn multi_scale_adds_levels_and_samples() {
    let dataset = synthetic_corpus(1, 48, 2).unwrap();
    let cache = Cache::disabled();
    let single_cfg = small_config();
    let multi_cfg = ExperimentConfig { multi_scale: true, ..single_cfg.clone() };
    let single = Experiment::new(&single_cfg, &dataset, &cache).unwrap();
    let multi = Experiment::new(&multi_cfg, &dataset, &cache).unwrap();
    let r = single.interval(&[0, 1, 2, 3]);
    let (s1, s2) = (single.samples(r).unwrap(), multi.samples(r).unwrap());
    for i in 0..dataset.len() {
        assert_eq!(single.levels(i).len(), 1);
        assert_eq!(multi.levels(i).len(), multi_cfg.scales.len());
        let level_sum: usize = multi.levels(i).iter().map(|l| l.tree.len()).sum();
        assert!(level_sum > single.levels(i)[0].tree.len());
        for (a, b) in s1[i].1.buckets.iter().zip(&s2[i].1.buckets) {
            assert!(b.samples.len() >= a.samples.len());
        }
    }
}

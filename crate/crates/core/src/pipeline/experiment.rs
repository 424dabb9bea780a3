use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{image_hash, Cache, Dataset, ExperimentConfig, PipelineError};
use crate::attributes::compute_attributes;
use crate::coding::{fit_codebooks, CodebookSet, Method, TextureDescriptor};
use crate::imaging::{rescale, GrayImage};
use crate::learning::{
    classify_accuracy, cross_kernel, cross_validate, kernel_matrix, median_sigma, svm_train, KernelKind, SvmModel,
};
use crate::patterns::{extract_patterns, interval_from_sums, interval_sums, parse_sample_dump, write_sample_dump, PatternBuckets};
use crate::tree::{build_tree, prune_by_area, ShapeTree};

/// One pyramid level of an image: the rescaled raster and its area-pruned tree.
#[derive(Debug, Clone)]
pub struct ScaleLevel {
    pub factor: f64,
    pub image: GrayImage,
    pub tree: ShapeTree,
    cache_key: String,
}

/// Codebooks learned on a set of images and those images' descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedCoding {
    pub r: usize,
    pub codebooks: CodebookSet,
    pub codebook_key: String,
    pub descriptor_key: String,
    pub descriptors: Vec<TextureDescriptor>,
}

/// Everything learned from one training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitArtifacts {
    pub r: usize,
    pub codebooks: CodebookSet,
    pub train_descriptors: Vec<TextureDescriptor>,
    pub kernel: KernelKind,
    pub c: f64,
    pub model: SvmModel,
    pub codebook_key: String,
    pub descriptor_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub index: usize,
    pub seed: u64,
    pub r: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub c: f64,
    pub sigma: Option<f64>,
    /// Cache keys of the training and test descriptor sets.
    pub descriptors: (String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub prepare_s: f64,
    pub splits_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub method: Method,
    pub images: usize,
    pub classes: usize,
    pub splits: Vec<SplitResult>,
    pub mean: f64,
    /// Sample standard deviation over splits (0 for a single split).
    pub std: f64,
    pub timing: Timing,
    pub metadata: BTreeMap<String, String>,
}

impl RunResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.accuracy).collect()
    }

    pub fn mean_std(accuracies: &[f64]) -> (f64, f64) {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = if accuracies.len() > 1 { accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (mean, var.sqrt())
    }

    /// Equal up to timing.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let strip = |r: &RunResult| RunResult { timing: Timing::default(), ..r.clone() };
        strip(self) == strip(other)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of split `index` derived from the master seed.
pub fn split_seed(master: u64, index: usize) -> u64 {
    splitmix(master ^ splitmix(index as u64 + 1))
}

/// Uniform stratified split: `train_per_class` random members of every
/// class train, the rest test. Both lists are sorted.
pub fn stratified_split(dataset: &Dataset, train_per_class: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut m in dataset.members() {
        m.shuffle(&mut rng);
        let k = train_per_class.min(m.len());
        train.extend_from_slice(&m[..k]);
        test.extend_from_slice(&m[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub(crate) fn descriptor_values(d: &[TextureDescriptor]) -> Vec<Vec<f64>> {
    d.iter().map(|x| x.values.clone()).collect()
}

/// Per-dataset state shared by all splits: pyramids and trees of every
/// image, plus pattern samples memoised per ancestor interval.
pub struct Experiment<'a> {
    pub config: ExperimentConfig,
    pub dataset: &'a Dataset,
    cache: &'a Cache,
    levels: Vec<Vec<ScaleLevel>>,
    interval_sums: Vec<(u64, u64)>,
    samples: Mutex<HashMap<usize, Arc<Vec<(String, PatternBuckets)>>>>,
}

impl<'a> Experiment<'a> {
    pub fn new(config: &ExperimentConfig, dataset: &'a Dataset, cache: &'a Cache) -> Result<Self, PipelineError> {
        config.validate()?;
        if dataset.class_count() < 2 {
            return Err(PipelineError::Dataset("need at least two classes".into()));
        }
        let levels = dataset
            .images
            .par_iter()
            .map(|img| image_pyramid(img, config, cache))
            .collect::<Result<Vec<_>, _>>()?;
        let interval_sums = levels
            .iter()
            .map(|ls| ls.iter().map(|l| interval_sums(&l.tree)).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)))
            .collect();
        Ok(Experiment { config: config.clone(), dataset, cache, levels, interval_sums, samples: Mutex::default() })
    }

    pub fn levels(&self, image: usize) -> &[ScaleLevel] {
        &self.levels[image]
    }

    /// Ancestor interval from the given images (or the configured override).
    pub fn interval(&self, images: &[usize]) -> usize {
        self.config.interval.unwrap_or_else(|| {
            let (s, c) = images.iter().fold((0, 0), |a, &i| (a.0 + self.interval_sums[i].0, a.1 + self.interval_sums[i].1));
            interval_from_sums(s, c)
        })
    }

    /// Pooled pattern samples (and their cache keys) of every image for interval `r`.
    pub fn samples(&self, r: usize) -> Result<Arc<Vec<(String, PatternBuckets)>>, PipelineError> {
        if let Some(s) = self.samples.lock().unwrap().get(&r) {
            return Ok(s.clone());
        }
        let computed = self
            .levels
            .par_iter()
            .map(|levels| pooled_samples(levels, &self.config, r, self.cache))
            .collect::<Result<Vec<_>, _>>()?;
        let arc = Arc::new(computed);
        self.samples.lock().unwrap().insert(r, arc.clone());
        Ok(arc)
    }

    pub fn encode(
        &self,
        codebooks: &CodebookSet,
        codebook_key: &str,
        images: &[usize],
        samples: &[(String, PatternBuckets)],
    ) -> Result<(String, Vec<TextureDescriptor>), PipelineError> {
        let mut parts = vec![codebook_key];
        parts.extend(images.iter().map(|&i| samples[i].0.as_str()));
        let key = Cache::key("descriptors", &parts);
        let d = self.cache.json("descriptors", &key, || {
            images.par_iter().map(|&i| codebooks.encode(&samples[i].1)).collect::<Result<Vec<_>, _>>()
        })?;
        Ok((key, d))
    }

    /// Interval, codebooks and descriptors learned from `images` alone.
    pub fn learn_codebooks(&self, images: &[usize], seed: u64) -> Result<LearnedCoding, PipelineError> {
        let cfg = &self.config;
        let train = images;
        let r = self.interval(train);
        let samples = self.samples(r)?;
        let params = cfg.coding_params();
        let params_json = serde_json::to_string(&params).expect("params serialise");
        let seed_s = seed.to_string();
        let mut parts = vec![cfg.method.short(), params_json.as_str(), seed_s.as_str()];
        parts.extend(train.iter().map(|&i| samples[i].0.as_str()));
        let codebook_key = Cache::key("codebooks", &parts);
        let codebooks = self.cache.json("codebooks", &codebook_key, || {
            let mut pooled = PatternBuckets::empty(&cfg.patterns);
            for &i in train {
                pooled.extend(&samples[i].1);
            }
            let mut set = fit_codebooks(cfg.method, &pooled, &params, seed)?;
            if cfg.method == Method::Fisher {
                let raw = train.par_iter().map(|&i| set.encode_raw(&samples[i].1)).collect::<Result<Vec<_>, _>>()?;
                set.fit_pca(&raw, cfg.pca_max_dim)?;
            }
            Ok::<_, PipelineError>(set)
        })?;
        let (descriptor_key, descriptors) = self.encode(&codebooks, &codebook_key, train, &samples)?;
        Ok(LearnedCoding { r, codebooks, codebook_key, descriptor_key, descriptors })
    }

    /// Learns every split artifact from the training images alone.
    pub fn train_split(&self, train: &[usize], seed: u64) -> Result<SplitArtifacts, PipelineError> {
        let cfg = &self.config;
        let LearnedCoding { r, codebooks, codebook_key, descriptor_key, descriptors: train_descriptors } =
            self.learn_codebooks(train, seed)?;
        let values = descriptor_values(&train_descriptors);
        let labels: Vec<usize> = train.iter().map(|&i| self.dataset.labels[i]).collect();

        let kernels: Vec<KernelKind> = match cfg.kernel_power() {
            None => vec![KernelKind::Hik],
            Some(power) => {
                let sigma = cfg.kernel.sigma.unwrap_or_else(|| median_sigma(&values, power));
                let factors: &[f64] = if cfg.kernel.cv_sigma { &[1.0, 0.25, 0.5, 2.0, 4.0] } else { &[1.0] };
                factors.iter().map(|f| KernelKind::Rbf { sigma: sigma * f, power }).collect()
            }
        };
        let cs: Vec<f64> = if cfg.kernel.cv_c {
            std::iter::once(cfg.kernel.c).chain([0.1, 1.0, 10.0, 100.0].into_iter().filter(|&c| c != cfg.kernel.c)).collect()
        } else {
            vec![cfg.kernel.c]
        };
        let (mut kernel, mut c) = (kernels[0], cs[0]);
        if kernels.len() * cs.len() > 1 {
            let mut best = f64::NEG_INFINITY;
            for &k in &kernels {
                let km = kernel_matrix(&values, k)?;
                for &cc in &cs {
                    let acc = cross_validate(&km, &labels, cc, cfg.kernel.cv_folds, seed)?;
                    if acc > best {
                        (best, kernel, c) = (acc, k, cc);
                    }
                }
            }
        }
        let model_key = Cache::key("models", &[&descriptor_key, &serde_json::to_string(&(kernel, c)).unwrap()]);
        let model = self.cache.json("models", &model_key, || svm_train(&kernel_matrix(&values, kernel)?, &labels, c))?;
        Ok(SplitArtifacts { r, codebooks, train_descriptors, kernel, c, model, codebook_key, descriptor_key })
    }

    pub fn evaluate_split(&self, index: usize) -> Result<SplitResult, PipelineError> {
        let seed = split_seed(self.config.seed, index);
        let (train, test) = stratified_split(self.dataset, self.config.train_per_class, seed);
        let art = self.train_split(&train, seed)?;
        let samples = self.samples(art.r)?;
        let (test_key, test_desc) = self.encode(&art.codebooks, &art.codebook_key, &test, &samples)?;
        let rows = cross_kernel(&descriptor_values(&test_desc), &descriptor_values(&art.train_descriptors), art.kernel)?;
        let predictions = art.model.predict_all(&rows)?;
        let truth: Vec<usize> = test.iter().map(|&i| self.dataset.labels[i]).collect();
        Ok(SplitResult {
            index,
            seed,
            r: art.r,
            n_train: train.len(),
            n_test: test.len(),
            accuracy: classify_accuracy(&predictions, &truth)?,
            c: art.c,
            sigma: match art.kernel {
                KernelKind::Rbf { sigma, .. } => Some(sigma),
                KernelKind::Hik => None,
            },
            descriptors: (art.descriptor_key, test_key),
        })
    }

    pub fn classify(&self) -> Result<RunResult, PipelineError> {
        self.dataset.check_train_size(self.config.train_per_class)?;
        let start = Instant::now();
        let splits: Vec<SplitResult> = if self.config.fast {
            (0..self.config.splits).into_par_iter().map(|i| self.evaluate_split(i)).collect::<Result<_, _>>()?
        } else {
            (0..self.config.splits).map(|i| self.evaluate_split(i)).collect::<Result<_, _>>()?
        };
        let (mean, std) = RunResult::mean_std(&splits.iter().map(|s| s.accuracy).collect::<Vec<_>>());
        Ok(RunResult {
            config_hash: self.config.hash(),
            method: self.config.method,
            images: self.dataset.len(),
            classes: self.dataset.class_count(),
            splits,
            mean,
            std,
            timing: Timing { prepare_s: 0.0, splits_s: start.elapsed().as_secs_f64(), total_s: 0.0 },
            metadata: self.metadata(),
        })
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        let c = &self.config;
        let mut m = BTreeMap::new();
        m.insert("resampler".into(), "bilinear, rounded".into());
        m.insert("scales".into(), format!("{:?}", c.active_scales()));
        m.insert("patterns".into(), c.patterns.iter().map(|p| p.name()).collect::<Vec<_>>().join("+"));
        m.insert("kernel".into(), match c.kernel_power() {
            None => "histogram intersection".into(),
            Some(p) => format!("rbf, power {p}"),
        });
        m.insert("retrieval_base".into(), format!("{:?}", c.base_distance()));
        m.insert("split_count".into(), c.splits.to_string());
        m.insert("mode".into(), if c.fast { "fast (concurrent splits)".into() } else { "deterministic".into() });
        m
    }
}

/// Rescaled copies of `image` and their area-pruned trees, cached per level.
pub fn image_pyramid(image: &GrayImage, config: &ExperimentConfig, cache: &Cache) -> Result<Vec<ScaleLevel>, PipelineError> {
    let hash = image_hash(image);
    config
        .active_scales()
        .into_iter()
        .map(|factor| {
            let scaled = if factor == 1.0 { image.clone() } else { rescale(image, factor)? };
            let a_max = config.a_max(scaled.len());
            let key = Cache::key("trees", &[&hash, &factor.to_bits().to_string(), &config.a_min.to_string(), &a_max.to_string()]);
            let tree = cache.get_or_compute(
                "trees",
                &key,
                || Ok::<_, PipelineError>(prune_by_area(&build_tree(&scaled), config.a_min, a_max)),
                |t| serde_json::to_string(&t.to_record()).expect("tree serialises"),
                |s| {
                    let t = ShapeTree::from_record(serde_json::from_str(s).ok()?).ok()?;
                    (t.width() == scaled.width() && t.height() == scaled.height()).then_some(t)
                },
            )?;
            Ok(ScaleLevel { factor, image: scaled, tree, cache_key: key })
        })
        .collect()
}

/// Samples of every pyramid level pooled bucket by bucket, with the cache key
/// identifying them.
pub fn pooled_samples(
    levels: &[ScaleLevel],
    config: &ExperimentConfig,
    r: usize,
    cache: &Cache,
) -> Result<(String, PatternBuckets), PipelineError> {
    let pc = serde_json::to_string(&config.pattern_config(r, 0)).expect("pattern config serialises");
    let mut parts: Vec<&str> = vec![&pc];
    parts.extend(levels.iter().map(|l| l.cache_key.as_str()));
    let key = Cache::key("samples", &parts);
    let buckets = cache.get_or_compute(
        "samples",
        &key,
        || {
            let mut pooled = PatternBuckets::empty(&config.patterns);
            for l in levels {
                let attrs = compute_attributes(&l.tree, &l.image, config.family);
                pooled.extend(&extract_patterns(&l.tree, &attrs, &config.pattern_config(r, l.image.len()))?);
            }
            Ok::<_, PipelineError>(pooled)
        },
        write_sample_dump,
        |s| parse_sample_dump(s).ok(),
    )?;
    Ok((key, buckets))
}

/// Loads the configured dataset and runs every split.
pub fn run_classification(config: &ExperimentConfig, cache: &Cache) -> Result<RunResult, PipelineError> {
    let start = Instant::now();
    let dataset = Dataset::load(&config.dataset)?;
    dataset.check_train_size(config.train_per_class)?;
    let exp = Experiment::new(config, &dataset, cache)?;
    let prepare_s = start.elapsed().as_secs_f64();
    let mut result = exp.classify()?;
    result.timing.prepare_s = prepare_s;
    result.timing.total_s = start.elapsed().as_secs_f64();
    Ok(result)
}

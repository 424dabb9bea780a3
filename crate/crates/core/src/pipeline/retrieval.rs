use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experiment::descriptor_values;
use super::{Cache, Dataset, Experiment, ExperimentConfig, PipelineError};
use crate::learning::{recall_curve, BaseDistance, DistanceMatrix, LearningError, RetrievalIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub config_hash: String,
    pub r: usize,
    pub k: usize,
    pub base: BaseDistance,
    /// Mean recall for `N_r = 0, 1, …` under geodesic ranking.
    pub geodesic: Vec<f64>,
    /// Same under plain base-distance ranking.
    pub plain: Vec<f64>,
    /// Smallest class size − 1.
    pub summary_nr: usize,
}

impl RetrievalResult {
    pub fn recall_at(&self, nr: usize) -> (f64, f64) {
        (self.geodesic[nr], self.plain[nr])
    }

    /// Plot-ready `n_r,geodesic,plain` rows.
    pub fn csv(&self) -> String {
        let mut s = String::from("n_r,geodesic,plain\n");
        for (r, (g, p)) in self.geodesic.iter().zip(&self.plain).enumerate() {
            writeln!(s, "{r},{g},{p}").unwrap();
        }
        s
    }
}

impl Experiment<'_> {
    /// Codebooks learned on every image, geodesic index over all descriptors.
    pub fn retrieval(&self) -> Result<(RetrievalResult, RetrievalIndex), PipelineError> {
        let all: Vec<usize> = (0..self.dataset.len()).collect();
        let coding = self.learn_codebooks(&all, self.config.seed)?;
        let base = self.config.base_distance();
        let index = crate::learning::geodesic_index(&descriptor_values(&coding.descriptors), base, self.config.retrieval.k)?;
        let n = self.dataset.len();
        let geodesic = recall_curve(&index.geodesic, &self.dataset.labels, n - 1)?;
        let plain = recall_curve(&index.base, &self.dataset.labels, n - 1)?;
        let summary_nr = self.dataset.members().iter().map(Vec::len).min().unwrap_or(1) - 1;
        let result = RetrievalResult {
            config_hash: self.config.hash(),
            r: coding.r,
            k: self.config.retrieval.k,
            base,
            geodesic,
            plain,
            summary_nr,
        };
        Ok((result, index))
    }
}

pub fn run_retrieval(config: &ExperimentConfig, cache: &Cache) -> Result<RetrievalResult, PipelineError> {
    let dataset = Dataset::load(&config.dataset)?;
    if let Some(m) = dataset.members().iter().position(|m| m.len() < 2) {
        return Err(LearningError::SingletonClass(m).into());
    }
    Ok(Experiment::new(config, &dataset, cache)?.retrieval()?.0)
}

/// Recall under randomly permuted labels against the `N_r/(n−1)` null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub trials: usize,
    pub expected: Vec<f64>,
    pub mean: Vec<f64>,
    /// Per-trial standard deviation of the recall at each `N_r`.
    pub std: Vec<f64>,
    /// Largest `|mean − expected|` in units of the standard error of the mean.
    pub max_z: f64,
}

pub fn permutation_null(dist: &DistanceMatrix, labels: &[usize], trials: usize, seed: u64) -> Result<NullSummary, PipelineError> {
    let n = dist.len();
    if trials < 2 {
        return Err(PipelineError::Config("need at least two null trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves = Vec::with_capacity(trials);
    let mut shuffled = labels.to_vec();
    for _ in 0..trials {
        shuffled.shuffle(&mut rng);
        curves.push(recall_curve(dist, &shuffled, n - 1)?);
    }
    let t = trials as f64;
    let expected: Vec<f64> = (0..n).map(|r| r as f64 / (n - 1) as f64).collect();
    let mean: Vec<f64> = (0..n).map(|r| curves.iter().map(|c| c[r]).sum::<f64>() / t).collect();
    let std: Vec<f64> =
        (0..n).map(|r| (curves.iter().map(|c| (c[r] - mean[r]).powi(2)).sum::<f64>() / (t - 1.0)).sqrt()).collect();
    let max_z = (0..n)
        .map(|r| {
            let diff = (mean[r] - expected[r]).abs();
            if diff < 1e-12 {
                0.0
            } else {
                diff / (std[r] / t.sqrt())
            }
        })
        .fold(0.0, f64::max);
    Ok(NullSummary { trials, expected, mean, std, max_z })
}

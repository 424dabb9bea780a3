use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, DatasetSource, PipelineError};
use crate::coding::{CodingParams, Method, MAX_PCA_DIM};
use crate::learning::{BaseDistance, DEFAULT_C};
use crate::patterns::{PatternConfig, PatternKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub c: f64,
    /// RBF bandwidth; the median heuristic on training descriptors when unset.
    pub sigma: Option<f64>,
    /// RBF power transform; the method's default when unset.
    pub power: Option<f64>,
    /// Pick C from {0.1, 1, 10, 100} by cross-validation on the training split.
    pub cv_c: bool,
    /// Pick σ from {σ/4, σ/2, σ, 2σ, 4σ} by cross-validation on the training split.
    pub cv_sigma: bool,
    pub cv_folds: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { c: DEFAULT_C, sigma: None, power: None, cv_c: false, cv_sigma: false, cv_folds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Neighbours per node of the k-NN graph.
    pub k: usize,
    /// Base distance; 1 − HIK for KM descriptors and Euclidean on
    /// transformed descriptors otherwise when unset.
    pub base: Option<BaseDistance>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 10, base: None }
    }
}

/// Everything that determines an experiment's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: Method,
    pub patterns: Vec<PatternKind>,
    /// Codebook size per pattern.
    pub k: BTreeMap<PatternKind, usize>,
    pub lambda: f64,
    /// Ancestor family size M of the scale ratio.
    pub family: usize,
    pub a_min: u64,
    /// Upper shape-area bound as a fraction of the (rescaled) image area.
    pub a_max_fraction: f64,
    pub tau_multiplier: usize,
    /// Fixed ancestor interval; estimated from the training images when unset.
    pub interval: Option<usize>,
    pub multi_scale: bool,
    /// Pyramid factors used when `multi_scale` is set.
    pub scales: Vec<f64>,
    pub train_per_class: usize,
    pub splits: usize,
    pub seed: u64,
    pub n_d_per_atom: usize,
    pub max_fit_samples: usize,
    pub pca_max_dim: usize,
    pub kernel: KernelConfig,
    pub retrieval: RetrievalConfig,
    /// Evaluate splits concurrently.
    pub fast: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let coding = CodingParams::default();
        Self {
            dataset: DatasetSource::default(),
            method: Method::KMeans,
            patterns: PatternKind::ALL.to_vec(),
            k: coding.k,
            lambda: coding.lambda,
            family: crate::attributes::DEFAULT_FAMILY,
            a_min: 3,
            a_max_fraction: 0.05,
            tau_multiplier: 2,
            interval: None,
            multi_scale: false,
            scales: vec![0.5, std::f64::consts::FRAC_1_SQRT_2, 1.0, std::f64::consts::SQRT_2],
            train_per_class: 10,
            splits: 200,
            seed: 0,
            n_d_per_atom: coding.n_d_per_atom,
            max_fit_samples: coding.max_fit_samples,
            pca_max_dim: MAX_PCA_DIM,
            kernel: KernelConfig::default(),
            retrieval: RetrievalConfig::default(),
            fast: false,
        }
    }
}

/// Named starting points: pattern subsets per dataset family, plus the
/// desk-scale synthetic run.
pub const PRESETS: [&str; 5] = ["uiuc", "umd", "brodatz", "scene", "synthetic"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, PipelineError> {
        use PatternKind::*;
        let mut c = Self::default();
        match name {
            "uiuc" => {}
            "umd" => c.patterns = vec![SS, SA, SAG],
            "brodatz" => {
                c.patterns = vec![SS, SA];
                c.train_per_class = 3;
            }
            // no cascaded ancestor on scene images
            "scene" => c.patterns = vec![SS, SA],
            "synthetic" => {
                c.dataset = DatasetSource::default();
                c.k = PatternKind::ALL.iter().map(|&p| (p, 32)).collect();
                c.splits = 20;
                c.max_fit_samples = 5000;
            }
            _ => return Err(PipelineError::Config(format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let c: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.patterns.is_empty() {
            return bad("no pattern enabled".into());
        }
        if !(self.a_max_fraction > 0.0 && self.a_max_fraction <= 1.0) {
            return bad(format!("a_max_fraction must lie in (0, 1], got {}", self.a_max_fraction));
        }
        if self.a_min < 1 {
            return bad("a_min must be at least 1".into());
        }
        if self.splits < 1 {
            return bad("need at least one split".into());
        }
        if self.train_per_class < 1 {
            return bad("train_per_class must be at least 1".into());
        }
        if self.family < 1 || self.tau_multiplier < 2 || self.interval == Some(0) {
            return bad("family >= 1, tau_multiplier >= 2 and interval >= 1 required".into());
        }
        if self.k.values().any(|&k| k == 0) || self.patterns.iter().any(|p| !self.k.contains_key(p)) {
            return bad("every enabled pattern needs a positive codebook size".into());
        }
        if !(self.lambda > 0.0) || !(self.kernel.c > 0.0) || self.kernel.sigma.is_some_and(|s| !(s > 0.0)) {
            return bad("lambda, C and sigma must be positive".into());
        }
        if self.kernel.power.is_some_and(|p| !(p > 0.0)) || self.kernel.cv_folds < 2 {
            return bad("kernel power must be positive and cv_folds >= 2".into());
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(0.1..=4.0).contains(&s)) {
            return bad("scales must lie in [0.1, 4]".into());
        }
        if self.retrieval.k < 1 || self.pca_max_dim < 1 || self.n_d_per_atom < 1 || self.max_fit_samples < 1 {
            return bad("retrieval k, pca_max_dim, n_d_per_atom and max_fit_samples must be positive".into());
        }
        Ok(())
    }

    /// Pyramid factors actually used.
    pub fn active_scales(&self) -> Vec<f64> {
        if self.multi_scale {
            self.scales.clone()
        } else {
            vec![1.0]
        }
    }

    pub fn pattern_config(&self, r: usize, area: usize) -> PatternConfig {
        PatternConfig {
            r,
            tau_multiplier: self.tau_multiplier,
            enabled: self.patterns.clone(),
            family: self.family,
            a_min: self.a_min,
            a_max: self.a_max(area),
        }
    }

    /// Absolute upper area bound for an image of `area` pixels.
    pub fn a_max(&self, area: usize) -> u64 {
        ((self.a_max_fraction * area as f64).floor() as u64).max(self.a_min)
    }

    pub fn coding_params(&self) -> CodingParams {
        CodingParams {
            k: self.k.clone(),
            lambda: self.lambda,
            n_d_per_atom: self.n_d_per_atom,
            max_fit_samples: self.max_fit_samples,
            pca_max_dim: self.pca_max_dim,
        }
    }

    pub fn kernel_power(&self) -> Option<f64> {
        self.method.kernel_power().map(|p| self.kernel.power.unwrap_or(p))
    }

    pub fn base_distance(&self) -> BaseDistance {
        self.retrieval.base.unwrap_or(match self.method {
            Method::KMeans => BaseDistance::OneMinusHik,
            m => BaseDistance::Euclidean { power: self.kernel.power.or(m.kernel_power()).unwrap_or(1.0) },
        })
    }

    /// Short content hash of the whole configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}

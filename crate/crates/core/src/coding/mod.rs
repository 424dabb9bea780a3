//! Codebook learning and descriptor encoding for pattern sample buckets.
//!
//! Three strategies: hard voting against k-means centroids (KM), soft
//! voting with lasso codes against a learned dictionary (SC), and Fisher
//! vectors under a diagonal GMM followed by PCA (FC). One codebook is learned
//! per (pattern, polarity) bucket and the encoded blocks are concatenated in
//! canonical bucket order.

mod gmm;
mod kmeans;
mod pca;
mod sparse;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{PatternBuckets, PatternKind};
use crate::tree::Polarity;

pub use gmm::{fisher_encode, gmm_fit, Gmm, GmmFit, VARIANCE_FLOOR};
pub use kmeans::{kmeans_encode, kmeans_fit, nearest, KMeansFit};
pub use pca::{pca_fit, pca_project, pca_target_dim, Pca, MAX_PCA_DIM};
pub use sparse::{dict_learn, kkt_violation, lasso_encode, lasso_objective, sc_histogram, DictionaryFit, Lasso};

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CodingError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("block layout mismatch: {0}")]
    Layout(String),
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Common dimension of a non-empty sample set with finite entries.
pub(crate) fn check_dims(samples: &[Vec<f64>]) -> Result<usize, CodingError> {
    let dim = samples.first().map_or(0, Vec::len);
    for s in samples {
        if s.len() != dim {
            return Err(CodingError::DimensionMismatch { expected: dim, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(CodingError::NonFinite);
        }
    }
    Ok(dim)
}

/// `sign(x)|x|^μ`, elementwise.
pub fn power_transform(x: &[f64], mu: f64) -> Vec<f64> {
    if mu == 1.0 {
        return x.to_vec();
    }
    x.iter().map(|v| v.signum() * v.abs().powf(mu)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "kmeans", alias = "KM")]
    KMeans,
    #[serde(rename = "sparse", alias = "SC")]
    Sparse,
    #[serde(rename = "fisher", alias = "FC")]
    Fisher,
}

impl Method {
    pub fn short(self) -> &'static str {
        match self {
            Method::KMeans => "KM",
            Method::Sparse => "SC",
            Method::Fisher => "FC",
        }
    }

    /// Power applied before the RBF kernel; `None` for histogram-intersection methods.
    pub fn kernel_power(self) -> Option<f64> {
        match self {
            Method::KMeans => None,
            Method::Sparse => Some(0.3),
            Method::Fisher => Some(1.0),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "km" | "kmeans" => Ok(Method::KMeans),
            "sc" | "sparse" => Ok(Method::Sparse),
            "fc" | "fisher" => Ok(Method::Fisher),
            _ => Err(format!("unknown method `{s}` (expected KM, SC or FC)")),
        }
    }
}

/// Learning parameters shared by every bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    /// Codebook size per pattern.
    pub k: BTreeMap<PatternKind, usize>,
    /// Lasso penalty for sparse coding.
    pub lambda: f64,
    /// Dictionary-learning subsample per atom; `n_d = min(n_d_per_atom·K, n)`.
    pub n_d_per_atom: usize,
    /// Cap on training samples per bucket for k-means and GMM fitting.
    pub max_fit_samples: usize,
    pub pca_max_dim: usize,
}

impl Default for CodingParams {
    fn default() -> Self {
        let k = [(PatternKind::SS, 100), (PatternKind::SA, 200), (PatternKind::SAG, 300), (PatternKind::SAS, 300)];
        Self {
            k: k.into_iter().collect(),
            lambda: 0.05,
            n_d_per_atom: 100,
            max_fit_samples: 20_000,
            pca_max_dim: MAX_PCA_DIM,
        }
    }
}

impl CodingParams {
    pub fn k_for(&self, pattern: PatternKind) -> usize {
        self.k.get(&pattern).copied().unwrap_or(100)
    }
}

/// Learned model for one (pattern, polarity) bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub method: Method,
    pub pattern: PatternKind,
    pub polarity: Polarity,
    /// Sample dimension.
    pub dim: usize,
    /// Centroids (KM) or unit-norm atoms (SC); empty for FC.
    #[serde(default)]
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub gmm: Option<Gmm>,
    #[serde(default)]
    pub pca: Option<Pca>,
    /// Training samples seen by the fit.
    pub trained_on: usize,
}

impl Codebook {
    /// Number of words / atoms / mixture components.
    pub fn k(&self) -> usize {
        match &self.gmm {
            Some(g) => g.k(),
            None => self.atoms.len(),
        }
    }

    /// Length of the raw (pre-PCA) encoded block.
    pub fn raw_len(&self) -> usize {
        match self.method {
            Method::Fisher => 2 * self.dim * self.k(),
            _ => self.k(),
        }
    }

    /// Length of the block in the final descriptor.
    pub fn block_len(&self) -> usize {
        match &self.pca {
            Some(p) => p.basis.len(),
            None => self.raw_len(),
        }
    }

    /// Raw block: vote histogram (KM, SC) or Fisher vector (FC).
    pub fn encode(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>, CodingError> {
        for s in samples {
            if s.len() != self.dim {
                return Err(CodingError::DimensionMismatch { expected: self.dim, got: s.len() });
            }
        }
        match self.method {
            Method::KMeans => kmeans_encode(samples, &self.atoms),
            Method::Sparse => {
                let lasso = Lasso::new(&self.atoms, self.lambda.unwrap_or(0.05))?;
                let codes: Vec<Vec<f64>> = samples.iter().map(|x| lasso.encode(x)).collect::<Result<_, _>>()?;
                Ok(sc_histogram(&codes, self.k()))
            }
            Method::Fisher => fisher_encode(samples, self.gmm.as_ref().expect("fisher codebook carries a GMM")),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self.method {
            Method::KMeans | Method::Sparse => {
                if self.atoms.is_empty() || self.atoms.iter().any(|a| a.len() != self.dim || !finite(a)) {
                    return Err("atoms missing or of wrong dimension".into());
                }
                if self.method == Method::Sparse && self.atoms.iter().any(|a| (dot(a, a) - 1.0).abs() > 1e-9) {
                    return Err("sparse atoms must have unit norm".into());
                }
            }
            Method::Fisher => {
                let g = self.gmm.as_ref().ok_or("fisher codebook without GMM")?;
                let k = g.k();
                if k == 0 || g.means.len() != k || g.variances.len() != k {
                    return Err("GMM tables disagree".into());
                }
                if g.weights.iter().any(|&w| !(w > 0.0)) || (g.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err("GMM weights must be positive and sum to one".into());
                }
                for (m, v) in g.means.iter().zip(&g.variances) {
                    if m.len() != self.dim || v.len() != self.dim || !finite(m) || v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                        return Err("GMM component malformed".into());
                    }
                }
            }
        }
        if let Some(p) = &self.pca {
            if p.mean.len() != self.raw_len() || p.basis.iter().any(|b| b.len() != self.raw_len()) || p.basis.is_empty() {
                return Err("PCA basis does not match the raw block length".into());
            }
        }
        Ok(())
    }
}

/// Every codebook of one method, in canonical bucket order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSet {
    pub version: u32,
    pub method: Method,
    pub codebooks: Vec<Codebook>,
}

impl CodebookSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.version != CODEBOOK_FORMAT_VERSION {
            return Err(format!("unsupported codebook format version {}", self.version));
        }
        let keys: Vec<_> = self.codebooks.iter().map(|c| (c.pattern, c.polarity)).collect();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err("codebooks out of canonical order".into());
        }
        for c in &self.codebooks {
            if c.method != self.method {
                return Err("codebook method differs from set method".into());
            }
            if c.dim != c.pattern.dim() {
                return Err(format!("{} codebook has dimension {}", c.pattern, c.dim));
            }
            c.validate()?;
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<BlockLayout> {
        self.codebooks
            .iter()
            .map(|c| BlockLayout { pattern: c.pattern, polarity: c.polarity, len: c.block_len() })
            .collect()
    }

    /// Raw blocks of one image, one per codebook.
    pub fn encode_raw(&self, buckets: &PatternBuckets) -> Result<Vec<Vec<f64>>, CodingError> {
        self.codebooks
            .iter()
            .map(|c| {
                let samples = buckets
                    .get(c.pattern, c.polarity)
                    .map(|b| b.samples.as_slice())
                    .ok_or_else(|| CodingError::Layout(format!("image lacks bucket {} {}", c.pattern, c.polarity.symbol())))?;
                c.encode(samples)
            })
            .collect()
    }

    /// Learns a PCA basis per Fisher block from training raw blocks.
    pub fn fit_pca(&mut self, train_raw: &[Vec<Vec<f64>>], max_dim: usize) -> Result<(), CodingError> {
        if self.method != Method::Fisher {
            return Ok(());
        }
        for (b, codebook) in self.codebooks.iter_mut().enumerate() {
            let vectors: Vec<Vec<f64>> = train_raw.iter().map(|blocks| blocks[b].clone()).collect();
            let target = pca_target_dim(vectors.len(), codebook.raw_len()).min(max_dim.max(1));
            codebook.pca = Some(pca_fit(&vectors, target)?);
        }
        Ok(())
    }

    /// Final descriptor of one image from its raw blocks.
    pub fn assemble(&self, raw: &[Vec<f64>]) -> Result<TextureDescriptor, CodingError> {
        let blocks: Vec<Block> = self
            .codebooks
            .iter()
            .zip(raw)
            .map(|(c, v)| Block { pattern: c.pattern, polarity: c.polarity, values: v.clone() })
            .collect();
        assemble_descriptor(self, &blocks)
    }

    pub fn encode(&self, buckets: &PatternBuckets) -> Result<TextureDescriptor, CodingError> {
        self.assemble(&self.encode_raw(buckets)?)
    }
}

/// Per-bucket seed so buckets do not share random streams.
fn bucket_seed(seed: u64, pattern: PatternKind, polarity: Polarity) -> u64 {
    let tag = pattern as u64 * 2 + (polarity == Polarity::Dark) as u64;
    seed ^ (tag + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn subsample(samples: &[Vec<f64>], cap: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    if samples.len() <= cap {
        return samples.to_vec();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, samples.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| samples[i].clone()).collect()
}

/// Single diagonal Gaussian for buckets too small for EM.
fn single_gaussian(samples: &[Vec<f64>], dim: usize) -> Gmm {
    let n = samples.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        mean.iter_mut().zip(s).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for l in 0..dim {
            var[l] += (s[l] - mean[l]).powi(2) / n;
        }
    }
    let var = var.into_iter().map(|v| if v > 1e-8 { v } else { 1.0 }).collect();
    Gmm { weights: vec![1.0], means: vec![mean], variances: vec![var] }
}

/// Fits one codebook. Buckets with fewer samples than the requested size get
/// a correspondingly smaller codebook; an empty bucket gets a single
/// placeholder word.
pub fn fit_codebook(
    method: Method,
    pattern: PatternKind,
    polarity: Polarity,
    samples: &[Vec<f64>],
    params: &CodingParams,
    seed: u64,
) -> Result<Codebook, CodingError> {
    let dim = pattern.dim();
    check_dims(samples)?;
    if let Some(s) = samples.first() {
        if s.len() != dim {
            return Err(CodingError::DimensionMismatch { expected: dim, got: s.len() });
        }
    }
    let seed = bucket_seed(seed, pattern, polarity);
    let k_req = params.k_for(pattern);
    let n = samples.len();
    let mut book = Codebook {
        method,
        pattern,
        polarity,
        dim,
        atoms: Vec::new(),
        lambda: None,
        gmm: None,
        pca: None,
        trained_on: n,
    };
    match method {
        Method::KMeans => {
            book.atoms = if n == 0 {
                vec![vec![0.0; dim]]
            } else {
                let data = subsample(samples, params.max_fit_samples, seed);
                kmeans_fit(&data, k_req.min(n), seed)?.centroids
            };
        }
        Method::Sparse => {
            book.lambda = Some(params.lambda);
            book.atoms = if n == 0 {
                let mut e = vec![0.0; dim];
                e[0] = 1.0;
                vec![e]
            } else {
                let k = k_req.min(n);
                dict_learn(samples, k, params.lambda, seed, params.n_d_per_atom.saturating_mul(k))?.atoms
            };
        }
        Method::Fisher => {
            let data = subsample(samples, params.max_fit_samples, seed);
            let k = k_req.min(data.len() / 10);
            book.gmm = Some(if k == 0 { single_gaussian(&data, dim) } else { gmm_fit(&data, k, seed)?.gmm });
        }
    }
    Ok(book)
}

/// Learns every codebook from pooled training buckets (in parallel across
/// buckets; each fit is itself deterministic).
pub fn fit_codebooks(
    method: Method,
    train: &PatternBuckets,
    params: &CodingParams,
    seed: u64,
) -> Result<CodebookSet, CodingError> {
    let codebooks = train
        .buckets
        .par_iter()
        .map(|b| fit_codebook(method, b.pattern, b.polarity, &b.samples, params, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CodebookSet { version: CODEBOOK_FORMAT_VERSION, method, codebooks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub pattern: PatternKind,
    pub polarity: Polarity,
    pub len: usize,
}

/// One encoded bucket of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub pattern: PatternKind,
    pub polarity: Polarity,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureDescriptor {
    pub method: Method,
    pub values: Vec<f64>,
    pub layout: Vec<BlockLayout>,
    /// L1 mass of each raw block before normalisation (sample counts for KM).
    pub block_mass: Vec<f64>,
}

impl TextureDescriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values after the method's kernel power transform.
    pub fn transformed(&self) -> Vec<f64> {
        power_transform(&self.values, self.method.kernel_power().unwrap_or(1.0))
    }
}

fn normalize(v: &mut [f64], l2: bool) {
    let norm = if l2 { dot(v, v).sqrt() } else { v.iter().map(|x| x.abs()).sum() };
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Concatenates normalised blocks: L1 per block for voting methods, PCA
/// projection then L2 per block for Fisher vectors. Blocks must follow the
/// codebook order exactly.
pub fn assemble_descriptor(set: &CodebookSet, blocks: &[Block]) -> Result<TextureDescriptor, CodingError> {
    if blocks.len() != set.codebooks.len() {
        return Err(CodingError::Layout(format!("expected {} blocks, got {}", set.codebooks.len(), blocks.len())));
    }
    let mut values = Vec::new();
    let mut block_mass = Vec::with_capacity(blocks.len());
    for (c, b) in set.codebooks.iter().zip(blocks) {
        if (c.pattern, c.polarity) != (b.pattern, b.polarity) {
            return Err(CodingError::Layout(format!(
                "block {} {} where {} {} was expected",
                b.pattern,
                b.polarity.symbol(),
                c.pattern,
                c.polarity.symbol()
            )));
        }
        if b.values.len() != c.raw_len() {
            return Err(CodingError::DimensionMismatch { expected: c.raw_len(), got: b.values.len() });
        }
        block_mass.push(b.values.iter().map(|x| x.abs()).sum());
        let mut v = match &c.pca {
            Some(p) if set.method == Method::Fisher => pca_project(&b.values, p)?,
            _ => b.values.clone(),
        };
        normalize(&mut v, set.method == Method::Fisher);
        values.extend(v);
    }
    Ok(TextureDescriptor { method: set.method, values, layout: set.layout(), block_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::Bucket;

    fn buckets(patterns: &[PatternKind], per: usize, seed: u64) -> PatternBuckets {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut b = PatternBuckets::empty(patterns);
        for bucket in &mut b.buckets {
            bucket.samples = (0..per).map(|_| (0..bucket.pattern.dim()).map(|_| rng.gen::<f64>()).collect()).collect();
        }
        b
    }

    fn params(k: usize) -> CodingParams {
        CodingParams { k: PatternKind::ALL.iter().map(|&p| (p, k)).collect(), ..CodingParams::default() }
    }

    #[test]
    fn kmeans_descriptor_length_and_normalisation() {
        let pats = [PatternKind::SS, PatternKind::SA];
        let train = buckets(&pats, 50, 1);
        let set = fit_codebooks(Method::KMeans, &train, &params(4), 9).unwrap();
        set.validate().unwrap();
        let d = set.encode(&buckets(&pats, 7, 2)).unwrap();
        assert_eq!(d.len(), 16);
        for chunk in d.values.chunks(4) {
            assert!((chunk.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(d.block_mass, vec![7.0; 4]);
    }

    #[test]
    fn empty_image_gives_zero_descriptor() {
        let pats = [PatternKind::SS, PatternKind::SA];
        let set = fit_codebooks(Method::KMeans, &buckets(&pats, 30, 1), &params(4), 0).unwrap();
        let d = set.encode(&PatternBuckets::empty(&pats)).unwrap();
        assert_eq!(d.values, vec![0.0; 16]);
    }

    #[test]
    fn out_of_order_blocks_rejected() {
        let pats = [PatternKind::SS];
        let set = fit_codebooks(Method::KMeans, &buckets(&pats, 30, 1), &params(3), 0).unwrap();
        let blocks = vec![
            Block { pattern: PatternKind::SS, polarity: Polarity::Dark, values: vec![0.0; 3] },
            Block { pattern: PatternKind::SS, polarity: Polarity::Bright, values: vec![0.0; 3] },
        ];
        assert!(matches!(assemble_descriptor(&set, &blocks), Err(CodingError::Layout(_))));
        assert!(assemble_descriptor(&set, &blocks[..1]).is_err());
    }

    #[test]
    fn fisher_with_pca_is_unit_norm_per_block() {
        let pats = [PatternKind::SS];
        let train = buckets(&pats, 200, 3);
        let mut set = fit_codebooks(Method::Fisher, &train, &params(2), 5).unwrap();
        let raw: Vec<Vec<Vec<f64>>> = (0..6).map(|i| set.encode_raw(&buckets(&pats, 20, 10 + i)).unwrap()).collect();
        set.fit_pca(&raw, 500).unwrap();
        set.validate().unwrap();
        assert_eq!(set.codebooks[0].block_len(), 5);
        let d = set.assemble(&raw[0]).unwrap();
        for chunk in d.values.chunks(5) {
            assert!((dot(chunk, chunk) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_codebook_round_trip_and_validation() {
        let pats = [PatternKind::SS];
        let set = fit_codebooks(Method::Sparse, &buckets(&pats, 40, 4), &params(3), 2).unwrap();
        set.validate().unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: CodebookSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        let mut broken = set.clone();
        broken.codebooks[0].atoms[0][0] += 0.5;
        assert!(broken.validate().is_err());
    }

    #[test]
    fn small_buckets_shrink_codebook() {
        let mut train = buckets(&[PatternKind::SS], 30, 1);
        train.buckets[1] = Bucket { pattern: PatternKind::SS, polarity: Polarity::Dark, samples: vec![vec![0.5; 5]; 2] };
        let set = fit_codebooks(Method::KMeans, &train, &params(8), 0).unwrap();
        assert_eq!(set.codebooks[0].k(), 8);
        assert_eq!(set.codebooks[1].k(), 2);
        let fc = fit_codebooks(Method::Fisher, &train, &params(8), 0).unwrap();
        assert_eq!(fc.codebooks[0].k(), 3);
        assert_eq!(fc.codebooks[1].k(), 1);
    }

    #[test]
    fn power_transform_is_signed() {
        assert_eq!(power_transform(&[4.0, -4.0, 0.0], 0.5), vec![2.0, -2.0, 0.0]);
        assert_eq!(power_transform(&[-3.0], 1.0), vec![-3.0]);
    }

    #[test]
    fn layout_round_trips() {
        let set = fit_codebooks(Method::KMeans, &buckets(&PatternKind::ALL, 20, 1), &params(3), 0).unwrap();
        let layout = set.layout();
        let json = serde_json::to_string(&layout).unwrap();
        assert_eq!(serde_json::from_str::<Vec<BlockLayout>>(&json).unwrap(), layout);
        assert_eq!(layout.len(), 8);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("km".parse::<Method>().unwrap(), Method::KMeans);
        assert_eq!("FC".parse::<Method>().unwrap(), Method::Fisher);
        assert!("xx".parse::<Method>().is_err());
    }
}

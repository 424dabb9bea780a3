//! End-to-end experiments: dataset ingestion, per-image tree and pattern
//! extraction (optionally over a scale pyramid), per-split codebook and SVM
//! training, scoring, retrieval evaluation and a content-addressed artifact
//! cache.

mod cache;
mod config;
mod dataset;
mod experiment;
mod report;
mod retrieval;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{image_hash, Cache, CacheStats, CACHE_ENV};
pub use config::{ExperimentConfig, KernelConfig, RetrievalConfig, PRESETS};
pub use dataset::{synthetic_corpus, Dataset, DatasetSource, SYNTHETIC_CLASSES};
pub use experiment::{
    image_pyramid, pooled_samples, run_classification, split_seed, stratified_split, Experiment, LearnedCoding, RunResult, ScaleLevel,
    SplitArtifacts, SplitResult, Timing,
};
pub use report::{split_csv, summary_json};
pub use retrieval::{permutation_null, run_retrieval, NullSummary, RetrievalResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::imaging::ImageError),
    #[error(transparent)]
    Pattern(#[from] crate::patterns::PatternError),
    #[error(transparent)]
    Coding(#[from] crate::coding::CodingError),
    #[error(transparent)]
    Learning(#[from] crate::learning::LearningError),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.into();
    move |source| PipelineError::Io { path, source }
}

//! Kernels, one-vs-one SVM classification, accuracy scoring and geodesic
//! retrieval over texture descriptors.

mod kernel;
mod retrieval;
mod svm;

use thiserror::Error;

pub use kernel::{cross_kernel, hik, kernel_matrix, median_sigma, rbf, KernelKind, KernelMatrix};
pub use retrieval::{base_distances, geodesic_index, recall_curve, recall_curve_csv, BaseDistance, DistanceMatrix, RetrievalIndex};
pub use svm::{
    classify_accuracy, cross_validate, solve_binary, svm_train, BinaryMachine, BinarySolution, SvmModel, DEFAULT_C,
    KKT_TOLERANCE, MODEL_FORMAT_VERSION,
};

#[derive(Debug, Error, PartialEq)]
pub enum LearningError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("negative entry {0} in histogram-intersection input")]
    NegativeEntry(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("training data has a single class")]
    SingleClass,
    #[error("empty input")]
    Empty,
    #[error("class {0} has a single member")]
    SingletonClass(usize),
    #[error("malformed model: {0}")]
    Model(String),
}

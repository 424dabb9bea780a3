//! Shape co-occurrence patterns for texture analysis.
//!
//! An image is decomposed into its tree of shapes ([`tree`]), every shape is
//! described by a small attribute vector ([`attributes`]), short branches of
//! the tree are sampled as co-occurrence patterns ([`patterns`]), and the
//! pattern samples are encoded against learned codebooks ([`coding`]). The
//! resulting descriptors feed kernel SVM classification and geodesic
//! retrieval ([`learning`]); [`pipeline`] ties the stages together.

pub mod imaging;
pub mod tree;
pub mod attributes;
pub mod patterns;
pub mod coding;
pub mod learning;
pub mod pipeline;

//! Sparse self-expressive decomposition of data matrices.
//!
//! Columns of a data matrix are selected with oASIS, normalized into a
//! dictionary, and every column is then coded against that dictionary with
//! orthogonal matching pursuit. The sparse codes drive clustering, denoising
//! and outlier detection.

pub mod applications;
pub mod coclustering;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod matrix;
pub mod oasis;
pub mod pipeline;
pub mod samplers;
pub mod sparse_coding;
pub mod synth;

pub use error::{Result, SeedError};
pub use matrix::{ColumnIndexSet, DataMatrix};

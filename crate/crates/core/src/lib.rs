//! Sparse word representations learned by hierarchically regularized
//! sparse coding.
//!
//! The pipeline factorizes a signed PMI word-context matrix into a dense
//! dictionary and a sparse code matrix. Columns of the code matrix are
//! the word vectors; a forest-structured group-lasso penalty over the
//! latent dimensions makes coarse dimensions activate before fine ones.
//! Training is stochastic proximal gradient over the stored matrix
//! entries with conflict-free parallel batches.
//!
//! Module map:
//!
//! - [`corpus`]: vocabulary, windowed co-occurrence counts, signed PMI.
//! - [`forest`]: the regularization forest and the penalty value.
//! - [`prox`]: exact proximal operators (tree composition and l1).
//! - [`trainer`]: weighted entry sampling and the SGD/prox loop.
//! - [`eval`]: similarity, analogy, completion and sentiment benchmarks.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod forest;
pub mod prox;
pub mod trainer;

pub use error::{Error, Result};

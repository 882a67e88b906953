//! Harm coefficients for unlabelled data in semi-supervised learning.
//!
//! When the unlabelled pool of a semi-supervised learner comes from a
//! different source than the labelled set, some of its observations hurt
//! more than they help. This crate scores each unlabelled observation by how
//! far it sits from the labelled feature distribution, filters the most
//! harmful fraction, and measures dataset-level dissimilarity.
//!
//! - [`table`]: feature tables, CSV formats, standardization, pooling
//! - [`density`]: feature-histogram harm (negative log-likelihood under
//!   independent per-dimension histograms)
//! - [`gaussian`]: Mahalanobis harm with covariance shrinkage
//! - [`dedim`]: batch-sampled cosine dissimilarity between two tables
//! - [`nn`], [`mixmatch`]: a small MLP and a MixMatch trainer
//! - [`baselines`]: max-softmax and Monte-Carlo-dropout scorers
//! - [`curation`]: ranking and filtering by harm
//! - [`harness`]: synthetic mismatch data, metrics and the benchmark
//! - [`cli`]: the `ssdl-harm` command line

pub mod baselines;
pub mod cli;
pub mod curation;
pub mod dedim;
pub mod density;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod mixmatch;
pub mod nn;
pub mod rng;
pub mod table;

pub use error::{Error, Result};
pub use table::{FeatureTable, StandardizationStats};

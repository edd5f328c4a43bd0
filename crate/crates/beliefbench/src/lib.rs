//! Library and CLI for benchmarking models of how people revise a prediction
//! after seeing a histogram of their peers' estimates.
//!
//! The pieces:
//!
//! - [`belief`]: shared grids, discrete belief distributions, kernels and
//!   KL divergence.
//! - [`models`]: the update rules — social Bayesian, DeGroot, probabilistic
//!   learning and the naive-Bayes variant family.
//! - [`eval`]: per-round mean absolute error, best-baseline selection and the
//!   improvement metric, assembled into comparison tables.
//! - [`data`]: the record schema, file ingestion and a seeded synthetic
//!   generator for model-recovery experiments.
//! - [`cli`]: the `beliefbench` command-line front end.

pub mod belief;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod models;

pub use error::{Error, Result};

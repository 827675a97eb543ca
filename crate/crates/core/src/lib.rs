//! Ensemble-memory continual learner.
//!
//! A frozen encoder maps inputs to embeddings; an [`ensemble::EnsembleMemory`]
//! holds `n` fixed random keys, each paired with a trainable scaled-tanh
//! linear classifier. Each embedding selects the `k` classifiers whose keys
//! are closest by cosine similarity and averages their outputs, weighted by
//! that similarity. Training uses a dot-product loss and a sign-only
//! optimizer, which confines every update to the rows of the true class.
//!
//! The crate also carries the pieces needed to run task-free benchmarks end
//! to end: non-stationary [`schedule`]s, an embedding dataset format
//! ([`data`]), accuracy and generalised-forgetting [`metrics`], and an
//! experiment [`harness`] with single-classifier baselines.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod schedule;
mod vecops;

pub use error::{Error, Result};

//! The trainable model: t-classifiers, key lookup, weighted aggregation,
//! the dot-product loss with its analytic gradient, and the sign optimizer.

mod classifier;
mod hyper;
mod memory;
mod optim;

pub use classifier::{truncated_normal_init, TClassifier};
pub use hyper::Hyperparams;
pub use memory::{
    cosine_similarity, loss, loss_for_class, predict_from_output, EnsembleMemory, ModelOutput,
    Selection, DEGENERATE_SUM_TOLERANCE,
};
pub use optim::{sign, SignOptimizer, SparseGrad};

//! Ordinal embedding from relative similarity comparisons.
//!
//! Embeddings are fitted by minimizing one of four comparison losses with
//! SVRG driven by stabilized Barzilai-Borwein step sizes, with SGD, fixed-step
//! SVRG, gradient descent and a projected Gram-matrix solver as baselines.

pub mod convex;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod losses;
pub mod optim;
pub mod types;

pub use error::{Divergence, Error, Result};
pub use losses::{full_gradient, full_objective, LossKind, LossModel, PerComparisonGrad};
pub use types::{
    center, comparison_margin, squared_distance, Comparison, ComparisonSet, Embedding, Label,
    RngSeed,
};

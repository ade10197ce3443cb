//! Graph semi-supervised learning in kernel form.
//!
//! Laplace learning, Laplace regularization and Poisson learning on a
//! weighted graph, each returned with its decomposition
//! `u(xᵢ) = Σⱼ αⱼ Kᵢⱼ + c`, plus the diagnostics used to compare them:
//! commute times, kernel decay, peakiness and AUC.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod methods;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::{build_knn_graph, load_graph, load_labels, save_graph, save_labels, Graph, LabelSet};
pub use methods::{
    laplace_alpha, laplace_learn, laplace_regularize, poisson_learn, poisson_offset, predict_binary, KernelId,
    MaskMode, Method, MethodSpec, SslSolution,
};
pub use solvers::{cg_solve, dense_pinv, pinv_apply, schur_solve, PinvNormalization, SolveReport, SolverConfig};

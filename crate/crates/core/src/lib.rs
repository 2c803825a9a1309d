//! Symmetric non-negative latent factor models for sparse undirected
//! weighted networks, trained by damped Gauss-Newton with matrix-free
//! conjugate-gradient inner solves.
//!
//! Modules, bottom-up:
//!
//! - [`network`]: edge-list ingestion, symmetric adjacency, scaling, splits.
//! - [`model`]: parameters, sigmoid mapping, prediction, objective, gradient.
//! - [`curvature`]: Jacobian-vector and Gauss-Newton products, oracles.
//! - [`cg`]: conjugate gradient on an abstract SPD operator.
//! - [`trainer`]: second-order and first-order outer loops, stopping rules.
//! - [`eval`]: RMSE, repeated data-case evaluation, synthetic networks.
//! - [`cli`]: the `symnlf` command-line front end.

pub mod cg;
pub mod cli;
pub mod curvature;
pub mod error;
pub mod eval;
pub mod model;
pub mod network;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig, ParamVector};
pub use network::{Edge, EdgeSplit, SymmetricSparseNetwork};

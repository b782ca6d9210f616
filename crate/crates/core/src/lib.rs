//! Sparse high-dimensional binary classification by exponentially weighted
//! aggregation.
//!
//! The classifier is built from the Gibbs pseudo-posterior
//! `exp(-lambda * hinge_risk(beta)) * pi(beta)` under a heavy-tailed
//! sparsity prior, sampled with Langevin Monte Carlo ([`samplers::lmc_run`])
//! or its Metropolis-adjusted variant ([`samplers::mala_run`]). An
//! l1-penalized logistic regression ([`lasso`]) serves as the baseline.

pub mod bench;
pub mod config;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod lasso;
pub mod model;
pub mod prior;
pub mod samplers;
pub mod seeds;
pub mod simulation;

pub use error::{Error, Result};
pub use gibbs::{GibbsConfig, GibbsTarget, LogDensityTarget, LossKind};
pub use model::{CoefVector, LabeledDataset, RiskReport};
pub use prior::PriorConfig;
pub use samplers::{Chain, SamplerConfig};

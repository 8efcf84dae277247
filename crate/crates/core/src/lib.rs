//! Bayesian bandit algorithms for Bernoulli rewards: information-directed
//! sampling, Thompson sampling and generalized Thompson sampling over expert
//! pools, with quadrature and Monte Carlo tooling and simulation environments.

pub mod error;
pub mod gts;
pub mod ids;
pub mod oracle;
pub mod posterior;
pub mod simenv;
pub mod special;
pub mod thompson;

pub use error::{Error, Result};
pub use gts::{Expert, ExpertPool, LossKind};
pub use ids::{ActionDistribution, ConditionalMeans, IdsDecision, IdsQuantities, IdsSampler};
pub use posterior::{BetaPosterior, BetaPrior};
pub use simenv::{BanditAlgorithm, BernoulliEnv, ContextualEnv, RunRecord, StepRecord};
pub use special::Grid;

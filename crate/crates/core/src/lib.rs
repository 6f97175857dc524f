//! Training of small neural networks under stochastic inequality constraints.
//!
//! The crate provides:
//!
//! - a minimal dense ReLU network with exact reverse-mode gradients ([`net`]),
//! - binary cross-entropy with logits and positive-rate fairness constraints
//!   with smooth surrogates ([`loss`], [`fairness`]),
//! - three optimizers behind a primal-step / dual-step contract: a stochastic
//!   smoothed and linearized augmented Lagrangian method, a stochastic
//!   switching subgradient method, and an Adam baseline ([`optim`]),
//! - tabular data loading, standardization, splitting, and a group-balanced
//!   minibatch sampler ([`data`]),
//! - analytic constrained problems with known solutions and KKT residuals
//!   ([`problems`]),
//! - a wall-clock-budgeted, multi-seed experiment runner with trace
//!   aggregation ([`harness`]).

pub mod data;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod loss;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod selftest;

pub use data::{Dataset, GroupedBatch, ScalerParams, SyntheticSpec};
pub use error::{Error, Result};
pub use fairness::{ConstraintVector, FairnessSpec, HardRateReport};
pub use matrix::Matrix;
pub use net::{GradientVector, NetworkSpec, ParameterVector};
pub use optim::{AdamState, Branch, SslAlm, SslAlmConfig, SslAlmState, Ssw, SswConfig, SswState};
pub use problems::{AnalyticProblem, KktResidual};

//! Perturbed certainty-equivalent pricing for contextual demand with a
//! generalized linear model.
//!
//! The pricing loop lives in [`simulator`]; estimation in [`mqle`]; the
//! certainty-equivalent optimizer in [`revenue`]; exploration in
//! [`perturbation`]; and design-matrix diagnostics plus the supporting matrix
//! inequalities in [`spectral`] and [`verification`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exec;
pub mod glm;
pub mod linalg;
pub mod mqle;
pub mod perturbation;
pub mod revenue;
pub mod simulator;
pub mod spectral;
pub mod verification;

pub use error::{Error, Result};
pub use exec::Execution;
pub use glm::{FeatureVector, LinkFunction, NoiseModel};
pub use mqle::{BetaEstimate, Dataset, OnlineRidge};
pub use perturbation::{PerturbationDist, PerturbationSchedule};
pub use revenue::{PriceBox, RevenueModel};
pub use simulator::{Aggregate, Policy, SimulationConfig, SimulationResult};
pub use spectral::{BlockMatrix, DesignAccumulator};

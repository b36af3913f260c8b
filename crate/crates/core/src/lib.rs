//! Free-energy counterfactual explanations for black-box tabular classifiers.
//!
//! The search minimizes `F = E - S / beta` over perturbations `delta` of an
//! input `x0`, where `E` penalizes the perturbation size, changes to weighted
//! critical features and the distance of the model score from a threshold,
//! and `S` is the entropy of a Gaussian surrogate of the perturbation
//! distribution. Minimization runs a simulated-annealing gradient loop with
//! step-size and curvature guards and a final robustness probe.

pub mod analysis;
pub mod annealer;
pub mod baselines;
pub mod energy;
pub mod entropy;
pub mod error;
pub mod free_energy;
pub mod iot;
pub mod model;
pub mod numdiff;

/// Dense real matrix used for Hessians and covariances.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use annealer::{find_counterfactual, AnnealConfig, BetaSchedule, CounterfactualResult};
pub use energy::{EnergyParams, Regularizer};
pub use entropy::{Covariance, Gaussian};
pub use error::{Error, Result};
pub use free_energy::{EntropyEstimator, EntropyMode, EntropyModel, FreeEnergyProblem, FreeEnergyState};
pub use model::{Dataset, FeatureVector, GradientMode, ModelHandle, ModelKind};

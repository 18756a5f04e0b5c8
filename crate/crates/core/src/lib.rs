//! Deterministic approximations of the beta-VAE objective and the
//! identifiability machinery around it, at desk scale.
//!
//! The crate is organized around small, fully-checked building blocks:
//!
//! - [`numerics`]: dense small-matrix linear algebra (Cholesky, PD
//!   log-determinant and inverse, Jacobi SVD).
//! - [`network`]: dense MLPs with analytic backprop, input Jacobians,
//!   JVPs and differentiable JVPs.
//! - [`probmodel`]: standard-normal prior, structured Gaussian
//!   posteriors, Gaussian/Bernoulli observation models.
//! - [`objectives`]: the MC beta-VAE objective, its Taylor expansions,
//!   the closed-form optimal posterior covariance, the profiled
//!   objective, GRAE and its stochastic Hadamard approximation, the
//!   analytic gap formula, and auxiliary regularizers/diagnostics.
//! - [`symmetry`]: prior-preserving mixing transforms, PPCA analytics
//!   and orthogonal-Procrustes alignment with angle extraction.
//! - [`trainer`]: GD/Adam training loops for beta-VAE, GRAE-approx and
//!   unamortized VI, with stepwise learning-rate schedules,
//!   rotation-randomized parameterizations and checkpointing.
//! - [`datasets`]: the 2-d synthetic generator and IDX image ingestion
//!   with average-pool downsampling.
//! - [`cli`]: experiment pipelines emitting plot-ready CSV files.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod network;
pub mod numerics;
pub mod objectives;
pub mod probmodel;
pub mod special;
pub mod symmetry;
pub mod trainer;

pub use error::{Error, Result};

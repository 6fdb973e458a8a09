//! Finite-volume network surrogates for a desk-scale reacting flow.
//!
//! The crate pairs an explicit axisymmetric finite-volume solver with
//! per-variable MLP surrogates that read a five-cell stencil ("tier") and
//! predict time derivatives. Pipeline stages, in dependency order:
//!
//! - [`solver`]: reference stepper, snapshot series and the continuity
//!   residual.
//! - [`dataset`]: domain partition, tier inputs, derivative targets,
//!   standardization and the seeded train/validation split.
//! - [`neural`]: dense networks with hand-written backpropagation, SGD and
//!   Adam, early stopping and text checkpoints.
//! - [`rollout`]: hybrid solver/surrogate stepping in teacher-forced,
//!   autoregressive and frozen-gradient modes, plus error metrics.
//! - [`macnet`]: alternating solver windows and residual-gated surrogate
//!   phases with retraining.
//! - [`experiment`] and [`cli`]: the TOML config, the desk problem and the
//!   `fvmn` command line.
//!
//! Every random choice derives from one experiment seed, so reruns with the
//! same config produce byte-identical artifacts.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod macnet;
pub mod neural;
pub mod rollout;
pub mod solver;

pub use error::{Error, Result};

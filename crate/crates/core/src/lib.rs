//! ClustMix: differentially private synthetic data generation.
//!
//! The pipeline has three stages:
//!
//! 1. **Approximate** ([`approximate`]): rows are randomly sliced along one
//!    feature, then each (slice, class) group is clustered with a
//!    size-constrained isotropic Gaussian mixture so that every cluster holds
//!    at least `l_min` records.
//! 2. **Adapt** ([`adapt`]): cluster centroids are used as kernel inducing
//!    points and moved to trade off centroid fidelity against kernel ridge
//!    regression loss on the slice's real records.
//! 3. **Anonymize** ([`anonymize`]): each cluster is released as a single
//!    averaged record plus Gaussian noise calibrated with Gaussian
//!    differential privacy ([`gdp`]).
//!
//! [`pipeline`] wires the stages together with a `sigma_max` sweep, [`eval`]
//! holds the train-on-synthetic / test-on-real harness and [`cli`] exposes it
//! all on the command line.

pub mod adapt;
pub mod anonymize;
pub mod approximate;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gdp;
pub mod pipeline;
pub(crate) mod rng;

pub use error::{Error, Result};

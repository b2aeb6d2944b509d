//! Multi-graph spatio-temporal forecasting for weather station networks.
//!
//! The crate is organised by pipeline stage: [`data`] prepares station
//! series, [`graphs`] builds and fuses adjacency matrices and provides the
//! Chebyshev spectral filter, [`model`] holds the network and its training
//! loop, [`baselines`] the reference predictors and [`eval`] the metrics and
//! experiment harnesses.

pub mod baselines;
pub mod binfmt;
pub mod data;
pub mod eval;
mod error;
pub mod geo;
pub mod graphs;
pub mod model;

pub use error::{Error, Result};
pub use mfmgcn_tape as tape;

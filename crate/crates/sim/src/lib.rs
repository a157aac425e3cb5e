//! Experiment orchestration for the Reed-Muller massive-access codec:
//! configuration handling, Monte Carlo trials, two-phase error metrics, CSV
//! emission, and plotting.

pub mod config;
pub mod metrics;
pub mod payload;
pub mod plot;
pub mod runner;

//! Simulation and statistical-inference toolkit for the cooperative
//! sequential adsorption (CSA) model family:
//!
//! - continuous CSA time-series sampling and maximum-likelihood fitting
//!   ([`csa_seq`]),
//! - growth processes on graphs with localisation detection ([`growth`]),
//! - reversible interacting birth-and-death chains with spectral phase
//!   classification ([`ctmc`]),
//! - CSA spatial point processes with birth-death MCMC sampling
//!   ([`point_process`]).
//!
//! Shared geometry lives in [`spatial`], graph machinery in [`graph`], and
//! the batch entry point in [`cli`].

pub mod cli;
pub mod csa_seq;
pub mod ctmc;
pub mod graph;
pub mod growth;
pub mod point_process;
pub mod spatial;

pub use graph::Graph;
pub use spatial::{Domain, PointSeq};

/// Toolkit version embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

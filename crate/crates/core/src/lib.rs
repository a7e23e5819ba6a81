//! Doubly adaptive social learning.
//!
//! A network of agents learns a classifier online from labelled training
//! samples (logistic regression with constant-step SGD) while jointly
//! tracking the true hypothesis from unlabelled prediction samples through
//! discounted Bayesian updates and geometric pooling over a graph. The crate
//! holds the numerical kernels and is `no_std` (with `alloc`); file formats,
//! parallel Monte Carlo and the command line live in the `a2sl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod social;
pub mod training;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

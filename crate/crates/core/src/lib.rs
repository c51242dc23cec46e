//! Implicit neural representations regularized by a learned Dirichlet energy.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense matrices, reverse-mode autodiff, SVD/eigen, Adam.
//! - [`models`]: SIREN/ReLU coordinate networks, Fourier features, deep matrix
//!   factorization and the neighborhood-augmented INR-Z input.
//! - [`regularizers`]: Dirichlet energy, TV, L2, and the adjacency-learning
//!   penalties (free adjacency and tiny-INR adjacency).
//! - [`ntk`]: empirical neural tangent kernels and kernel-regression oracles.
//! - [`tasks`]: PGM I/O, masks, noise, synthetic data and metrics.
//! - [`harness`]: config-driven training runs, sweeps and bias studies.

pub mod error;
pub mod fsutil;
pub mod harness;
pub mod models;
pub mod ntk;
pub mod numerics;
pub mod regularizers;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
pub use numerics::DenseMatrix;

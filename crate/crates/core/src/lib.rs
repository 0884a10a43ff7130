//! Spectral Galerkin simulation of the stochastic wave equation
//!
//! ```text
//! dX_t = [𝐀X_t + 𝐅(X_t)] dt + 𝐁(X_t) dW_t,   X_0 = ξ,
//! ```
//!
//! on `(0, 1)` with Dirichlet boundary conditions, discretized by exponential
//! Euler in time, plus a Monte Carlo harness that measures weak and strong
//! errors across Galerkin levels and compares the weak rate with its
//! theoretical bound.

pub mod analysis;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod expr;
pub mod grid;
pub mod integrator;
pub mod mc;
pub mod propagator;
pub mod spectral;

pub use error::{Error, Result};

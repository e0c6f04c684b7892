//! Numerical laboratory for Gaussian-smoothed empirical measures in one dimension.
//!
//! The crate evaluates smoothed atomic distributions in log-space, computes
//! exact quantile-coupling Wasserstein-2 distances and information divergences
//! with certified tail remainders, builds the heavy-tailed hard-example
//! families used to separate parametric and non-parametric convergence rates,
//! and runs seeded Monte Carlo rate experiments on top of those primitives.
//!
//! Module map:
//! - [`dist_core`]: atomic distributions, their Gaussian smoothings, sampling.
//! - [`constructions`]: two-point and hard-example families, subgaussian checks.
//! - [`transport`]: quantile-coupling W2, crossing lower bound, displacement bounds.
//! - [`divergences`]: KL, chi-square, Renyi divergences and mutual informations.
//! - [`concentration`]: weighted CDF statistics and event-frequency simulations.
//! - [`tail_bounds`]: exponent formulas and tail-versus-density probes.
//! - [`experiments`]: Monte Carlo expectations, rate fits, Bernoulli scans.
//! - [`functional_ineq`]: log-Sobolev and transport-entropy constant probes.
//! - [`acceptance`]: the numbered acceptance checks shared by tests and the CLI.
//! - [`cli`]: command-line front end.

pub mod acceptance;
pub mod cli;
pub mod concentration;
pub mod constructions;
pub mod dist_core;
pub mod divergences;
pub mod error;
pub mod experiments;
pub mod functional_ineq;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod tail_bounds;
pub mod transport;

pub use error::{Error, Result};

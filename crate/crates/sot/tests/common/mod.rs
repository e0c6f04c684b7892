//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use sot::dist_core::{AtomicDistribution, SmoothedMixture};
use sot::rng::stream_rng;

/// Fixed seed used throughout the test suite.
pub const SEED: u64 = 20261016;

/// Mixture from `(location, weight)` pairs.
pub fn mixture(atoms: &[(f64, f64)], sigma: f64) -> SmoothedMixture {
    SmoothedMixture::new(AtomicDistribution::from_weights(atoms).unwrap(), sigma).unwrap()
}

/// Single Gaussian `N(mu, sigma^2)`.
pub fn gaussian(mu: f64, sigma: f64) -> SmoothedMixture {
    SmoothedMixture::gaussian(mu, sigma).unwrap()
}

/// Random mixture with `atoms` atoms in `[-spread, spread]`.
pub fn random_mixture(seed: u64, stream: u64, atoms: usize, spread: f64, sigma: f64) -> SmoothedMixture {
    let mut rng = stream_rng(seed, stream);
    let pts: Vec<(f64, f64)> = (0..atoms)
        .map(|_| (rng.random_range(-spread..spread), rng.random_range(0.1..1.0)))
        .collect();
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let pts: Vec<(f64, f64)> = pts.iter().map(|&(x, w)| (x, w / total)).collect();
    mixture(&pts, sigma)
}

/// Composite midpoint rule of `f` on `[lo, hi]` with `cells` cells.
pub fn midpoint(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let h = (hi - lo) / cells as f64;
    (0..cells).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Relative difference.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

//! Tail-versus-density inequalities for smoothed subgaussian laws and the
//! interval-probability bounds of the super-geometric hard example, with
//! empirical constants measured on declared grids.

use serde::Serialize;

use crate::constructions::HardExampleSchedule;
use crate::dist_core::{AtomicDistribution, SmoothedMixture, SubgaussianProfile};
use crate::error::{invalid, Result};
use crate::special::LogSumAcc;

/// Tail exponent `4 K^2 / (1 + K^2)^2` at unit noise.
pub fn beta_exponent(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return invalid("K must be positive");
    }
    if k.is_infinite() {
        return Ok(0.0);
    }
    let k2 = k * k;
    // Written as 4 / (K + 1/K)^2 so that large K does not overflow.
    let s = k + 1.0 / k;
    let beta = 4.0 / (s * s);
    debug_assert!((beta - 4.0 * k2 / ((1.0 + k2) * (1.0 + k2))).abs() <= 1e-12 || k2 > 1e150);
    Ok(beta)
}

/// Rate exponent `(sigma^2 + K^2)^2 / (4 (sigma^4 + K^4))`.
///
/// Verifies the identity `2 alpha = 1 / (2 - beta(K / sigma))` to `1e-12`.
pub fn alpha_exponent(k: f64, sigma: f64) -> Result<f64> {
    if !(k > 0.0) || !(sigma > 0.0) {
        return invalid("K and sigma must be positive");
    }
    let alpha = if k.is_infinite() {
        0.25
    } else {
        // Scale-free form in the ratio x = K / sigma (or its inverse).
        let x = if k >= sigma { sigma / k } else { k / sigma };
        let x2 = x * x;
        let x4 = x2 * x2;
        (1.0 + x2) * (1.0 + x2) / (4.0 * (1.0 + x4))
    };
    let beta = beta_exponent(k / sigma)?;
    let gap = (2.0 * alpha - 1.0 / (2.0 - beta)).abs();
    if gap > 1e-12 {
        return Err(crate::error::Error::Numeric(format!(
            "exponent identity violated by {gap:e} at K = {k}, sigma = {sigma}"
        )));
    }
    Ok(alpha)
}

/// One row of a tail-density probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailDensityRow {
    /// Evaluation point.
    pub r: f64,
    /// `ln(1 - F(r))` for `r >= 0`, `ln F(r)` for `r < 0`.
    pub log_tail: f64,
    /// `ln rho(r)`.
    pub log_rho: f64,
    /// Tightness diagnostic `log_tail / log_rho`.
    pub ratio: f64,
}

/// Report of [`tail_density_inequality_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailDensityReport {
    /// Exponent used.
    pub beta: f64,
    /// Slack.
    pub epsilon: f64,
    /// `ln` of the empirical constant `sup tail / rho^(beta - eps)`.
    pub log_m_hat: f64,
    /// Empirical constant.
    pub m_hat: f64,
    /// Per-point diagnostics.
    pub rows: Vec<TailDensityRow>,
}

fn radii_for(p: &AtomicDistribution) -> Vec<f64> {
    let (lo, hi) = p.support();
    let reach = 2.0 * lo.abs().max(hi.abs()) + 10.0;
    let mut r: Vec<f64> = p.locations().iter().map(|x| x.abs()).collect();
    r.extend((0..=400).map(|i| reach * i as f64 / 400.0));
    r
}

fn check_profile(p: &AtomicDistribution, profile: &SubgaussianProfile) -> Result<()> {
    if let Some(r) = profile.verify_on(p, &radii_for(p)) {
        return invalid(format!("profile tail inequality fails at r = {r}"));
    }
    Ok(())
}

/// `ln(1e-280)`: smallest tail value a default grid may reach.
pub const GRID_LOG_TAIL_FLOOR: f64 = -644.723_826_038_332_8;

/// Log-spaced grid of `points` radii from `sigma / 10` to the largest radius
/// where `1 - F(r) > 1e-280` for `P * N(0, sigma^2)`.
pub fn log_spaced_tail_grid(p: &AtomicDistribution, sigma: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return invalid("a grid needs at least two points");
    }
    let m = SmoothedMixture::new(p.clone(), sigma)?;
    let start = 0.1 * sigma;
    let mut hi = start.max(p.support().1) + sigma;
    while m.log_sf(hi) > GRID_LOG_TAIL_FLOOR {
        hi *= 2.0;
    }
    let mut lo = start;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m.log_sf(mid) > GRID_LOG_TAIL_FLOOR {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > start) {
        return invalid("tail falls below the floor before the first grid point");
    }
    let (l0, l1) = (start.ln(), lo.ln());
    Ok((0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Measures `M = sup_r tail(r) / rho(r)^(beta - eps)` for `P * N(0, 1)` over `r_grid`.
pub fn tail_density_inequality_probe(
    p: &AtomicDistribution,
    profile: &SubgaussianProfile,
    epsilon: f64,
    r_grid: &[f64],
) -> Result<TailDensityReport> {
    let beta = beta_exponent(profile.k)?;
    if !(epsilon > 0.0 && epsilon < beta) {
        return invalid("epsilon must lie in (0, beta)");
    }
    check_profile(p, profile)?;
    let m = SmoothedMixture::new(p.clone(), 1.0)?;
    let mut log_m = f64::NEG_INFINITY;
    let rows: Vec<TailDensityRow> = r_grid
        .iter()
        .map(|&r| {
            let log_tail = if r >= 0.0 { m.log_sf(r) } else { m.log_cdf(r) };
            let log_rho = m.log_pdf(r);
            TailDensityRow {
                r,
                log_tail,
                log_rho,
                ratio: log_tail / log_rho,
            }
        })
        .collect();
    for row in &rows {
        log_m = log_m.max(row.log_tail - (beta - epsilon) * row.log_rho);
    }
    Ok(TailDensityReport {
        beta,
        epsilon,
        log_m_hat: log_m,
        m_hat: log_m.exp(),
        rows,
    })
}

/// Report of [`density_tail_lower_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityLowerReport {
    /// Exponent used.
    pub beta: f64,
    /// `ln` of the empirical constant `inf rho(r) / P[X >= r]^(1/(beta - eps))`.
    pub log_c_hat: f64,
    /// `ln` of the minimum over the last tenth of the grid.
    pub log_last_decade_min: f64,
    /// Per-point `ln` ratios (`+inf` where the base has no mass beyond `r`).
    pub log_ratios: Vec<f64>,
    /// Whether the infimum is a positive representable number.
    pub passed: bool,
}

/// `ln P[X >= r]` for an atomic law.
pub fn log_upper_tail(p: &AtomicDistribution, r: f64) -> f64 {
    let mut acc = LogSumAcc::new();
    for (x, lw) in p.atoms() {
        if x >= r {
            acc.add(lw);
        }
    }
    acc.value()
}

/// Measures `C = inf_r rho(r) / P[X >= r]^(1/(beta - eps))` over a grid of `r >= 0`.
pub fn density_tail_lower_probe(
    p: &AtomicDistribution,
    profile: &SubgaussianProfile,
    epsilon: f64,
    r_grid: &[f64],
) -> Result<DensityLowerReport> {
    let beta = beta_exponent(profile.k)?;
    if !(epsilon > 0.0 && epsilon < beta) {
        return invalid("epsilon must lie in (0, beta)");
    }
    if r_grid.iter().any(|r| !(*r >= 0.0)) {
        return invalid("grid points must be nonnegative");
    }
    let m = SmoothedMixture::new(p.clone(), 1.0)?;
    let log_ratios: Vec<f64> = r_grid
        .iter()
        .map(|&r| {
            let lt = log_upper_tail(p, r);
            if lt == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                m.log_pdf(r) - lt / (beta - epsilon)
            }
        })
        .collect();
    let log_c = log_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let tenth = (log_ratios.len() / 10).max(1);
    let last = log_ratios[log_ratios.len().saturating_sub(tenth)..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(DensityLowerReport {
        beta,
        log_c_hat: log_c,
        log_last_decade_min: last,
        log_ratios,
        passed: log_c > f64::MIN_POSITIVE.ln(),
    })
}

/// Interval probabilities near a schedule probe and the implied constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBounds {
    /// Stage index.
    pub k: usize,
    /// `ln P(X in [t r + 1, t r + 2])`.
    pub log_prob_lower_interval: f64,
    /// `ln P(X in [t r, t r + 2])`.
    pub log_prob_upper_interval: f64,
    /// Lower-bound exponent `-(t^2 - c kappa - c)(r + 2)^2 / (2 sigma^2)`.
    pub lower_exponent: f64,
    /// Upper-bound exponent `-(t^2 - c kappa - c)(r - 2)^2 / (2 sigma^2)`.
    pub upper_exponent: f64,
    /// `ln` of the implied lower constant.
    pub log_c_l: f64,
    /// `ln` of the implied upper constant.
    pub log_c_u: f64,
    /// Implied lower constant.
    pub c_l: f64,
    /// Implied upper constant.
    pub c_u: f64,
    /// Explicit lower constant `1 / (2 pi sigma K)`.
    pub c_l_explicit: f64,
    /// Whether the implied lower constant is at least the explicit one.
    pub lower_ok: bool,
}

/// Exact interval probabilities of `P * N(0, sigma^2)` at stage `k` of a schedule.
pub fn interval_prob_bounds(
    schedule: &HardExampleSchedule,
    p: &AtomicDistribution,
    sigma: f64,
    k: usize,
) -> Result<IntervalBounds> {
    let Some(rec) = schedule.record(k) else {
        return invalid(format!("stage {k} not in schedule"));
    };
    let kappa = schedule.kappa;
    let floor = (2.0 / kappa).sqrt().max((kappa + 3.0) / (1.0 - kappa));
    if rec.c < floor * (1.0 - 1e-12) {
        return invalid(format!("growth factor {} below the required {floor}", rec.c));
    }
    let m = SmoothedMixture::new(p.clone(), sigma)?;
    let probe = rec.probe;
    let lp_low = m.log_interval_mass(probe + 1.0, probe + 2.0);
    let lp_up = m.log_interval_mass(probe, probe + 2.0);
    let f = schedule.exponent_factor(rec);
    let s2 = 2.0 * sigma * sigma;
    let lower_exponent = -f * (rec.r + 2.0) * (rec.r + 2.0) / s2;
    let upper_exponent = -f * (rec.r - 2.0) * (rec.r - 2.0) / s2;
    let log_c_l = lp_low - lower_exponent;
    let log_c_u = lp_up - upper_exponent;
    let c_l_explicit = 1.0 / (2.0 * std::f64::consts::PI * sigma * schedule.k);
    Ok(IntervalBounds {
        k,
        log_prob_lower_interval: lp_low,
        log_prob_upper_interval: lp_up,
        lower_exponent,
        upper_exponent,
        log_c_l,
        log_c_u,
        c_l: log_c_l.exp(),
        c_u: log_c_u.exp(),
        c_l_explicit,
        lower_ok: log_c_l >= c_l_explicit.ln(),
    })
}

//! Monte Carlo estimates of the expected smoothed W2 and KL errors of the
//! empirical measure, log-log rate fits, the two-point lower-bound scan, and
//! phase scans across the subgaussian scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{bernoulli_two_point, solve_delta};
use crate::dist_core::{empirical_from_counts, AtomicDistribution, SmoothedMixture};
use crate::divergences::{kl_divergence_with, DivOptions};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::transport::{w2_squared_with, MixturePair, W2Options};

/// Relative tolerance used for per-trial quadratures in addition to the absolute one.
const TRIAL_REL_TOL: f64 = 1e-6;

/// One point of a convergence-rate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Sample size.
    pub n: u64,
    /// Monte Carlo mean.
    pub estimate: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Trials used.
    pub trials: usize,
}

/// A convergence-rate series with strictly increasing sample sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateSeries {
    /// Points in increasing `n`.
    pub points: Vec<RatePoint>,
}

/// Weighted least-squares fit of `ln estimate` on `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Fitted exponent.
    pub slope: f64,
    /// Fitted log-prefactor.
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
}

/// Fits `ln estimate = intercept + slope ln n` with weights `(estimate / stderr)^2`.
///
/// Falls back to equal weights when any standard error is zero.
pub fn fit_rate(series: &RateSeries) -> Result<RateFit> {
    let pts = &series.points;
    if pts.len() < 3 {
        return invalid("rate fit needs at least three points");
    }
    let bad: Vec<usize> = pts
        .iter()
        .enumerate()
        .filter(|(_, p)| !(p.estimate > 0.0 && p.estimate.is_finite()))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return invalid(format!("estimates must be positive; offending indices {bad:?}"));
    }
    if pts.windows(2).any(|w| w[1].n <= w[0].n) {
        return invalid("sample sizes must be strictly increasing");
    }
    let uniform = pts.iter().any(|p| !(p.stderr > 0.0));
    let w: Vec<f64> = pts
        .iter()
        .map(|p| if uniform { 1.0 } else { (p.estimate / p.stderr).powi(2) })
        .collect();
    let x: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.estimate.ln()).collect();
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let syy: f64 = w.iter().zip(&y).map(|(w, y)| w * (y - ym) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..x.len())
        .map(|i| {
            let r = y[i] - intercept - slope * x[i];
            w[i] * r * r
        })
        .sum();
    let dof = (x.len() - 2) as f64;
    let slope_stderr = (rss / dof / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - rss / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Trial-count policy for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Maximum number of trials.
    pub trials: usize,
    /// Stop once `stderr / estimate` falls below this (checked every 20 trials).
    pub early_stop_rel: Option<f64>,
    /// Absolute quadrature tolerance per trial.
    pub tol: f64,
}

impl McOptions {
    /// Exactly `trials` trials with absolute tolerance `tol`.
    pub fn fixed(trials: usize, tol: f64) -> Self {
        Self {
            trials,
            early_stop_rel: None,
            tol,
        }
    }
}

/// Monte Carlo mean with its per-trial values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Sample mean.
    pub estimate: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Per-trial values in trial order.
    pub values: Vec<f64>,
}

impl McEstimate {
    fn from_values(values: Vec<f64>) -> Self {
        let (estimate, stderr) = mean_stderr(&values);
        Self {
            estimate,
            stderr,
            values,
        }
    }

    /// Mean and standard error of a transformed per-trial value.
    pub fn mapped(&self, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let v: Vec<f64> = self.values.iter().map(|x| f(*x)).collect();
        mean_stderr(&v)
    }
}

/// Sample mean and standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn run_trials<F>(opts: &McOptions, seed: u64, trial: F) -> Result<McEstimate>
where
    F: Fn(usize, u64) -> Result<f64> + Sync,
{
    if opts.trials < 2 {
        return invalid("at least two trials are required");
    }
    let chunk = if opts.early_stop_rel.is_some() { 20 } else { opts.trials };
    let mut values: Vec<f64> = Vec::with_capacity(opts.trials);
    while values.len() < opts.trials {
        let start = values.len();
        let end = (start + chunk).min(opts.trials);
        let batch: Result<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| trial(i, seed))
            .collect();
        values.extend(batch?);
        if let Some(rel) = opts.early_stop_rel {
            let (m, se) = mean_stderr(&values);
            if values.len() >= 2 && m > 0.0 && se / m < rel {
                break;
            }
        }
    }
    Ok(McEstimate::from_values(values))
}

fn trial_context(e: Error, index: usize) -> Error {
    match e {
        Error::Quadrature { estimate, error } => {
            Error::Numeric(format!("trial {index}: quadrature did not converge (estimate {estimate:e}, error {error:e})"))
        }
        Error::Numeric(m) => Error::Numeric(format!("trial {index}: {m}")),
        other => other,
    }
}

/// Draws the empirical law for trial `index` of a run seeded by `seed`.
pub fn trial_empirical(p: &AtomicDistribution, n: u64, seed: u64, index: usize) -> Result<AtomicDistribution> {
    let mut rng = stream_rng(seed, index as u64);
    empirical_from_counts(p, n, &mut rng)
}

/// `E[W2^2(P * N, P_n * N)]` by Monte Carlo over empirical draws.
pub fn mc_expected_w2sq(p: &AtomicDistribution, sigma: f64, n: u64, opts: &McOptions, seed: u64) -> Result<McEstimate> {
    let truth = SmoothedMixture::new(p.clone(), sigma)?;
    let w2 = W2Options {
        tol: opts.tol,
        rel_tol: TRIAL_REL_TOL,
        diagnostic_points: 0,
    };
    run_trials(opts, seed, |i, seed| {
        let emp = SmoothedMixture::new(trial_empirical(p, n, seed, i)?, sigma)?;
        let pair = MixturePair::new(&truth, &emp);
        w2_squared_with(&pair, &w2).map(|e| e.total).map_err(|e| trial_context(e, i))
    })
}

/// `E[KL(P_n * N || P * N)]` by Monte Carlo over empirical draws.
pub fn mc_expected_kl(p: &AtomicDistribution, sigma: f64, n: u64, opts: &McOptions, seed: u64) -> Result<McEstimate> {
    let truth = SmoothedMixture::new(p.clone(), sigma)?;
    let div = DivOptions {
        abs_tol: opts.tol,
        rel_tol: TRIAL_REL_TOL,
    };
    run_trials(opts, seed, |i, seed| {
        let emp = SmoothedMixture::new(trial_empirical(p, n, seed, i)?, sigma)?;
        let pair = MixturePair::new(&emp, &truth);
        kl_divergence_with(&pair, &div).map(|e| e.value).map_err(|e| trial_context(e, i))
    })
}

/// Seed used for sample size `n` within a sweep seeded by `seed`.
pub fn sweep_seed(seed: u64, n: u64) -> u64 {
    derive_seed(seed, n)
}

/// Which per-trial quantity a sweep estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// `E[W2^2]`.
    W2Squared,
    /// `E[W2]`.
    W2,
    /// `E[KL]`.
    Kl,
}

/// Monte Carlo series over `n_list` for a fixed base law.
pub fn rate_series(
    p: &AtomicDistribution,
    sigma: f64,
    n_list: &[u64],
    quantity: SweepQuantity,
    opts: &McOptions,
    seed: u64,
) -> Result<RateSeries> {
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let s = sweep_seed(seed, n);
        let (estimate, stderr, trials) = match quantity {
            SweepQuantity::W2Squared => {
                let e = mc_expected_w2sq(p, sigma, n, opts, s)?;
                (e.estimate, e.stderr, e.values.len())
            }
            SweepQuantity::W2 => {
                let e = mc_expected_w2sq(p, sigma, n, opts, s)?;
                let (m, se) = e.mapped(f64::sqrt);
                (m, se, e.values.len())
            }
            SweepQuantity::Kl => {
                let e = mc_expected_kl(p, sigma, n, opts, s)?;
                (e.estimate, e.stderr, e.values.len())
            }
        };
        points.push(RatePoint {
            n,
            estimate,
            stderr,
            trials,
        });
    }
    Ok(RateSeries { points })
}

/// One sample size of the two-point lower-bound scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRecord {
    /// Sample size.
    pub n: u64,
    /// Separation `h(n)`.
    pub h: f64,
    /// Probe point `h/2 + sigma^2 h / (2 K^2)`.
    pub t: f64,
    /// Far-atom weight.
    pub p_h: f64,
    /// `n p_h`.
    pub expected_far_count: f64,
    /// Whether `n p_h >= 128`.
    pub feasible: bool,
}

/// Parameters and per-`n` schedule of the two-point lower-bound scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliScanPlan {
    /// Subgaussian scale.
    pub k: f64,
    /// Noise scale.
    pub sigma: f64,
    /// Slack exponent.
    pub epsilon: f64,
    /// Perturbation solved from epsilon.
    pub delta: f64,
    /// `(1/2 + sigma^2 / (2 K^2))^2 / (2 sigma^2)`.
    pub zeta: f64,
    /// Per-`n` records.
    pub records: Vec<ScanRecord>,
}

/// `(1/2 + sigma^2 / (2 K^2))^2 / (2 sigma^2)`.
pub fn scan_zeta(k: f64, sigma: f64) -> f64 {
    let a = 0.5 + sigma * sigma / (2.0 * k * k);
    a * a / (2.0 * sigma * sigma)
}

/// Builds the two-point scan schedule for the given sample sizes.
pub fn bernoulli_scan_plan(k: f64, sigma: f64, epsilon: f64, n_list: &[u64]) -> Result<BernoulliScanPlan> {
    if !(sigma > 0.0 && k > sigma) {
        return invalid("the scan requires 0 < sigma < K");
    }
    let delta = solve_delta(k, sigma, epsilon)?;
    let zeta = scan_zeta(k, sigma);
    let cap = 0.5_f64.min(1.0 - 1.0 / (2.0 * k * k * zeta));
    if !(delta < cap) {
        return invalid(format!("delta = {delta} is not below {cap}; reduce epsilon"));
    }
    let denom = (1.0 - delta) * zeta - 1.0 / (4.0 * k * k);
    if !(denom > 0.0) {
        return invalid("separation schedule is undefined for these parameters");
    }
    let records = n_list
        .iter()
        .map(|&n| {
            let arg = 12.0 * (n as f64).sqrt() / (std::f64::consts::PI.sqrt() * sigma);
            let h = (arg.ln() / denom).sqrt();
            let p_h = (-h * h / (2.0 * k * k)).exp();
            let expected_far_count = n as f64 * p_h;
            ScanRecord {
                n,
                h,
                t: 0.5 * h + sigma * sigma * h / (2.0 * k * k),
                p_h,
                expected_far_count,
                feasible: expected_far_count >= 128.0,
            }
        })
        .collect();
    Ok(BernoulliScanPlan {
        k,
        sigma,
        epsilon,
        delta,
        zeta,
        records,
    })
}

/// Output of [`bernoulli_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliScan {
    /// The schedule.
    pub plan: BernoulliScanPlan,
    /// `E[W2]` at each simulated `n`.
    pub w2: RateSeries,
    /// `E[W2^2]` at each simulated `n`.
    pub w2sq: RateSeries,
    /// Sample sizes skipped as infeasible.
    pub skipped: Vec<u64>,
}

/// Two-point lower-bound scan: for each `n`, separation `h(n)` and a Monte
/// Carlo estimate of `E[W2]` (and `E[W2^2]`).
///
/// With `enforce_feasibility`, sample sizes with `n p_h < 128` are skipped;
/// otherwise they are simulated and only flagged in the plan.
pub fn bernoulli_scan(
    k: f64,
    sigma: f64,
    epsilon: f64,
    n_list: &[u64],
    opts: &McOptions,
    seed: u64,
    enforce_feasibility: bool,
) -> Result<BernoulliScan> {
    let plan = bernoulli_scan_plan(k, sigma, epsilon, n_list)?;
    let mut w2 = RateSeries::default();
    let mut w2sq = RateSeries::default();
    let mut skipped = Vec::new();
    for rec in &plan.records {
        if enforce_feasibility && !rec.feasible {
            skipped.push(rec.n);
            continue;
        }
        let p = bernoulli_two_point(rec.h, k)?;
        let e = mc_expected_w2sq(&p, sigma, rec.n, opts, sweep_seed(seed, rec.n))?;
        let (m, se) = e.mapped(f64::sqrt);
        let trials = e.values.len();
        w2.points.push(RatePoint {
            n: rec.n,
            estimate: m,
            stderr: se,
            trials,
        });
        w2sq.points.push(RatePoint {
            n: rec.n,
            estimate: e.estimate,
            stderr: e.stderr,
            trials,
        });
    }
    Ok(BernoulliScan {
        plan,
        w2,
        w2sq,
        skipped,
    })
}

/// Family of base laws used by [`phase_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseFamily {
    /// Two-point law with separation following the lower-bound schedule.
    BernoulliScan {
        /// Slack exponent.
        epsilon: f64,
    },
    /// Two-point law with a fixed separation.
    FixedTwoPoint {
        /// Separation.
        h: f64,
    },
}

/// One row of a phase scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    /// Subgaussian scale.
    pub k: f64,
    /// Fit of `E[W2^2]` against `n`.
    pub fit: RateFit,
    /// The fitted series.
    pub series: RateSeries,
}

/// Phase scan across subgaussian scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScan {
    /// Rows in the order of the scale list.
    pub rows: Vec<PhaseRow>,
    /// Whether fitted slopes are nondecreasing in `K` (slower decay for larger scale).
    pub slopes_monotone: bool,
}

/// Fits the `E[W2^2]` rate for each scale in `k_list`.
pub fn phase_scan(
    k_list: &[f64],
    sigma: f64,
    family: PhaseFamily,
    n_list: &[u64],
    opts: &McOptions,
    seed: u64,
) -> Result<PhaseScan> {
    let mut rows = Vec::with_capacity(k_list.len());
    for (i, &k) in k_list.iter().enumerate() {
        let row_seed = derive_seed(seed, 1_000_003 + i as u64);
        let series = match family {
            PhaseFamily::BernoulliScan { epsilon } => {
                bernoulli_scan(k, sigma, epsilon, n_list, opts, row_seed, false)?.w2sq
            }
            PhaseFamily::FixedTwoPoint { h } => {
                let p = bernoulli_two_point(h, k)?;
                rate_series(&p, sigma, n_list, SweepQuantity::W2Squared, opts, row_seed)?
            }
        };
        let fit = fit_rate(&series)?;
        rows.push(PhaseRow { k, fit, series });
    }
    let mut order: Vec<&PhaseRow> = rows.iter().collect();
    order.sort_by(|a, b| a.k.total_cmp(&b.k));
    let slopes_monotone = order.windows(2).all(|w| w[1].fit.slope >= w[0].fit.slope);
    Ok(PhaseScan { rows, slopes_monotone })
}

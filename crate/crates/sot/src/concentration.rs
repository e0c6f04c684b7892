//! Variance-weighted empirical-CDF deviations and simulated frequencies of the
//! CDF-gap events used by the lower-bound constructions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{bernoulli_two_point, HardExampleSchedule};
use crate::dist_core::{draw_smoothed, empirical_from_counts, AtomicDistribution, EmpiricalMeasure, SmoothedMixture};
use crate::error::{invalid, Result};
use crate::rng::stream_rng;

/// Empirical CDF compared against a smoothed truth.
#[derive(Debug, Clone, Copy)]
pub enum EmpiricalCdf<'a> {
    /// Step CDF of a plain sample.
    Sample(&'a EmpiricalMeasure),
    /// Mixture CDF of a smoothed empirical measure built from `n` draws.
    Smoothed {
        /// The smoothed empirical measure.
        measure: &'a SmoothedMixture,
        /// Number of draws behind it.
        n: usize,
    },
}

impl EmpiricalCdf<'_> {
    /// Sample size.
    pub fn n(&self) -> usize {
        match self {
            EmpiricalCdf::Sample(s) => s.n(),
            EmpiricalCdf::Smoothed { n, .. } => *n,
        }
    }
}

fn weighted_deviation(f: f64, sf: f64, fn_value: f64, n: f64) -> f64 {
    let var = (1.0 / n).max(f.min(sf));
    (f - fn_value).abs() / var.sqrt()
}

/// `sup_t |F(t) - F_n(t)| / sqrt(max(1/n, min(F(t), 1 - F(t))))`.
///
/// For a plain sample the supremum is attained as a one-sided limit at a jump,
/// so both limits are evaluated at every distinct sample value. For a
/// smoothed empirical CDF the supremum is taken over the atoms, the midpoints
/// between consecutive atoms, and the quantile anchors `F^{-1}(k / (2n))`.
pub fn weighted_cdf_statistic(truth: &SmoothedMixture, empirical: EmpiricalCdf<'_>) -> Result<f64> {
    let n = empirical.n();
    if n == 0 {
        return invalid("empirical CDF needs at least one draw");
    }
    let nf = n as f64;
    let mut best = 0.0_f64;
    match empirical {
        EmpiricalCdf::Sample(sample) => {
            let xs = sample.samples();
            let mut i = 0;
            while i < xs.len() {
                let x = xs[i];
                let mut j = i;
                while j < xs.len() && xs[j] == x {
                    j += 1;
                }
                let (f, sf) = (truth.cdf(x), truth.sf(x));
                best = best
                    .max(weighted_deviation(f, sf, i as f64 / nf, nf))
                    .max(weighted_deviation(f, sf, j as f64 / nf, nf));
                i = j;
            }
        }
        EmpiricalCdf::Smoothed { measure, .. } => {
            let locs = measure.base().locations();
            let mut grid: Vec<f64> = locs.to_vec();
            grid.extend(locs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            for k in 1..2 * n {
                grid.push(truth.quantile(k as f64 / (2.0 * nf))?);
            }
            for t in grid {
                let dev = weighted_deviation(truth.cdf(t), truth.sf(t), measure.cdf(t), nf);
                best = best.max(dev);
            }
        }
    }
    Ok(best)
}

/// Which high-probability bound to compare the statistic against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationBound {
    /// Plain-sample form `(8 / sqrt(n)) log(n / delta)`.
    PlainSample,
    /// Smoothed form `(16 / sqrt(n)) log(2n / delta)`.
    Smoothed,
}

impl ConcentrationBound {
    /// Bound value at sample size `n` and failure probability `delta`.
    pub fn value(self, n: usize, delta: f64) -> f64 {
        let nf = n as f64;
        match self {
            ConcentrationBound::PlainSample => 8.0 / nf.sqrt() * (nf / delta).ln(),
            ConcentrationBound::Smoothed => 16.0 / nf.sqrt() * (2.0 * nf / delta).ln(),
        }
    }
}

/// How each replication's empirical CDF is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Draw `n` points from the smoothed truth and use their step CDF.
    Plain,
    /// Draw `n` atoms from the base law and smooth them with the same noise.
    SmoothedEmpirical,
}

/// One replication of a concentration experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// Replication index.
    pub replication: usize,
    /// Sample size.
    pub n: usize,
    /// Failure probability of the bound.
    pub delta: f64,
    /// Weighted supremum statistic.
    pub statistic: f64,
    /// Bound value.
    pub bound: f64,
    /// Whether the statistic exceeded the bound.
    pub violated: bool,
}

/// A batch of replications and its violation rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationBatch {
    /// Per-replication rows in replication order.
    pub rows: Vec<ConcentrationReport>,
    /// Fraction of replications violating the bound.
    pub violation_rate: f64,
}

/// Runs `replications` independent concentration experiments.
pub fn concentration_batch(
    truth: &SmoothedMixture,
    n: usize,
    delta: f64,
    replications: usize,
    seed: u64,
    mode: SampleMode,
    bound_kind: ConcentrationBound,
) -> Result<ConcentrationBatch> {
    if n == 0 || replications == 0 {
        return invalid("sample size and replications must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let bound = bound_kind.value(n, delta);
    let rows: Result<Vec<ConcentrationReport>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            let statistic = match mode {
                SampleMode::Plain => {
                    let sample = EmpiricalMeasure::new(draw_smoothed(truth, n, &mut rng))?;
                    weighted_cdf_statistic(truth, EmpiricalCdf::Sample(&sample))?
                }
                SampleMode::SmoothedEmpirical => {
                    let base = empirical_from_counts(truth.base(), n as u64, &mut rng)?;
                    let measure = SmoothedMixture::new(base, truth.sigma())?;
                    weighted_cdf_statistic(truth, EmpiricalCdf::Smoothed { measure: &measure, n })?
                }
            };
            Ok(ConcentrationReport {
                replication: rep,
                n,
                delta,
                statistic,
                bound,
                violated: statistic > bound,
            })
        })
        .collect();
    let rows = rows?;
    let violations = rows.iter().filter(|r| r.violated).count();
    Ok(ConcentrationBatch {
        violation_rate: violations as f64 / replications as f64,
        rows,
    })
}

/// Simulated frequency of a CDF-gap event against a one-sided lower threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    /// Whether the sample-size precondition holds.
    pub applicable: bool,
    /// Diagnostic when not applicable.
    pub note: Option<String>,
    /// Sample size per replication (absent when it does not fit in 64 bits).
    pub n: Option<u64>,
    /// Probe point.
    pub probe: f64,
    /// Gap threshold defining the event.
    pub gap_threshold: f64,
    /// Number of replications.
    pub replications: usize,
    /// Replications in which the event occurred.
    pub hits: usize,
    /// `hits / replications`.
    pub frequency: f64,
    /// Claimed lower bound on the event probability.
    pub claimed_probability: f64,
    /// Binomial standard error of the frequency.
    pub standard_error: f64,
    /// Pass iff `frequency >= claimed_probability - 3 * standard_error` (absent when not applicable).
    pub passed: Option<bool>,
}

fn not_applicable(note: String, n: Option<u64>, probe: f64, claimed: f64, replications: usize) -> FrequencyReport {
    FrequencyReport {
        applicable: false,
        note: Some(note),
        n,
        probe,
        gap_threshold: f64::NAN,
        replications,
        hits: 0,
        frequency: f64::NAN,
        claimed_probability: claimed,
        standard_error: f64::NAN,
        passed: None,
    }
}

/// Counts replications where `F_n(probe) - F(probe) >= threshold` for the
/// smoothed empirical CDF built from `n` draws of `p`.
#[allow(clippy::too_many_arguments)]
fn gap_frequency(
    p: &AtomicDistribution,
    sigma: f64,
    n: u64,
    probe: f64,
    threshold: f64,
    claimed: f64,
    replications: usize,
    seed: u64,
) -> Result<FrequencyReport> {
    let truth = SmoothedMixture::new(p.clone(), sigma)?;
    let f_probe = truth.cdf(probe);
    let hits: Result<Vec<bool>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            let base = empirical_from_counts(p, n, &mut rng)?;
            let fn_probe = SmoothedMixture::new(base, sigma)?.cdf(probe);
            Ok(fn_probe - f_probe >= threshold)
        })
        .collect();
    let hits = hits?.into_iter().filter(|h| *h).count();
    let frequency = hits as f64 / replications as f64;
    let standard_error = (frequency * (1.0 - frequency) / replications as f64).sqrt();
    Ok(FrequencyReport {
        applicable: true,
        note: None,
        n: Some(n),
        probe,
        gap_threshold: threshold,
        replications,
        hits,
        frequency,
        claimed_probability: claimed,
        standard_error,
        passed: Some(frequency >= claimed - 3.0 * standard_error),
    })
}

/// Probe point `h/2 + sigma^2 h / (2 K^2)` of the two-point lower bound.
pub fn two_point_probe(h: f64, k: f64, sigma: f64) -> f64 {
    0.5 * h + sigma * sigma * h / (2.0 * k * k)
}

/// Smallest sample size `n` with `n p_h >= 128`.
pub fn two_point_min_sample(h: f64, k: f64) -> u64 {
    let p = (-h * h / (2.0 * k * k)).exp();
    (128.0 / p).ceil() as u64
}

/// Frequency of `F_n(t) - F(t) >= exp(-h^2 / (4 K^2)) / sqrt(18 n)` for the
/// two-point law at the probe `t = h/2 + sigma^2 h / (2 K^2)`.
pub fn berry_esseen_event_frequency(
    h: f64,
    k: f64,
    sigma: f64,
    n: u64,
    replications: usize,
    seed: u64,
) -> Result<FrequencyReport> {
    if replications == 0 {
        return invalid("replications must be positive");
    }
    if !(sigma > 0.0) {
        return invalid("sigma must be positive");
    }
    let p = bernoulli_two_point(h, k)?;
    let p_h = (-h * h / (2.0 * k * k)).exp();
    if p_h >= 0.5 {
        return invalid("the far-atom weight must be below one half");
    }
    let probe = two_point_probe(h, k, sigma);
    let claimed = 1.0 / 16.0;
    if (n as f64) * p_h < 128.0 {
        return Ok(not_applicable(
            format!("n p_h = {} is below 128", n as f64 * p_h),
            Some(n),
            probe,
            claimed,
            replications,
        ));
    }
    let threshold = (-h * h / (4.0 * k * k)).exp() / (18.0 * n as f64).sqrt();
    gap_frequency(&p, sigma, n, probe, threshold, claimed, replications, seed)
}

/// Frequency of `F_n(t_k r_k) - F(t_k r_k) >= sqrt(p_{k+1} / n) / 2` at the
/// schedule's stage-`k` probe with `n = n_k`.
pub fn schedule_gap_dominance(
    schedule: &HardExampleSchedule,
    p: &AtomicDistribution,
    sigma: f64,
    k: usize,
    replications: usize,
    seed: u64,
) -> Result<FrequencyReport> {
    if replications == 0 {
        return invalid("replications must be positive");
    }
    let Some(rec) = schedule.record(k) else {
        return invalid(format!("stage {k} not in schedule"));
    };
    let claimed = 1.0 / 64.0;
    let Some(next) = schedule.record(k + 1) else {
        return Ok(not_applicable(
            format!("stage {} is beyond the schedule", k + 1),
            rec.n,
            rec.probe,
            claimed,
            replications,
        ));
    };
    let Some(n) = rec.n else {
        return Ok(not_applicable(
            format!("n_{k} = exp({}) does not fit in 64 bits", rec.log_n),
            None,
            rec.probe,
            claimed,
            replications,
        ));
    };
    let load = n as f64 * next.log_p.exp();
    if !(load >= 32768.0) {
        return Ok(not_applicable(
            format!("n_k p_(k+1) = {load} is below 32768"),
            Some(n),
            rec.probe,
            claimed,
            replications,
        ));
    }
    let threshold = 0.5 * (next.log_p - (n as f64).ln()).exp().sqrt();
    gap_frequency(p, sigma, n, rec.probe, threshold, claimed, replications, seed)
}

/// First stage whose gap event is feasible, if any.
pub fn first_feasible_stage(schedule: &HardExampleSchedule) -> Option<usize> {
    schedule.records.iter().find_map(|rec| {
        let next = schedule.record(rec.k + 1)?;
        let n = rec.n?;
        (n as f64 * next.log_p.exp() >= 32768.0).then_some(rec.k)
    })
}

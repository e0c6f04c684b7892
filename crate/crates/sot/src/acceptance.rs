//! The acceptance suite: fourteen numbered checks, each with a numeric
//! criterion and a wall-clock budget.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::concentration::{
    berry_esseen_event_frequency, concentration_batch, two_point_min_sample, ConcentrationBound, SampleMode,
};
use crate::constructions::{
    bernoulli_two_point, chi2_hard_example, chi2_hard_ratio, mgf_check_with, w2_hard_example,
};
use crate::dist_core::{gaussian_tail_bound_check, AtomicDistribution, SmoothedMixture, SubgaussianProfile};
use crate::divergences::{
    chi2_mutual_information, default_truncation_radius, renyi_mutual_information, soft_covering_kl_bound,
    soft_covering_order,
};
use crate::error::Result;
use crate::experiments::{bernoulli_scan, fit_rate, rate_series, McOptions, SweepQuantity};
use crate::functional_ineq::{lsi_lower_bound, t2_lower_bound};
use crate::rng::{derive_seed, stream_rng};
use crate::tail_bounds::{alpha_exponent, beta_exponent, tail_density_inequality_probe};
use crate::transport::{sorted_coupling_w2sq, w2_crossing_lower_bound, w2_squared};

/// Default master seed of the suite.
pub const DEFAULT_SEED: u64 = 20261016;

/// Suite configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AcceptanceOptions {
    /// Master seed; each criterion derives its own stream from it.
    pub seed: u64,
    /// Reduced sample sizes for a fast smoke run.
    pub quick: bool,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            quick: false,
        }
    }
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    /// Criterion number (1 to 14).
    pub id: u8,
    /// Short name.
    pub name: String,
    /// Whether the numeric criterion held.
    pub criterion_met: bool,
    /// Whether the run finished inside its time budget.
    pub within_time: bool,
    /// `criterion_met && within_time`.
    pub passed: bool,
    /// Wall-clock seconds.
    pub seconds: f64,
    /// Time budget in seconds.
    pub limit_seconds: f64,
    /// Measured quantities.
    pub detail: String,
}

impl CriterionOutcome {
    /// One-line summary.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} | {} | {:.2} s of {:.0} s | {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.limit_seconds,
            self.detail
        )
    }
}

/// Criterion numbers in order.
pub const CRITERIA: [u8; 14] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];

fn meta(id: u8) -> (&'static str, f64) {
    match id {
        1 => ("closed-form transport", 5.0),
        2 => ("sorted-coupling oracle", 180.0),
        3 => ("crossing lower bound", 60.0),
        4 => ("parametric regime slope", 300.0),
        5 => ("non-parametric slowdown", 600.0),
        6 => ("chi-square mutual information phase", 120.0),
        7 => ("soft-covering dominance", 300.0),
        8 => ("weighted concentration", 120.0),
        9 => ("tail-density tightness", 30.0),
        10 => ("Berry-Esseen event", 180.0),
        11 => ("log-Sobolev divergence", 10.0),
        12 => ("transport-entropy divergence", 120.0),
        13 => ("subgaussianity", 30.0),
        14 => ("exponent identities", 1.0),
        _ => ("unknown", 0.0),
    }
}

/// Runs one criterion.
pub fn run_criterion(id: u8, opts: &AcceptanceOptions) -> CriterionOutcome {
    let (name, limit) = meta(id);
    let seed = derive_seed(opts.seed, id as u64);
    let start = Instant::now();
    let result = match id {
        1 => closed_form_transport(seed),
        2 => coupling_oracle(seed, opts.quick),
        3 => crossing_bound(seed, opts.quick),
        4 => parametric_regime(seed, opts.quick),
        5 => nonparametric_slowdown(seed, opts.quick),
        6 => chi2_phase(),
        7 => soft_covering(seed, opts.quick),
        8 => weighted_concentration(seed, opts.quick),
        9 => tail_density(),
        10 => berry_esseen(seed, opts.quick),
        11 => lsi_divergence(),
        12 => t2_divergence(),
        13 => subgaussianity(),
        14 => exponent_identities(),
        _ => Ok((false, "no such criterion".to_string())),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (criterion_met, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    let within_time = seconds <= limit;
    CriterionOutcome {
        id,
        name: name.to_string(),
        criterion_met,
        within_time,
        passed: criterion_met && within_time,
        seconds,
        limit_seconds: limit,
        detail,
    }
}

/// Runs every criterion in order.
pub fn run_all(opts: &AcceptanceOptions) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|&id| run_criterion(id, opts)).collect()
}

type Check = Result<(bool, String)>;

fn sci_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn random_mixture(rng: &mut ChaCha8Rng, atoms: usize, spread: f64, sigma: f64) -> Result<SmoothedMixture> {
    let pts: Vec<(f64, f64)> = (0..atoms)
        .map(|_| (rng.random_range(-spread..spread), rng.random_range(0.1..1.0)))
        .collect();
    SmoothedMixture::new(AtomicDistribution::from_weights(&pts)?, sigma)
}

fn closed_form_transport(seed: u64) -> Check {
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let m1 = rng.random_range(-5.0..5.0);
        let m2 = rng.random_range(-5.0..5.0);
        let s = rng.random_range(0.5..2.0);
        let e = w2_squared(&SmoothedMixture::gaussian(m1, s)?, &SmoothedMixture::gaussian(m2, s)?, 1e-10)?;
        worst = worst.max((e.total - (m1 - m2) * (m1 - m2)).abs());
    }
    Ok((worst <= 1e-6, format!("max abs error {worst:.3e} over 10 pairs")))
}

fn coupling_oracle(seed: u64, quick: bool) -> Check {
    let (cases, pairs) = if quick { (5, 1_000_000) } else { (20, 10_000_000) };
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for case in 0..cases {
        let na = rng.random_range(2..=4);
        let nb = rng.random_range(2..=4);
        let sa = rng.random_range(0.5..1.5);
        let sb = rng.random_range(0.5..1.5);
        let a = random_mixture(&mut rng, na, 3.0, sa)?;
        let b = random_mixture(&mut rng, nb, 3.0, sb)?;
        let exact = w2_squared(&a, &b, 1e-9)?.total;
        let mc = sorted_coupling_w2sq(&a, &b, pairs, 10, derive_seed(seed, case))?;
        let z = (exact - mc.estimate).abs() / mc.stderr;
        worst = worst.max(z);
        if z > 4.0 {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!("{cases} pairs, {pairs} coupled draws each; max |z| = {worst:.2}, {failures} beyond 4 SE"),
    ))
}

fn crossing_bound(seed: u64, quick: bool) -> Check {
    let target = if quick { 200 } else { 1000 };
    let mut rng = stream_rng(seed, 0);
    let (mut cases, mut attempts, mut violations) = (0, 0, 0);
    let mut min_margin = f64::INFINITY;
    while cases < target && attempts < 200 * target {
        attempts += 1;
        let na = rng.random_range(1..=3);
        let nb = rng.random_range(1..=3);
        let sa = rng.random_range(0.2..1.5);
        let sb = rng.random_range(0.2..1.5);
        let a = random_mixture(&mut rng, na, 1.5, sa)?;
        let shift = rng.random_range(1.0..6.0);
        let b = SmoothedMixture::new(random_mixture(&mut rng, nb, 1.5, sb)?.base().shifted(shift), sb)?;
        let t = rng.random_range(-4.0..6.0);
        let Some(bound) = w2_crossing_lower_bound(&a, &b, t) else {
            continue;
        };
        let w2 = w2_squared(&a, &b, 1e-10)?.total;
        cases += 1;
        min_margin = min_margin.min(w2 - bound);
        if w2 + 1e-9 < bound {
            violations += 1;
        }
    }
    Ok((
        cases == target && violations == 0,
        format!("{cases} premise-satisfying cases ({attempts} drawn), {violations} violations, min margin {min_margin:.3e}"),
    ))
}

fn parametric_regime(seed: u64, _quick: bool) -> Check {
    let trials = 200;
    let p = bernoulli_two_point(2.0, 0.5)?;
    let ns: Vec<u64> = (7..=13).map(|e| 1u64 << e).collect();
    let series = rate_series(&p, 1.0, &ns, SweepQuantity::W2Squared, &McOptions::fixed(trials, 1e-12), seed)?;
    let fit = fit_rate(&series)?;
    Ok((
        (fit.slope + 1.0).abs() <= 0.15,
        format!("E[W2^2] slope {:.4} +- {:.4} (target -1 +- 0.15)", fit.slope, fit.slope_stderr),
    ))
}

fn nonparametric_slowdown(seed: u64, quick: bool) -> Check {
    let trials = if quick { 50 } else { 200 };
    let ns: Vec<u64> = (10..=16).map(|e| 1u64 << e).collect();
    let scan = bernoulli_scan(2.0, 1.0, 0.02, &ns, &McOptions::fixed(trials, 1e-12), seed, false)?;
    let fit = fit_rate(&scan.w2)?;
    let feasible = scan.plan.records.iter().filter(|r| r.feasible).count();
    let ok = fit.slope >= -0.46 && fit.slope <= -0.2676;
    Ok((
        ok,
        format!(
            "E[W2] slope {:.4} +- {:.4} (band [-0.46, -0.2676]); delta {:.6}; {feasible}/{} points with n p_h >= 128",
            fit.slope,
            fit.slope_stderr,
            scan.plan.delta,
            scan.plan.records.len()
        ),
    ))
}

fn chi2_phase() -> Check {
    let tol = 1e-10;
    let p = bernoulli_two_point(2.0, 0.5)?;
    let r = default_truncation_radius(&p, 1.0, tol);
    let base = chi2_mutual_information(&p, 1.0, Some(r), tol)?.value;
    let doubled = chi2_mutual_information(&p, 1.0, Some(2.0 * r), tol)?.value;
    let rel = (doubled - base).abs() / base;
    let (c, _) = chi2_hard_ratio(2.0)?;
    let hard = chi2_hard_example(2.0, c, 10)?;
    let (_, hi) = hard.support();
    let mi = chi2_mutual_information(&hard, 1.0, Some(hi + 10.0), tol)?;
    // Atoms are stored in increasing location, so index k is the stage-k atom.
    let inc = &mi.partial_by_atom;
    let reference = inc[2];
    let min_later = inc[3..=10].iter().copied().fold(f64::INFINITY, f64::min);
    let ok = rel < 1e-3 && min_later >= 0.5 * reference;
    Ok((
        ok,
        format!(
            "(a) I = {base:.6e}, relative change on doubling R {rel:.2e}; (b) increment k=2 {reference:.4}, min over k=3..10 {min_later:.4}"
        ),
    ))
}

fn soft_covering(seed: u64, quick: bool) -> Check {
    let trials = if quick { 50 } else { 200 };
    let ns = [256u64, 1024, 4096];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (k, h)) in [(0.5, 2.0), (2.0, 3.0)].into_iter().enumerate() {
        let p = bernoulli_two_point(h, k)?;
        let series = rate_series(
            &p,
            1.0,
            &ns,
            SweepQuantity::Kl,
            &McOptions::fixed(trials, 1e-12),
            derive_seed(seed, i as u64),
        )?;
        let mut worst_gap = f64::INFINITY;
        for pt in &series.points {
            let lambda = soft_covering_order(pt.n)?;
            let i_lambda = renyi_mutual_information(&p, 1.0, lambda, None, 1e-10)?.value;
            let bound = soft_covering_kl_bound(i_lambda, lambda, pt.n)?;
            let gap = bound + 3.0 * pt.stderr - pt.estimate;
            worst_gap = worst_gap.min(gap);
            ok &= gap >= 0.0;
        }
        let fit = fit_rate(&series)?;
        ok &= (-1.25..=-0.80).contains(&fit.slope);
        parts.push(format!(
            "K={k}: min(bound + 3SE - E[KL]) {worst_gap:.3e}, slope {:.4}",
            fit.slope
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn weighted_concentration(seed: u64, quick: bool) -> Check {
    let reps = if quick { 100 } else { 500 };
    let truth = SmoothedMixture::gaussian(0.0, 1.0)?;
    let batch = concentration_batch(&truth, 1024, 0.1, reps, seed, SampleMode::Plain, ConcentrationBound::Smoothed)?;
    let max = batch.rows.iter().map(|r| r.statistic).fold(0.0, f64::max);
    Ok((
        batch.violation_rate <= 0.1,
        format!(
            "violation rate {:.3} over {reps} replications; max statistic {max:.4} vs bound {:.4}",
            batch.violation_rate, batch.rows[0].bound
        ),
    ))
}

fn tail_density() -> Check {
    let k = 2.0;
    let beta = beta_exponent(k)?;
    let profile = SubgaussianProfile::new(k, 1.0, 0.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [20.0, 30.0] {
        let p = bernoulli_two_point(h, k)?;
        let r = (k * k + 1.0) * h / (2.0 * k * k);
        let rep = tail_density_inequality_probe(&p, &profile, 0.1, &[r])?;
        let ratio = rep.rows[0].ratio;
        ok &= (ratio - beta).abs() <= 0.1 * beta;
        parts.push(format!("h={h}: ratio {ratio:.4}"));
    }
    Ok((ok, format!("{} (beta {beta:.4}, tolerance {:.4})", parts.join(", "), 0.1 * beta)))
}

fn berry_esseen(seed: u64, quick: bool) -> Check {
    let reps = if quick { 500 } else { 2000 };
    let n = 2 * two_point_min_sample(3.0, 2.0);
    let rep = berry_esseen_event_frequency(3.0, 2.0, 1.0, n, reps, seed)?;
    Ok((
        rep.passed == Some(true),
        format!(
            "n = {n}, frequency {:.4} +- {:.4} vs 1/16 over {reps} replications",
            rep.frequency, rep.standard_error
        ),
    ))
}

fn lsi_divergence() -> Check {
    let values: Vec<f64> = [5.0, 10.0, 15.0, 20.0]
        .iter()
        .map(|&h| lsi_lower_bound(h, 2.0, 1.0, None, None).map(|p| p.lsi_lower))
        .collect::<Result<_>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let growth = values[2] / values[1] >= 2.0 && values[3] / values[2] >= 2.0;
    Ok((
        increasing && growth,
        format!("bounds at h = 5, 10, 15, 20: {}", sci_list(&values)),
    ))
}

fn t2_divergence() -> Check {
    let ratios: Vec<f64> = [10.0, 20.0, 30.0]
        .iter()
        .map(|&h| t2_lower_bound(h, 2.0, 1.0, 0.1).map(|p| p.ratio))
        .collect::<Result<_>>()?;
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let growth = ratios[2] / ratios[0];
    Ok((
        increasing && growth >= 10.0,
        format!("ratios at h = 10, 20, 30: {}; final/initial {growth:.3e}", sci_list(&ratios)),
    ))
}

fn subgaussianity() -> Check {
    let k = 2.0;
    let grid: Vec<f64> = (-500..=500).map(|i| i as f64 * 0.01).collect();
    let (c, _) = chi2_hard_ratio(k)?;
    let chi2_example = chi2_hard_example(k, c, 10)?;
    let chi2_wide = chi2_hard_example(k, 3.0, 12)?;
    let (w2_example, _) = w2_hard_example(k, 1.0, 4)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut ok = true;
    for p in [&chi2_example, &chi2_wide, &w2_example] {
        let strict = mgf_check_with(p, k, &grid, true, 0.0)?;
        let weak = mgf_check_with(p, k, &grid, false, std::f64::consts::LN_2)?;
        worst = worst.max(strict.max_excess).max(weak.max_excess);
        ok &= strict.passed && weak.passed;
    }
    let l_grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
    let tail = gaussian_tail_bound_check(&l_grid)?;
    ok &= tail.passed();
    Ok((
        ok,
        format!(
            "max MGF excess {worst:.3e} (allowed 1e-9); Gaussian tail max log excess {:.3e}",
            tail.max_log_excess
        ),
    ))
}

fn exponent_identities() -> Check {
    // alpha_exponent itself verifies 2 alpha = 1 / (2 - beta) to 1e-12.
    for i in 0..50 {
        let k = 10f64.powf(-1.5 + 3.0 * i as f64 / 49.0);
        alpha_exponent(k, 1.0)?;
    }
    let at_equal = alpha_exponent(1.0, 1.0)?;
    let large = alpha_exponent(1e8, 1.0)?;
    let infinite = alpha_exponent(f64::INFINITY, 1.0)?;
    let ok = (at_equal - 0.5).abs() <= 1e-12 && (large - 0.25).abs() <= 1e-12 && infinite == 0.25;
    Ok((
        ok,
        format!("identity held at 50 scales; alpha(K = sigma) = {at_equal}, alpha(1e8) = {large}, alpha(inf) = {infinite}"),
    ))
}

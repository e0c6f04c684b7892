//! Distribution families used as hard examples, with checks of their
//! subgaussian credentials.

use serde::Serialize;

use crate::dist_core::AtomicDistribution;
use crate::error::{invalid, Error, Result};
use crate::special::{log1m_exp, log_sum_exp, LN_SQRT_2PI};

/// Two-point law `(1 - p) delta_0 + p delta_h` with `p = exp(-h^2 / (2 K^2))`.
pub fn bernoulli_two_point(h: f64, k: f64) -> Result<AtomicDistribution> {
    if !(h > 0.0 && h.is_finite()) || !(k > 0.0 && k.is_finite()) {
        return invalid("two-point law needs finite h > 0 and K > 0");
    }
    let log_p = -h * h / (2.0 * k * k);
    if log_p >= 0.0 || log_p.exp() >= 1.0 {
        return invalid("h is too small: the far atom would carry all the mass");
    }
    AtomicDistribution::new(vec![(0.0, log1m_exp(log_p)), (h, log_p)])
}

/// `ln p` for the two-point law at separation `h` and scale `K`.
pub fn two_point_log_weight(h: f64, k: f64) -> f64 {
    -h * h / (2.0 * k * k)
}

/// Weight prefactor for the geometric hard example: the smallest of the four
/// conditions that make the law `K`-subgaussian for every ratio above two.
pub fn geometric_weight_prefactor(k: f64) -> f64 {
    let e2 = (-1.0 / (2.0 * k * k)).exp();
    let e8 = (-1.0 / (8.0 * k * k)).exp();
    let one_m = 1.0 - e2;
    (1.0_f64 / 24.0)
        .min(one_m * one_m / (2.0 * e2))
        .min(0.5 * (1.0 - e8) * one_m)
        .min(0.5 * one_m)
}

/// Geometric ratio and window half-width making the chi-square hard example diverge.
///
/// Returns `(c, delta)` where `c` exceeds both `1/y_-` and `y_+` (the roots of
/// `(l/2) y^2 + y - 1/(2K^2)` with `l = 1/(2K^2) - 1/2`) as well as 2, and
/// `delta = min(-l/2, 1/4)`. Requires `K > 1` in units of the noise scale.
pub fn chi2_hard_ratio(k: f64) -> Result<(f64, f64)> {
    if !(k > 1.0) {
        return invalid("the chi-square hard example needs K > 1 (unit noise)");
    }
    let l = 1.0 / (2.0 * k * k) - 0.5;
    let a = 0.5 * l;
    let c0 = -1.0 / (2.0 * k * k);
    let disc = 1.0 - 4.0 * a * c0;
    if disc <= 0.0 {
        // The quadratic is negative everywhere; any ratio above two works.
        return Ok((2.0 * (1.0 + 1e-6), (-l / 2.0).min(0.25)));
    }
    let sq = disc.sqrt();
    // a < 0: roots are (-1 +- sq) / (2a); both positive.
    let r1 = (-1.0 + sq) / (2.0 * a);
    let r2 = (-1.0 - sq) / (2.0 * a);
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    let c = (1.0 / lo).max(hi).max(2.0) * (1.0 + 1e-6);
    Ok((c, (-l / 2.0).min(0.25)))
}

/// Geometric hard example: atoms `0, 1, c, c^2, ...` with weights
/// `c1 exp(-r^2 / (2 K^2))`, truncated after `k_max` non-zero atoms and the
/// remaining mass folded into the atom at zero.
pub fn chi2_hard_example(k: f64, c: f64, k_max: usize) -> Result<AtomicDistribution> {
    if !(k > 1.0) {
        return invalid("K must exceed the unit noise scale");
    }
    if !(c > 2.0) {
        return invalid("ratio c must exceed 2");
    }
    let c1 = geometric_weight_prefactor(k);
    let mut atoms = Vec::with_capacity(k_max + 1);
    let mut tail = Vec::with_capacity(k_max);
    let mut r = 1.0_f64;
    for _ in 0..k_max {
        if !r.is_finite() {
            return invalid("atom locations overflow; reduce k_max");
        }
        let lw = c1.ln() - r * r / (2.0 * k * k);
        atoms.push((r, lw));
        tail.push(lw);
        r *= c;
    }
    let log_tail = log_sum_exp(&tail);
    if log_tail >= 0.0 {
        return Err(Error::Numeric("far atoms carry all the mass".into()));
    }
    atoms.push((0.0, log1m_exp(log_tail)));
    AtomicDistribution::new(atoms)
}

/// One stage of the super-geometric hard-example schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRecord {
    /// Stage index (starting at 1).
    pub k: usize,
    /// Growth factor `M^k`.
    pub c: f64,
    /// Atom location.
    pub r: f64,
    /// Probe multiplier `(c + 1)(1 + kappa) / 2`.
    pub t: f64,
    /// Log-weight of the atom.
    pub log_p: f64,
    /// Probe point `t * r`.
    pub probe: f64,
    /// Natural log of the target sample size.
    pub log_n: f64,
    /// Target sample size when it fits in 64 bits.
    pub n: Option<u64>,
}

/// Bookkeeping for the super-geometric hard example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardExampleSchedule {
    /// Subgaussian scale.
    pub k: f64,
    /// Noise scale.
    pub sigma: f64,
    /// Squared scale ratio `sigma^2 / K^2`.
    pub kappa: f64,
    /// Base growth factor.
    pub m: f64,
    /// Weight prefactor.
    pub weight_constant: f64,
    /// Interval upper-bound constant used for sample sizes.
    pub c_u: f64,
    /// Per-stage records.
    pub records: Vec<ScheduleRecord>,
}

impl HardExampleSchedule {
    /// Record for stage `k`, if present.
    pub fn record(&self, k: usize) -> Option<&ScheduleRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    /// Interval exponent `(t^2 - c kappa - c)` for stage `k`.
    pub fn exponent_factor(&self, rec: &ScheduleRecord) -> f64 {
        rec.t * rec.t - rec.c * self.kappa - rec.c
    }
}

/// Base growth factor `max(sqrt(2/kappa), (kappa + 3)/(1 - kappa), 3)`.
pub fn growth_factor(kappa: f64) -> f64 {
    (2.0 / kappa).sqrt().max((kappa + 3.0) / (1.0 - kappa)).max(3.0)
}

/// Super-geometric hard example and its schedule for `sigma < K`.
pub fn w2_hard_example(
    k: f64,
    sigma: f64,
    k_max: usize,
) -> Result<(AtomicDistribution, HardExampleSchedule)> {
    if !(sigma > 0.0 && k > 0.0) {
        return invalid("K and sigma must be positive");
    }
    if sigma >= k {
        return invalid("the hard example requires sigma < K");
    }
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    let kappa = sigma * sigma / (k * k);
    let m = growth_factor(kappa);
    // Locations r_k = M^{k(k-1)/2}; weights C/(sqrt(2 pi) K) exp(-r^2/(2K^2)).
    let loc = |idx: usize| m.powf((idx * (idx - 1)) as f64 / 2.0);
    let log_shape = |r: f64| -LN_SQRT_2PI - k.ln() - r * r / (2.0 * k * k);
    let mut shape_terms = Vec::new();
    let mut idx = 1;
    loop {
        let r = loc(idx);
        let v = log_shape(r);
        shape_terms.push(v);
        if v < -800.0 || !r.is_finite() || idx > 64 {
            break;
        }
        idx += 1;
    }
    let weight_constant = (0.5_f64).ln() - log_sum_exp(&shape_terms);
    let log_c = weight_constant;
    let mut atoms = Vec::with_capacity(k_max + 1);
    let mut records = Vec::with_capacity(k_max);
    let mut tail = Vec::with_capacity(k_max);
    for i in 1..=k_max {
        let r = loc(i);
        if !r.is_finite() {
            return invalid("atom locations overflow; reduce k_max");
        }
        let log_p = log_c + log_shape(r);
        atoms.push((r, log_p));
        tail.push(log_p);
        let c = m.powi(i as i32);
        let t = 0.5 * (c + 1.0) * (1.0 + kappa);
        records.push(ScheduleRecord {
            k: i,
            c,
            r,
            t,
            log_p,
            probe: t * r,
            log_n: f64::NAN,
            n: None,
        });
    }
    atoms.push((0.0, log1m_exp(log_sum_exp(&tail))));
    let dist = AtomicDistribution::new(atoms)?;
    let mut schedule = HardExampleSchedule {
        k,
        sigma,
        kappa,
        m,
        weight_constant: log_c.exp(),
        c_u: f64::NAN,
        records,
    };
    let mut c_u = 0.0_f64;
    for i in 1..=k_max {
        let b = crate::tail_bounds::interval_prob_bounds(&schedule, &dist, sigma, i)?;
        c_u = c_u.max(b.c_u);
    }
    schedule.c_u = c_u;
    for rec in &mut schedule.records {
        let f = rec.t * rec.t - rec.c * kappa - rec.c;
        let r2 = (rec.r - 2.0) * (rec.r - 2.0);
        let log_n = -(4.0 * c_u * c_u).ln() + f * r2 / (sigma * sigma)
            - rec.c * rec.c * rec.r * rec.r / (2.0 * k * k);
        rec.log_n = log_n;
        rec.n = if log_n < 0.0 {
            Some(0)
        } else if log_n < 63.0 * std::f64::consts::LN_2 {
            Some(log_n.exp().floor() as u64)
        } else {
            None
        };
    }
    Ok((dist, schedule))
}

/// Report of [`mgf_subgaussian_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfReport {
    /// Largest value of `log E[exp(a (S - centre))] - K^2 a^2 / 2 - log_prefactor`.
    pub max_excess: f64,
    /// Grid point where it occurs.
    pub argmax: f64,
    /// Whether `max_excess <= 1e-9`.
    pub passed: bool,
}

/// Centered moment-generating-function check against `exp(K^2 a^2 / 2)`.
pub fn mgf_subgaussian_check(p: &AtomicDistribution, k: f64, alpha_grid: &[f64]) -> Result<MgfReport> {
    mgf_check_with(p, k, alpha_grid, true, 0.0)
}

/// Generalized MGF check: optionally uncentered and with a multiplicative prefactor.
pub fn mgf_check_with(
    p: &AtomicDistribution,
    k: f64,
    alpha_grid: &[f64],
    centered: bool,
    log_prefactor: f64,
) -> Result<MgfReport> {
    if alpha_grid.iter().any(|a| !a.is_finite()) {
        return invalid("alpha grid must be finite");
    }
    let centre = if centered { p.mean() } else { 0.0 };
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    let mut terms = vec![0.0; p.len()];
    for &a in alpha_grid {
        for (slot, (x, lw)) in terms.iter_mut().zip(p.atoms()) {
            *slot = lw + a * (x - centre);
        }
        let g = log_sum_exp(&terms) - 0.5 * k * k * a * a - log_prefactor;
        if g > best.0 {
            best = (g, a);
        }
    }
    Ok(MgfReport {
        max_excess: best.0,
        argmax: best.1,
        passed: best.0 <= 1e-9,
    })
}

/// Successive truncations of `E[exp(a X^2)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpSquareReport {
    /// `ln E[exp(a X^2)]` over all atoms.
    pub log_value: f64,
    /// The value itself, `+inf` on overflow.
    pub value: f64,
    /// Whether the value overflowed.
    pub overflow: bool,
    /// `ln` of the partial sums over atoms sorted by `|x|`.
    pub log_partial_sums: Vec<f64>,
    /// Differences between successive partial sums (linear scale, may be infinite).
    pub deltas: Vec<f64>,
}

/// Discrete evaluation of `E[exp(a X^2)]` in log-space with successive truncations.
pub fn exp_square_moment(p: &AtomicDistribution, a: f64) -> Result<ExpSquareReport> {
    if !a.is_finite() {
        return invalid("a must be finite");
    }
    let mut atoms: Vec<(f64, f64)> = p.atoms().collect();
    atoms.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
    let mut partial = Vec::with_capacity(atoms.len());
    let mut acc = crate::special::LogSumAcc::new();
    let mut terms = Vec::with_capacity(atoms.len());
    for (x, lw) in atoms {
        let t = lw + a * x * x;
        terms.push(t);
        acc.add(t);
        partial.push(acc.value());
    }
    let deltas = terms.iter().skip(1).map(|t| t.exp()).collect();
    let log_value = acc.value();
    let value = log_value.exp();
    Ok(ExpSquareReport {
        log_value,
        value,
        overflow: !value.is_finite(),
        log_partial_sums: partial,
        deltas,
    })
}

/// Solves the perturbation equation defining `delta` for the two-point scan.
///
/// With `q = sigma^2 / K^2`, finds `delta` in `(0, (1+q)/(1+3q))` such that
/// `(1+d)(1+q)^2 / (2(1-d)(1+q) - 4 d q) = (1+q)/2 + 2 eps` by bisection to `1e-10`.
pub fn solve_delta(k: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    if !(k > 0.0 && sigma > 0.0) {
        return invalid("K and sigma must be positive");
    }
    if !(epsilon > 0.0) {
        return invalid("epsilon must be positive");
    }
    let q = sigma * sigma / (k * k);
    let target = (1.0 + q) / 2.0 + 2.0 * epsilon;
    let lhs = |d: f64| (1.0 + d) * (1.0 + q) * (1.0 + q) / (2.0 * (1.0 - d) * (1.0 + q) - 4.0 * d * q);
    let mut lo = 0.0;
    let mut hi = (1.0 + q) / (1.0 + 3.0 * q);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let v = lhs(mid);
        if v < target && v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

//! Atomic distributions, their Gaussian smoothings, empirical measures and sampling.
//!
//! Weights are stored as natural logarithms throughout, so distributions whose
//! atoms carry masses like `exp(-r^2 / 2K^2)` for very large `r` stay exact.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::special::{
    log_sum_exp, norm_log_cdf, norm_log_interval, norm_log_interval_width, norm_log_pdf, norm_log_sf, LogSumAcc,
};

/// Tolerance on `logsumexp(log_weights)` for a distribution to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// JSON form of a single atom.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AtomJson {
    /// Location.
    pub x: f64,
    /// Natural log of the weight.
    pub logw: f64,
}

/// JSON form of an atomic distribution, optionally with a smoothing scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistributionJson {
    /// Atoms in any order.
    pub atoms: Vec<AtomJson>,
    /// Gaussian smoothing scale, present for smoothed mixtures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Finite discrete distribution with strictly increasing locations and positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionJson", into = "DistributionJson")]
pub struct AtomicDistribution {
    locs: Vec<f64>,
    logw: Vec<f64>,
}

impl TryFrom<DistributionJson> for AtomicDistribution {
    type Error = Error;

    fn try_from(value: DistributionJson) -> Result<Self> {
        if value.sigma.is_some() {
            return invalid("atomic distribution JSON must not carry `sigma`");
        }
        AtomicDistribution::new(value.atoms.iter().map(|a| (a.x, a.logw)).collect())
    }
}

impl From<AtomicDistribution> for DistributionJson {
    fn from(value: AtomicDistribution) -> Self {
        DistributionJson {
            atoms: value.atom_json(),
            sigma: None,
        }
    }
}

impl AtomicDistribution {
    /// Builds a distribution from `(location, log_weight)` pairs.
    ///
    /// Atoms are sorted and duplicate locations merged by adding weights. The
    /// weights must already sum to one within [`NORMALIZATION_TOL`].
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let d = Self::assemble(atoms)?;
        let total = log_sum_exp(&d.logw);
        if total.abs() > NORMALIZATION_TOL {
            return invalid(format!(
                "log-weights sum to exp({total:e}) instead of one"
            ));
        }
        Ok(d)
    }

    /// Builds a distribution from unnormalized log-weights, renormalizing them.
    pub fn from_unnormalized(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut d = Self::assemble(atoms)?;
        let total = log_sum_exp(&d.logw);
        if !total.is_finite() {
            return invalid("total weight is zero or infinite");
        }
        for lw in &mut d.logw {
            *lw -= total;
        }
        Ok(d)
    }

    /// Builds a distribution from linear weights, renormalizing them.
    pub fn from_weights(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.iter().any(|(_, w)| !(*w > 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and strictly positive");
        }
        Self::from_unnormalized(atoms.iter().map(|&(x, w)| (x, w.ln())).collect())
    }

    /// Unit mass at `x`.
    pub fn point_mass(x: f64) -> Self {
        Self {
            locs: vec![x],
            logw: vec![0.0],
        }
    }

    fn assemble(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("distribution needs at least one atom");
        }
        for (x, lw) in &atoms {
            if !x.is_finite() {
                return invalid(format!("atom location {x} is not finite"));
            }
            if !lw.is_finite() {
                return invalid(format!("log-weight {lw} at {x} is not finite"));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
        let mut locs: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut logw: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, lw) in atoms {
            match locs.last() {
                Some(&last) if last == x => {
                    let w = logw.last_mut().expect("paired vectors");
                    *w = crate::special::log_add_exp(*w, lw);
                }
                _ => {
                    locs.push(x);
                    logw.push(lw);
                }
            }
        }
        Ok(Self { locs, logw })
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.locs.len()
    }

    /// Always false: a valid distribution has at least one atom.
    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    /// Atom locations, strictly increasing.
    pub fn locations(&self) -> &[f64] {
        &self.locs
    }

    /// Natural-log weights aligned with [`Self::locations`].
    pub fn log_weights(&self) -> &[f64] {
        &self.logw
    }

    /// Linear weights (may underflow to zero for extreme atoms).
    pub fn weights(&self) -> Vec<f64> {
        self.logw.iter().map(|l| l.exp()).collect()
    }

    /// Iterator over `(location, log_weight)`.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locs.iter().copied().zip(self.logw.iter().copied())
    }

    /// JSON atoms.
    pub fn atom_json(&self) -> Vec<AtomJson> {
        self.atoms().map(|(x, logw)| AtomJson { x, logw }).collect()
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, lw)| x * lw.exp()).sum()
    }

    /// Smallest and largest atom location.
    pub fn support(&self) -> (f64, f64) {
        (self.locs[0], self.locs[self.locs.len() - 1])
    }

    /// The distribution translated by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            locs: self.locs.iter().map(|x| x + c).collect(),
            logw: self.logw.clone(),
        }
    }

    /// The distribution scaled by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return invalid("scale must be positive and finite");
        }
        Ok(Self {
            locs: self.locs.iter().map(|x| x * s).collect(),
            logw: self.logw.clone(),
        })
    }

    /// `ln P(|X| >= r)`.
    pub fn log_abs_tail(&self, r: f64) -> f64 {
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.atoms() {
            if x.abs() >= r {
                acc.add(lw);
            }
        }
        acc.value()
    }

    /// Linear-space cumulative weights, used for categorical sampling.
    fn cumulative(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.len());
        let mut s = 0.0;
        for lw in &self.logw {
            s += lw.exp();
            c.push(s);
        }
        c
    }
}

/// Tail profile `P(|X| >= r) <= C exp(-r^2 / (2 K^2))` of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgaussianProfile {
    /// Subgaussian scale.
    pub k: f64,
    /// Tail constant, at least one.
    pub c: f64,
    /// Mean of the profiled distribution.
    pub mean: f64,
}

impl SubgaussianProfile {
    /// Validates and builds a profile.
    pub fn new(k: f64, c: f64, mean: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return invalid("profile scale K must be positive");
        }
        if !(c >= 1.0) || !c.is_finite() {
            return invalid("profile constant C must be at least one");
        }
        Ok(Self { k, c, mean })
    }

    /// Smallest valid tail constant for `dist` at scale `k`.
    ///
    /// The tail function of an atomic law is a step function, so the supremum
    /// of `P(|X| >= r) exp(r^2 / 2K^2)` is attained at an atom modulus.
    pub fn fit(dist: &AtomicDistribution, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return invalid("profile scale K must be positive");
        }
        let mut best = 0.0_f64;
        for &x in dist.locations() {
            let r = x.abs();
            let v = dist.log_abs_tail(r) + r * r / (2.0 * k * k);
            best = best.max(v);
        }
        if !best.is_finite() || best > 700.0 {
            return Err(Error::Numeric(format!(
                "tail constant exp({best}) overflows for K = {k}"
            )));
        }
        Self::new(k, best.exp().max(1.0), dist.mean())
    }

    /// Default profile used for certified tail remainders.
    ///
    /// The scale is half the largest atom modulus (at least one half) measured
    /// in units of `unit`, with the constant fitted to the atoms.
    pub fn default_for(dist: &AtomicDistribution, unit: f64) -> Result<Self> {
        let scaled = dist.scaled(1.0 / unit)?;
        let rmax = scaled
            .locations()
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut k = (0.5 * rmax).max(0.5);
        loop {
            match Self::fit(&scaled, k) {
                Ok(p) => return Ok(p),
                Err(_) if k < 1e12 => k *= 2.0,
                Err(e) => return Err(e),
            }
        }
    }

    /// Checks the tail inequality at every grid radius; returns the first violation.
    pub fn verify_on(&self, dist: &AtomicDistribution, r_grid: &[f64]) -> Option<f64> {
        r_grid.iter().copied().find(|&r| {
            let lhs = dist.log_abs_tail(r);
            let rhs = self.c.ln() - r * r / (2.0 * self.k * self.k);
            lhs > rhs + 1e-12
        })
    }
}

/// An atomic distribution convolved with `N(0, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionJson", into = "DistributionJson")]
pub struct SmoothedMixture {
    base: AtomicDistribution,
    sigma: f64,
}

impl TryFrom<DistributionJson> for SmoothedMixture {
    type Error = Error;

    fn try_from(value: DistributionJson) -> Result<Self> {
        let sigma = value
            .sigma
            .ok_or_else(|| Error::InvalidInput("smoothed mixture JSON needs `sigma`".into()))?;
        let base = AtomicDistribution::new(value.atoms.iter().map(|a| (a.x, a.logw)).collect())?;
        SmoothedMixture::new(base, sigma)
    }
}

impl From<SmoothedMixture> for DistributionJson {
    fn from(value: SmoothedMixture) -> Self {
        DistributionJson {
            atoms: value.base.atom_json(),
            sigma: Some(value.sigma),
        }
    }
}

impl SmoothedMixture {
    /// Smooths `base` with noise scale `sigma > 0`.
    pub fn new(base: AtomicDistribution, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return invalid("sigma must be positive and finite");
        }
        Ok(Self { base, sigma })
    }

    /// `N(mu, sigma^2)` as a one-atom mixture.
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(AtomicDistribution::point_mass(mu), sigma)
    }

    /// The underlying atomic distribution.
    pub fn base(&self) -> &AtomicDistribution {
        &self.base
    }

    /// Noise scale.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Log-density `ln rho(t)`.
    pub fn log_pdf(&self, t: f64) -> f64 {
        let inv = 1.0 / self.sigma;
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.base.atoms() {
            let z = (t - x) * inv;
            acc.add(lw - 0.5 * z * z);
        }
        acc.value() - crate::special::LN_SQRT_2PI - self.sigma.ln()
    }

    /// Density `rho(t)`.
    pub fn pdf(&self, t: f64) -> f64 {
        self.log_pdf(t).exp()
    }

    /// `ln F(t)`.
    pub fn log_cdf(&self, t: f64) -> f64 {
        let inv = 1.0 / self.sigma;
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.base.atoms() {
            acc.add(lw + norm_log_cdf((t - x) * inv));
        }
        acc.value().min(0.0)
    }

    /// `ln (1 - F(t))`.
    pub fn log_sf(&self, t: f64) -> f64 {
        let inv = 1.0 / self.sigma;
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.base.atoms() {
            acc.add(lw + norm_log_sf((t - x) * inv));
        }
        acc.value().min(0.0)
    }

    /// CDF `F(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let lc = self.log_cdf(t);
        if lc < -std::f64::consts::LN_2 {
            lc.exp()
        } else {
            1.0 - self.log_sf(t).exp()
        }
    }

    /// Survival function `1 - F(t)`.
    pub fn sf(&self, t: f64) -> f64 {
        let ls = self.log_sf(t);
        if ls < -std::f64::consts::LN_2 {
            ls.exp()
        } else {
            1.0 - self.log_cdf(t).exp()
        }
    }

    /// `ln P(a < Y <= b)` for `a < b`; accurate for narrow and far-tail intervals.
    pub fn log_interval_mass(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return f64::NEG_INFINITY;
        }
        let inv = 1.0 / self.sigma;
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.base.atoms() {
            acc.add(lw + norm_log_interval((a - x) * inv, (b - x) * inv));
        }
        acc.value().min(0.0)
    }

    /// `ln P(a < Y <= a + w)` for `w > 0`, treating the width as exact.
    pub fn log_interval_mass_width(&self, a: f64, w: f64) -> f64 {
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        let inv = 1.0 / self.sigma;
        let mut acc = LogSumAcc::new();
        for (x, lw) in self.base.atoms() {
            acc.add(lw + norm_log_interval_width((a - x) * inv, w * inv));
        }
        acc.value().min(0.0)
    }

    /// `P(a < Y <= b)`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.log_interval_mass(a, b).exp()
    }

    /// Quantile `F^{-1}(u)` for `u` in `(0, 1)`.
    ///
    /// Brackets from the atom range widened by `sigma * sqrt(1400)`, bisects
    /// to width `1e-12` (relative to the magnitude for large locations), then
    /// applies one safeguarded Newton step.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return invalid(format!("quantile level {u} outside (0, 1)"));
        }
        let upper = u > 0.5;
        let target = if upper { (1.0 - u).ln() } else { u.ln() };
        // g(t) >= 0 iff t is at or beyond the quantile.
        let g = |t: f64| -> f64 {
            if upper {
                target - self.log_sf(t)
            } else {
                self.log_cdf(t) - target
            }
        };
        let (rmin, rmax) = self.base.support();
        let pad = self.sigma * 1400f64.sqrt();
        let mut lo = rmin - pad;
        let mut hi = rmax + pad;
        let mut width = pad;
        while g(lo) > 0.0 {
            width *= 2.0;
            lo = rmin - width;
            if width > 1e300 {
                return Err(Error::Numeric("quantile bracket expansion failed".into()));
            }
        }
        width = pad;
        while g(hi) < 0.0 {
            width *= 2.0;
            hi = rmax + width;
            if width > 1e300 {
                return Err(Error::Numeric("quantile bracket expansion failed".into()));
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * mid.abs().max(1.0) || mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let resid = |t: f64| -> f64 {
            if upper {
                (1.0 - u) - self.sf(t)
            } else {
                self.cdf(t) - u
            }
        };
        let r0 = resid(mid);
        let dens = self.pdf(mid);
        if dens > 0.0 {
            let cand = mid - r0 / dens;
            if cand >= lo && cand <= hi && resid(cand).abs() < r0.abs() {
                return Ok(cand);
            }
        }
        Ok(mid)
    }
}

/// Sorted i.i.d. sample representing an empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds an empirical measure from raw draws (sorted internally).
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return invalid("empirical measure needs at least one sample");
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return invalid("samples must be finite");
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        Ok(Self { samples })
    }

    /// Sorted samples.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Empirical CDF `F_n(t) = #{x_i <= t} / n`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.samples.partition_point(|x| *x <= t);
        k as f64 / self.n() as f64
    }

    /// Uniform-weight atomic distribution with duplicate values merged.
    pub fn to_atomic(&self) -> AtomicDistribution {
        let n = self.n() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < self.samples.len() {
            let x = self.samples[i];
            let mut j = i;
            while j < self.samples.len() && self.samples[j] == x {
                j += 1;
            }
            atoms.push((x, ((j - i) as f64 / n).ln()));
            i = j;
        }
        AtomicDistribution::from_unnormalized(atoms).expect("nonempty finite sample")
    }
}

/// Draws `n` i.i.d. points from an atomic distribution (deterministic in `seed`).
pub fn sample_atomic(p: &AtomicDistribution, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return invalid("sample size must be at least one");
    }
    let mut rng = stream_rng(seed, 0);
    let cum = p.cumulative();
    let total = cum[cum.len() - 1];
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let k = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
            p.locations()[k]
        })
        .collect();
    EmpiricalMeasure::new(draws)
}

/// Draws `n` i.i.d. points from a smoothed mixture (deterministic in `seed`).
pub fn sample_smoothed(m: &SmoothedMixture, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return invalid("sample size must be at least one");
    }
    let mut rng = stream_rng(seed, 0);
    EmpiricalMeasure::new(draw_smoothed(m, n, &mut rng))
}

/// Raw draws from a smoothed mixture using a caller-provided generator.
pub fn draw_smoothed<R: Rng + ?Sized>(m: &SmoothedMixture, n: usize, rng: &mut R) -> Vec<f64> {
    let cum = m.base().cumulative();
    let total = cum[cum.len() - 1];
    let locs = m.base().locations();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let k = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
            let z: f64 = StandardNormal.sample(rng);
            locs[k] + m.sigma() * z
        })
        .collect()
}

/// The empirical measure of `n` i.i.d. draws from `p`, returned directly as
/// atom counts (multinomial sampling through conditional binomials).
///
/// Equal in law to converting [`sample_atomic`] output with
/// [`EmpiricalMeasure::to_atomic`], but costs `O(#atoms)` instead of `O(n)`.
pub fn empirical_from_counts<R: Rng + ?Sized>(
    p: &AtomicDistribution,
    n: u64,
    rng: &mut R,
) -> Result<AtomicDistribution> {
    if n == 0 {
        return invalid("sample size must be at least one");
    }
    let k = p.len();
    // Suffix masses in log space so conditional probabilities stay accurate.
    let mut suffix = vec![f64::NEG_INFINITY; k + 1];
    for i in (0..k).rev() {
        suffix[i] = crate::special::log_add_exp(suffix[i + 1], p.log_weights()[i]);
    }
    let mut remaining = n;
    let mut atoms = Vec::new();
    for i in 0..k {
        if remaining == 0 {
            break;
        }
        let count = if i + 1 == k {
            remaining
        } else {
            let q = (p.log_weights()[i] - suffix[i]).exp().clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| Error::Numeric(format!("binomial sampler: {e}")))?
                .sample(rng)
        };
        if count > 0 {
            atoms.push((p.locations()[i], (count as f64 / n as f64).ln()));
            remaining -= count;
        }
    }
    AtomicDistribution::from_unnormalized(atoms)
}

/// Outcome of [`gaussian_tail_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheckReport {
    /// Number of grid points examined.
    pub points: usize,
    /// Largest value of `ln(1 - Phi(l)) + l^2 / 2` over the grid (must be `<= 0`).
    pub max_log_excess: f64,
    /// Smallest gap `exp(-l^2/2) - (1 - Phi(l))` over the grid.
    pub min_slack: f64,
    /// First grid point where the inequality fails, if any.
    pub first_violation: Option<f64>,
}

impl TailCheckReport {
    /// True when no grid point violates the inequality.
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks `1 - Phi(l) <= exp(-l^2 / 2)` on a grid of nonnegative `l`.
pub fn gaussian_tail_bound_check(l_grid: &[f64]) -> Result<TailCheckReport> {
    if l_grid.iter().any(|l| !(*l >= 0.0)) {
        return invalid("tail check grid must be nonnegative");
    }
    let mut max_log_excess = f64::NEG_INFINITY;
    let mut min_slack = f64::INFINITY;
    let mut first_violation = None;
    for &l in l_grid {
        let log_tail = norm_log_sf(l);
        let excess = log_tail + 0.5 * l * l;
        max_log_excess = max_log_excess.max(excess);
        min_slack = min_slack.min((-0.5 * l * l).exp() - log_tail.exp());
        if excess > 0.0 && first_violation.is_none() {
            first_violation = Some(l);
        }
    }
    Ok(TailCheckReport {
        points: l_grid.len(),
        max_log_excess,
        min_slack,
        first_violation,
    })
}

/// Log-density of `N(0, sigma^2)` at `t` (helper shared by several modules).
pub fn gaussian_log_pdf(t: f64, sigma: f64) -> f64 {
    norm_log_pdf(t / sigma) - sigma.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_merge() {
        let d = AtomicDistribution::from_weights(&[(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(d.locations(), &[0.0, 1.0]);
        assert!((d.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(AtomicDistribution::new(vec![(0.0, 0.1)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = SmoothedMixture::new(
            AtomicDistribution::from_weights(&[(0.0, 0.3), (2.0, 0.7)]).unwrap(),
            1.5,
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"sigma\":1.5"));
        let back: SmoothedMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let a: AtomicDistribution =
            serde_json::from_str(r#"{"atoms":[{"x":0.0,"logw":0.0}]}"#).unwrap();
        assert_eq!(a, AtomicDistribution::point_mass(0.0));
    }

    #[test]
    fn profile_fit_is_tight_at_atoms() {
        let d = AtomicDistribution::from_weights(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let p = SubgaussianProfile::fit(&d, 1.0).unwrap();
        assert!((p.c - 0.5 * 2f64.exp()).abs() < 1e-12);
        assert!(p.verify_on(&d, &[0.0, 1.0, 2.0, 3.0]).is_none());
    }
}

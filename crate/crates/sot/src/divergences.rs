//! KL, chi-square and Renyi divergences between smoothed mixtures, the
//! chi-square and Renyi mutual information of the Gaussian channel, and the
//! soft-covering KL bound.
//!
//! Integrands are written in Bregman form in terms of the log-ratio
//! `u = ln(rho_A / rho_B)`, so every integrand is nonnegative and stays
//! accurate when the two densities nearly coincide.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist_core::{AtomicDistribution, SmoothedMixture};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{breakpoints_within, integrate, QuadOptions};
use crate::special::{
    gauss_tail_poly_bound, kl_bregman, log1m_exp, log_gauss_tail_exp_quad, norm_log_pdf,
    renyi_bregman, signed_log_sum, SignedLog, LogSumAcc,
};
use crate::transport::{panel_breakpoints, transport_window, MixturePair};

/// Quadrature tolerances for divergence integrals.
#[derive(Debug, Clone, Copy)]
pub struct DivOptions {
    /// Absolute tolerance.
    pub abs_tol: f64,
    /// Relative tolerance.
    pub rel_tol: f64,
}

impl DivOptions {
    /// Absolute tolerance `tol` with relative tolerance `1e-10`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: 1e-10,
        }
    }
}

/// A divergence value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    /// Divergence value over the integration window (clamped at zero).
    pub value: f64,
    /// Bound on the contribution from outside the window (`+inf` when uncertified).
    pub tail_bound: f64,
    /// Quadrature error estimate.
    pub quadrature_error: f64,
}

#[derive(Clone, Copy)]
enum Kind {
    Kl,
    Chi2,
    Renyi(f64),
}

impl Kind {
    fn integrand(self, u: f64) -> f64 {
        match self {
            Kind::Kl => kl_bregman(u),
            Kind::Chi2 => {
                let e = u.exp_m1();
                e * e
            }
            Kind::Renyi(l) => renyi_bregman(u, l),
        }
    }
}

/// `ln(rho_A(t) / rho_B(t))` for a prepared pair, using weight differences when available.
pub fn log_density_ratio(pair: &MixturePair<'_>, t: f64) -> f64 {
    let a = pair.source();
    let b = pair.target();
    match pair.shift() {
        Some(shift) => {
            let s = b.sigma();
            let terms = shift
                .values()
                .iter()
                .zip(b.base().locations())
                .map(|(d, &x)| SignedLog {
                    sign: d.sign,
                    log_abs: d.log_abs + norm_log_pdf((t - x) / s),
                });
            let diff = signed_log_sum(terms);
            // The differences are taken against unit-scale Gaussian densities.
            let lb = b.log_pdf(t) + s.ln();
            let ratio = diff.sign * (diff.log_abs - lb).exp();
            if diff.sign == 0.0 {
                0.0
            } else {
                ratio.ln_1p()
            }
        }
        None => a.log_pdf(t) - b.log_pdf(t),
    }
}

fn joint_window(a: &SmoothedMixture, b: &SmoothedMixture) -> Result<(f64, f64)> {
    let (alo, ahi) = transport_window(a)?;
    let (blo, bhi) = transport_window(b)?;
    Ok((alo.min(blo), ahi.max(bhi)))
}

fn divergence_integral(
    pair: &MixturePair<'_>,
    kind: Kind,
    opts: &DivOptions,
) -> Result<(f64, f64, f64)> {
    let a = pair.source();
    let b = pair.target();
    let (mut lo, mut hi) = joint_window(a, b)?;
    let scale = a.sigma().min(b.sigma());
    let mut centers: Vec<f64> = a.base().locations().to_vec();
    centers.extend(b.base().locations().iter().copied());
    let f = |t: f64| {
        let u = log_density_ratio(pair, t);
        let v = kind.integrand(u);
        if v == 0.0 {
            0.0
        } else {
            (b.log_pdf(t) + v.ln()).exp()
        }
    };
    let quad = QuadOptions {
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        ..QuadOptions::default()
    };
    // Widen the window until the certified remainder is within tolerance.
    let mut widenings = 0;
    let (q, tail) = loop {
        let bps = panel_breakpoints(lo, hi, &centers, scale);
        let q = integrate(f, &bps, &quad)?;
        let tail = divergence_tail_bound(pair, kind, lo, hi);
        let target = opts.abs_tol.max(opts.rel_tol * q.value.abs());
        if tail <= target || !tail.is_finite() || widenings >= 16 {
            break (q, tail);
        }
        lo -= 2.0 * scale;
        hi += 2.0 * scale;
        widenings += 1;
    };
    Ok((q.value.max(0.0), q.error, tail))
}

/// Tail remainder outside `[lo, hi]` for a shared noise scale.
///
/// Uses the fact that the log-ratio has slope bounded by the spread of the
/// atoms divided by the noise variance, so it grows at most linearly in the
/// tails, then integrates against Gaussian tails in closed form.
fn divergence_tail_bound(pair: &MixturePair<'_>, kind: Kind, lo: f64, hi: f64) -> f64 {
    let a = pair.source();
    let b = pair.target();
    if a.sigma() != b.sigma() {
        return f64::INFINITY;
    }
    let s = a.sigma();
    let (amin, amax) = a.base().support();
    let (bmin, bmax) = b.base().support();
    let mut total = 0.0;
    for (edge, right) in [(hi, true), (lo, false)] {
        let u0 = log_density_ratio(pair, edge);
        // Outward slope bounds of u (per unit distance away from the window).
        let (up, down) = if right {
            ((amax - bmin) / (s * s), (amin - bmax) / (s * s))
        } else {
            ((bmax - amin) / (s * s), (bmin - amax) / (s * s))
        };
        let z0 = |x: f64| if right { (edge - x) / s } else { (x - edge) / s };
        let tail_b: f64 = b
            .base()
            .atoms()
            .map(|(x, lw)| (lw + crate::special::norm_log_sf(z0(x))).exp())
            .sum();
        let bound = match kind {
            Kind::Kl => {
                let crude: f64 = tail_b
                    + a.base()
                        .atoms()
                        .map(|(x, lw)| {
                            lw.exp() * gauss_tail_poly_bound(z0(x), &[u0.max(0.0), up.max(0.0) * s])
                        })
                        .sum::<f64>();
                let g = up.abs().max(down.abs());
                let c = [0.5 * u0 * u0, u0.abs() * g * s, 0.5 * g * g * s * s];
                let quad: f64 = a
                    .base()
                    .atoms()
                    .chain(b.base().atoms())
                    .map(|(x, lw)| lw.exp() * gauss_tail_poly_bound(z0(x), &c))
                    .sum();
                // kl_bregman(u) <= (u^2 / 2) e^{max(u, 0)} and
                // rho_B e^{max(u, 0)} <= rho_A + rho_B.
                crude.min(quad)
            }
            Kind::Chi2 => {
                tail_b
                    + a.base()
                        .atoms()
                        .map(|(x, lw)| (lw + log_gauss_tail_exp_quad(z0(x), u0, up * s, 0.0)).exp())
                        .sum::<f64>()
            }
            Kind::Renyi(l) => {
                (l - 1.0) * tail_b
                    + a.base()
                        .atoms()
                        .map(|(x, lw)| {
                            (lw + log_gauss_tail_exp_quad(z0(x), (l - 1.0) * u0, (l - 1.0) * up * s, 0.0))
                                .exp()
                        })
                        .sum::<f64>()
            }
        };
        total += bound;
    }
    total
}

/// KL divergence `D(A || B)` with absolute tolerance `tol`.
pub fn kl_divergence(a: &SmoothedMixture, b: &SmoothedMixture, tol: f64) -> Result<DivergenceEstimate> {
    kl_divergence_with(&MixturePair::new(a, b), &DivOptions::with_tol(tol))
}

/// KL divergence for a prepared pair.
pub fn kl_divergence_with(pair: &MixturePair<'_>, opts: &DivOptions) -> Result<DivergenceEstimate> {
    let (value, err, tail) = divergence_integral(pair, Kind::Kl, opts)?;
    Ok(DivergenceEstimate {
        value,
        tail_bound: tail,
        quadrature_error: err,
    })
}

/// Chi-square divergence `chi2(A || B)` with absolute tolerance `tol`.
pub fn chi2_divergence(a: &SmoothedMixture, b: &SmoothedMixture, tol: f64) -> Result<DivergenceEstimate> {
    chi2_divergence_with(&MixturePair::new(a, b), &DivOptions::with_tol(tol))
}

/// Chi-square divergence for a prepared pair.
pub fn chi2_divergence_with(pair: &MixturePair<'_>, opts: &DivOptions) -> Result<DivergenceEstimate> {
    let (value, err, tail) = divergence_integral(pair, Kind::Chi2, opts)?;
    Ok(DivergenceEstimate {
        value,
        tail_bound: tail,
        quadrature_error: err,
    })
}

/// Renyi divergence `D_lambda(A || B)` for `1 < lambda <= 2`.
pub fn renyi_divergence(
    a: &SmoothedMixture,
    b: &SmoothedMixture,
    lambda: f64,
    tol: f64,
) -> Result<DivergenceEstimate> {
    renyi_divergence_with(&MixturePair::new(a, b), lambda, &DivOptions::with_tol(tol))
}

/// Renyi divergence for a prepared pair.
pub fn renyi_divergence_with(
    pair: &MixturePair<'_>,
    lambda: f64,
    opts: &DivOptions,
) -> Result<DivergenceEstimate> {
    if !(lambda > 1.0 && lambda <= 2.0) {
        return invalid("lambda must lie in (1, 2]");
    }
    let (inner, err, tail) = divergence_integral(pair, Kind::Renyi(lambda), opts)?;
    let scale = 1.0 / ((lambda - 1.0) * (1.0 + inner));
    Ok(DivergenceEstimate {
        value: inner.ln_1p() / (lambda - 1.0),
        tail_bound: tail * scale,
        quadrature_error: err * scale,
    })
}

/// Mutual-information estimate for the Gaussian channel `Y = S + sigma Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MIEstimate {
    /// Estimated mutual information.
    pub value: f64,
    /// Truncation radius `R`: outputs are integrated over `|y| <= R`.
    pub truncation_radius: f64,
    /// Per-atom increments (atom order of the base distribution).
    pub partial_by_atom: Vec<f64>,
    /// Accumulated quadrature error.
    pub quadrature_error: f64,
}

/// Default truncation radius `max |atom| + sigma sqrt(2 ln(1/tol)) + 10 sigma`.
pub fn default_truncation_radius(p: &AtomicDistribution, sigma: f64, tol: f64) -> f64 {
    let (lo, hi) = p.support();
    lo.abs().max(hi.abs()) + sigma * (2.0 * (1.0 / tol).ln()).sqrt() + 10.0 * sigma
}

/// Half-width (in noise units) of the window integrated around each atom.
const ATOM_WINDOW: f64 = 40.0;

/// Per-atom increments `p_k int phi_k [(phi_k / rho)^(lambda - 1) - 1]` over `|y| <= R`.
fn atom_increments(
    p: &AtomicDistribution,
    sigma: f64,
    lambda: f64,
    radius: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(sigma > 0.0) {
        return invalid("sigma must be positive");
    }
    if !(radius > 0.0) {
        return invalid("truncation radius must be positive");
    }
    let locs = p.locations().to_vec();
    let lws = p.log_weights().to_vec();
    let n = locs.len();
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let results: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let rk = locs[k];
            let lo = (-ATOM_WINDOW * sigma).max(-radius - rk);
            let hi = (ATOM_WINDOW * sigma).min(radius - rk);
            if hi <= lo {
                return Ok((0.0, 0.0));
            }
            let lwk = lws[k];
            let f = |u: f64| -> f64 {
                let mut acc = LogSumAcc::new();
                for j in 0..n {
                    let d = rk - locs[j];
                    acc.add(lws[j] - d * (2.0 * u + d) * inv2s2);
                }
                let x = -(lambda - 1.0) * acc.value();
                let bracket = if x > 1.0 {
                    (lwk + x + log1m_exp(-x)).exp()
                } else {
                    lwk.exp() * x.exp_m1()
                };
                (norm_log_pdf(u / sigma) - sigma.ln()).exp() * bracket
            };
            let mut cand: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
                .iter()
                .flat_map(|m| [-m * sigma, m * sigma])
                .collect();
            cand.push(0.0);
            for &x in &locs {
                let d = x - rk;
                if d.abs() < 2.0 * ATOM_WINDOW * sigma {
                    cand.push(0.5 * d);
                    cand.push(d);
                }
            }
            let bps = breakpoints_within(lo, hi, cand);
            let q = integrate(
                f,
                &bps,
                &QuadOptions {
                    abs_tol: tol / n as f64,
                    rel_tol: 1e-10,
                    ..QuadOptions::default()
                },
            )?;
            Ok((q.value, q.error))
        })
        .collect();
    let mut inc = Vec::with_capacity(n);
    let mut err = 0.0;
    for r in results {
        let (v, e) = r?;
        inc.push(v);
        err += e;
    }
    Ok((inc, err))
}

/// Chi-square mutual information of the channel `S ~ p`, `Y = S + sigma Z`, truncated to `|y| <= R`.
pub fn chi2_mutual_information(
    p: &AtomicDistribution,
    sigma: f64,
    truncation_radius: Option<f64>,
    tol: f64,
) -> Result<MIEstimate> {
    let radius = truncation_radius.unwrap_or_else(|| default_truncation_radius(p, sigma, tol));
    let (inc, err) = atom_increments(p, sigma, 2.0, radius, tol)?;
    let value: f64 = inc.iter().sum();
    Ok(MIEstimate {
        value: if value < 0.0 && value >= -tol { 0.0 } else { value },
        truncation_radius: radius,
        partial_by_atom: inc,
        quadrature_error: err,
    })
}

/// Renyi mutual information `I_lambda(S; Y)` for `1 < lambda < 2`.
pub fn renyi_mutual_information(
    p: &AtomicDistribution,
    sigma: f64,
    lambda: f64,
    truncation_radius: Option<f64>,
    tol: f64,
) -> Result<MIEstimate> {
    if !(lambda > 1.0 && lambda < 2.0) {
        return invalid("lambda must lie in (1, 2)");
    }
    let radius = truncation_radius.unwrap_or_else(|| default_truncation_radius(p, sigma, tol));
    let (inc, err) = atom_increments(p, sigma, lambda, radius, tol)?;
    let inner: f64 = inc.iter().sum();
    if inner <= -1.0 {
        return Err(Error::Numeric("Renyi moment is not positive".into()));
    }
    let value = inner.ln_1p() / (lambda - 1.0);
    Ok(MIEstimate {
        value: value.max(0.0),
        truncation_radius: radius,
        partial_by_atom: inc,
        quadrature_error: err / ((lambda - 1.0) * (1.0 + inner)),
    })
}

/// Soft-covering bound `(1/(lambda-1)) ln(1 + exp((lambda-1)(I_lambda - ln n)))`.
pub fn soft_covering_kl_bound(i_lambda: f64, lambda: f64, n: u64) -> Result<f64> {
    if !(lambda > 1.0 && lambda <= 2.0) {
        return invalid("lambda must lie in (1, 2]");
    }
    if n < 2 {
        return invalid("n must be at least 2");
    }
    let x = (lambda - 1.0) * (i_lambda - (n as f64).ln());
    let softplus = if x > 30.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    Ok(softplus / (lambda - 1.0))
}

/// The order `2 - 1/ln n` used with the soft-covering bound.
pub fn soft_covering_order(n: u64) -> Result<f64> {
    if n < 3 {
        return invalid("n must be at least 3");
    }
    Ok(2.0 - 1.0 / (n as f64).ln())
}

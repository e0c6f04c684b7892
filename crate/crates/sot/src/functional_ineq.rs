//! Lower bounds on the log-Sobolev and transportation-entropy constants of
//! two-point Gaussian mixtures, exhibiting their growth when `K > sigma`.

use serde::Serialize;

use crate::constructions::bernoulli_two_point;
use crate::dist_core::{AtomicDistribution, SmoothedMixture};
use crate::divergences::{kl_divergence_with, DivOptions};
use crate::error::{invalid, Error, Result};
use crate::special::{kl_bregman, log1m_exp, log_add_exp, SignedLog};
use crate::transport::{w2_squared_with, MixturePair, W2Options, WeightShift};

/// Test-function lower bound on the log-Sobolev constant of a two-point mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LSIProbe {
    /// Separation of the atoms.
    pub h: f64,
    /// Noise scale.
    pub sigma: f64,
    /// Subgaussian scale.
    pub k: f64,
    /// Left cut point.
    pub x1: f64,
    /// Right cut point.
    pub x2: f64,
    /// Masses of the five cells `(-inf, x1], (x1, x1+1], (x1+1, x2], (x2, x2+1], (x2+1, inf)`.
    pub q: [f64; 5],
    /// Natural logs of the cell masses.
    pub log_q: [f64; 5],
    /// Lower bound `max(q3 (q1 + q5) / (q2 + q4) - 1, 0)`.
    pub lsi_lower: f64,
    /// `ln(lsi_lower + 1)`, finite even when the bound overflows.
    pub log_bound_plus_one: f64,
    /// Change in the bound when the left cut point is moved twice as far out.
    pub x1_sensitivity: f64,
}

fn lsi_cells(m: &SmoothedMixture, x1: f64, x2: f64) -> [f64; 5] {
    [
        m.log_cdf(x1),
        m.log_interval_mass(x1, x1 + 1.0),
        m.log_interval_mass(x1 + 1.0, x2),
        m.log_interval_mass(x2, x2 + 1.0),
        m.log_sf(x2 + 1.0),
    ]
}

fn lsi_log_ratio(lq: &[f64; 5]) -> f64 {
    lq[2] + log_add_exp(lq[0], lq[4]) - log_add_exp(lq[1], lq[3])
}

/// Default cut points: `x1 = -40 sigma`, `x2 = h sqrt(sigma / K)`.
pub fn default_lsi_cuts(h: f64, k: f64, sigma: f64) -> (f64, f64) {
    (-40.0 * sigma, h * (sigma / k).sqrt())
}

/// Log-Sobolev lower bound for `P_h * N(0, sigma^2)` from a piecewise-linear test function.
pub fn lsi_lower_bound(
    h: f64,
    k: f64,
    sigma: f64,
    x1: Option<f64>,
    x2: Option<f64>,
) -> Result<LSIProbe> {
    let (d1, d2) = default_lsi_cuts(h, k, sigma);
    let x1 = x1.unwrap_or(d1);
    let x2 = x2.unwrap_or(d2);
    if !(x1 < -1.0 && x2 > 0.0 && x2 < h - 1.0) {
        return invalid("cut points must satisfy x1 < -1 < 0 < x2 < h - 1");
    }
    let m = SmoothedMixture::new(bernoulli_two_point(h, k)?, sigma)?;
    let log_q = lsi_cells(&m, x1, x2);
    let lr = lsi_log_ratio(&log_q);
    let far = lsi_log_ratio(&lsi_cells(&m, 2.0 * x1, x2));
    let bound = (lr.exp() - 1.0).max(0.0);
    let far_bound = (far.exp() - 1.0).max(0.0);
    Ok(LSIProbe {
        h,
        sigma,
        k,
        x1,
        x2,
        q: log_q.map(f64::exp),
        log_q,
        lsi_lower: bound,
        log_bound_plus_one: lr.max(0.0),
        x1_sensitivity: (bound - far_bound).abs(),
    })
}

/// Transportation-entropy probe for a two-point mixture and its perturbation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T2Probe {
    /// Separation of the atoms.
    pub h: f64,
    /// Perturbation slack.
    pub delta: f64,
    /// Perturbed far-atom weight.
    pub q_h: f64,
    /// `ln p_h`.
    pub log_p_h: f64,
    /// `ln(p_h - q_h)`.
    pub log_shift: f64,
    /// Squared W2 between the smoothed laws.
    pub w2sq: f64,
    /// KL divergence of the smoothed laws.
    pub kl: f64,
    /// `w2sq / kl`.
    pub ratio: f64,
    /// KL divergence of the unsmoothed laws (data-processing upper bound).
    pub kl_discrete: f64,
}

/// Transportation-entropy lower bound `W2^2 / KL` for `P_h` against the perturbed `Q_h`.
pub fn t2_lower_bound(h: f64, k: f64, sigma: f64, delta: f64) -> Result<T2Probe> {
    if !(sigma > 0.0 && k > sigma) {
        return invalid("the probe needs 0 < sigma < K");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let p = bernoulli_two_point(h, k)?;
    let log_p = -h * h / (2.0 * k * k);
    let ratio2 = 1.0 + sigma * sigma / (k * k);
    let log_eta = -(1.0 - delta) * ratio2 * ratio2 * h * h / (8.0 * sigma * sigma);
    if log_eta >= log_p {
        return invalid("perturbed weight q_h is not positive; h too small for this delta");
    }
    let log_q = log_p + log1m_exp(log_eta - log_p);
    let log_one_m_q = log_add_exp(log1m_exp(log_p), log_eta);
    let q = AtomicDistribution::new(vec![(0.0, log_one_m_q), (h, log_q)])?;
    if log_eta == f64::NEG_INFINITY {
        return invalid("perturbation vanishes; ratio undefined");
    }
    let pm = SmoothedMixture::new(p, sigma)?;
    let qm = SmoothedMixture::new(q, sigma)?;
    // Weight differences w_P - w_Q: -eta at the origin, +eta at h.
    let shift = WeightShift::explicit(vec![
        SignedLog {
            sign: -1.0,
            log_abs: log_eta,
        },
        SignedLog {
            sign: 1.0,
            log_abs: log_eta,
        },
    ]);
    let pair = MixturePair::with_shift(&pm, &qm, shift)?;
    let w2 = w2_squared_with(
        &pair,
        &W2Options {
            tol: 0.0,
            rel_tol: 1e-8,
            diagnostic_points: 0,
        },
    )?;
    let kl = kl_divergence_with(
        &pair,
        &DivOptions {
            abs_tol: 0.0,
            rel_tol: 1e-8,
        },
    )?;
    if !(kl.value > 0.0) {
        return Err(Error::Numeric("KL divergence vanished; ratio undefined".into()));
    }
    // Discrete KL in Bregman form: sum_k w_Q,k kl_bregman(ln(w_P,k / w_Q,k)).
    let u0 = (-(log_eta - log_one_m_q).exp()).ln_1p();
    let u1 = (log_eta - log_q).exp().ln_1p();
    let kl_discrete = log_one_m_q.exp() * kl_bregman(u0) + log_q.exp() * kl_bregman(u1);
    Ok(T2Probe {
        h,
        delta,
        q_h: log_q.exp(),
        log_p_h: log_p,
        log_shift: log_eta,
        w2sq: w2.total,
        kl: kl.value,
        ratio: w2.total / kl.value,
        kl_discrete,
    })
}

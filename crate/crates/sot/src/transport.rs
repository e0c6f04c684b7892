//! One-dimensional Wasserstein-2 transport between smoothed mixtures.
//!
//! The optimal map between two continuous laws on the line is the quantile
//! coupling `T(t) = F_B^{-1}(F_A(t))`. Rather than inverting `F_B` from
//! scratch, the displacement `d = T(t) - t` is obtained by solving
//! `P_B(t, t + d] = F_A(t) - F_B(t)` in log-space. Both sides are computed
//! without cancellation, so the map stays accurate even where the two CDFs
//! agree to far more digits than a double can hold.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist_core::{draw_smoothed, empirical_from_counts, SmoothedMixture, SubgaussianProfile};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{breakpoints_within, integrate, QuadOptions};
use crate::rng::stream_rng;
use crate::special::{
    gauss_tail_poly_bound, log_diff_exp, norm_log_cdf, norm_log_sf, SignedLog,
};

/// Quantile level defining the integration window.
pub const WINDOW_EPS: f64 = 1e-10;

/// Per-atom weight differences `w_A - w_B` for two mixtures sharing atoms and noise.
#[derive(Debug, Clone)]
pub struct WeightShift {
    shift: Vec<SignedLog>,
}

impl WeightShift {
    /// Uses explicitly supplied differences (one per shared atom).
    pub fn explicit(shift: Vec<SignedLog>) -> Self {
        Self { shift }
    }

    /// Differences computed from the stored log-weights.
    pub fn from_weights(a: &SmoothedMixture, b: &SmoothedMixture) -> Self {
        let shift = a
            .base()
            .log_weights()
            .iter()
            .zip(b.base().log_weights())
            .map(|(&la, &lb)| {
                if la > lb {
                    SignedLog {
                        sign: 1.0,
                        log_abs: log_diff_exp(la, lb),
                    }
                } else if lb > la {
                    SignedLog {
                        sign: -1.0,
                        log_abs: log_diff_exp(lb, la),
                    }
                } else {
                    SignedLog::ZERO
                }
            })
            .collect();
        Self { shift }
    }

    /// The per-atom differences.
    pub fn values(&self) -> &[SignedLog] {
        &self.shift
    }
}

/// A source/target pair of smoothed mixtures with an accurate CDF gap.
#[derive(Debug, Clone)]
pub struct MixturePair<'a> {
    a: &'a SmoothedMixture,
    b: &'a SmoothedMixture,
    shift: Option<WeightShift>,
}

/// True when both mixtures have identical atom locations and noise scale.
pub fn shares_atoms(a: &SmoothedMixture, b: &SmoothedMixture) -> bool {
    a.sigma() == b.sigma() && a.base().locations() == b.base().locations()
}

impl<'a> MixturePair<'a> {
    /// Pair with the CDF gap computed from the two mixtures directly, or from
    /// weight differences when the atoms coincide.
    pub fn new(a: &'a SmoothedMixture, b: &'a SmoothedMixture) -> Self {
        let shift = shares_atoms(a, b).then(|| WeightShift::from_weights(a, b));
        Self { a, b, shift }
    }

    /// Pair with caller-supplied weight differences on shared atoms.
    pub fn with_shift(
        a: &'a SmoothedMixture,
        b: &'a SmoothedMixture,
        shift: WeightShift,
    ) -> Result<Self> {
        if !shares_atoms(a, b) {
            return invalid("weight shifts require identical atoms and sigma");
        }
        if shift.shift.len() != a.base().len() {
            return invalid("one weight difference per atom is required");
        }
        Ok(Self {
            a,
            b,
            shift: Some(shift),
        })
    }

    /// Source measure.
    pub fn source(&self) -> &SmoothedMixture {
        self.a
    }

    /// Target measure.
    pub fn target(&self) -> &SmoothedMixture {
        self.b
    }

    /// Explicit weight differences, if the atoms are shared.
    pub fn shift(&self) -> Option<&WeightShift> {
        self.shift.as_ref()
    }

    /// `F_A(t) - F_B(t)` as a signed logarithm.
    pub fn cdf_gap(&self, t: f64) -> SignedLog {
        let lb_cdf = self.b.log_cdf(t);
        let use_left = lb_cdf < -std::f64::consts::LN_2;
        if let Some(shift) = &self.shift {
            let inv = 1.0 / self.b.sigma();
            let locs = self.b.base().locations();
            let terms = shift.shift.iter().zip(locs).map(|(d, &x)| {
                let z = (t - x) * inv;
                if use_left {
                    SignedLog {
                        sign: d.sign,
                        log_abs: d.log_abs + norm_log_cdf(z),
                    }
                } else {
                    SignedLog {
                        sign: -d.sign,
                        log_abs: d.log_abs + norm_log_sf(z),
                    }
                }
            });
            return crate::special::signed_log_sum(terms);
        }
        let (pos, neg) = if use_left {
            (self.a.log_cdf(t), lb_cdf)
        } else {
            (self.b.log_sf(t), self.a.log_sf(t))
        };
        if pos > neg {
            SignedLog {
                sign: 1.0,
                log_abs: log_diff_exp(pos, neg),
            }
        } else if neg > pos {
            SignedLog {
                sign: -1.0,
                log_abs: log_diff_exp(neg, pos),
            }
        } else {
            SignedLog::ZERO
        }
    }

    /// Displacement `T(t) - t` of the quantile coupling from A to B.
    pub fn displacement(&self, t: f64) -> Result<f64> {
        let gap = self.cdf_gap(t);
        if gap.sign == 0.0 || gap.log_abs == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let forward = gap.sign > 0.0;
        let target = gap.log_abs;
        let b = self.b;
        let reach = if forward { b.log_sf(t) } else { b.log_cdf(t) };
        if target >= reach - 1e-13 {
            // The gap swallows the entire remaining mass of B beyond t; fall back
            // to direct inversion, which handles this saturated regime.
            let u = self.a.cdf(t);
            if u <= 0.0 || u >= 1.0 {
                return Err(Error::Numeric(format!(
                    "transport map undefined at t = {t}: source CDF saturated"
                )));
            }
            return Ok(b.quantile(u)? - t);
        }
        let mass = |x: f64| -> f64 {
            if forward {
                b.log_interval_mass_width(t, x)
            } else {
                b.log_interval_mass_width(t - x, x)
            }
        };
        let edge = |x: f64| -> f64 {
            if forward {
                b.log_pdf(t + x)
            } else {
                b.log_pdf(t - x)
            }
        };
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        // The solution lies inside the target's support widened by 40 noise
        // scales unless the gap is within exp(-800) of saturation.
        let (rmin, rmax) = b.base().support();
        let cap = if forward {
            rmax + 40.0 * b.sigma() - t
        } else {
            t - (rmin - 40.0 * b.sigma())
        };
        if cap > 0.0 && mass(cap) >= target {
            hi = cap;
        }
        let mut x = (target - b.log_pdf(t)).exp();
        if x >= hi {
            x = 0.5 * hi;
        }
        if x > 0.0 && x <= 1e-7 * b.sigma() {
            // Displacements this small are below the resolution of t + x, so use
            // the second-order expansion of the interval mass around t.
            let eps = 1e-5 * b.sigma();
            let score = (b.log_pdf(t + eps) - b.log_pdf(t - eps)) / (2.0 * eps);
            return Ok(if forward {
                x - 0.5 * score * x * x
            } else {
                -(x + 0.5 * score * x * x)
            });
        }
        if !(x > 0.0) || !x.is_finite() {
            x = b.sigma();
        }
        for iter in 0..300 {
            let g = mass(x);
            let resid = target - g;
            let scale = 1.0 + target.abs();
            if resid.abs() <= 1e-14 * scale || (iter >= 60 && resid.abs() <= 1e-11 * scale) {
                return Ok(if forward { x } else { -x });
            }
            if resid > 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let step = resid * (g - edge(x)).exp();
            let mut next = x + step;
            let bracket_ok = next > lo && next < hi && next.is_finite();
            if !bracket_ok {
                next = if hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    (2.0 * x).max(x + b.sigma())
                };
            }
            if (next - x).abs() <= 1e-15 * x.abs() || (hi.is_finite() && hi - lo <= 1e-15 * hi) {
                return Ok(if forward { next } else { -next });
            }
            x = next;
        }
        Err(Error::Numeric(format!("displacement solve failed at t = {t}")))
    }

    /// Transport map `T(t)`.
    pub fn transport_map(&self, t: f64) -> Result<f64> {
        Ok(t + self.displacement(t)?)
    }
}

/// Options for [`w2_squared_with`].
#[derive(Debug, Clone, Copy)]
pub struct W2Options {
    /// Absolute quadrature tolerance.
    pub tol: f64,
    /// Relative quadrature tolerance.
    pub rel_tol: f64,
    /// Number of diagnostic grid points to record (0 for none).
    pub diagnostic_points: usize,
}

impl W2Options {
    /// Absolute tolerance `tol` with default relative tolerance and no diagnostics.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            rel_tol: 1e-10,
            diagnostic_points: 0,
        }
    }
}

/// One diagnostic grid row of a transport evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportGridPoint {
    /// Location.
    pub t: f64,
    /// Source density at `t`.
    pub rho: f64,
    /// Transport map value `T(t)`.
    pub map: f64,
    /// Riemann contribution `rho(t) (T(t) - t)^2 dt`.
    pub contribution: f64,
}

/// Result of a W2 computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportEvaluation {
    /// Optional diagnostic grid over the integration window.
    pub grid: Vec<TransportGridPoint>,
    /// Squared Wasserstein-2 distance over the window.
    pub total: f64,
    /// Certified bound on the contribution outside the window.
    pub tail_bound: f64,
    /// Quadrature error estimate inside the window.
    pub quadrature_error: f64,
    /// Integration window.
    pub window: (f64, f64),
}

/// Squared W2 distance between two smoothed mixtures with absolute tolerance `tol`.
pub fn w2_squared(a: &SmoothedMixture, b: &SmoothedMixture, tol: f64) -> Result<TransportEvaluation> {
    w2_squared_with(&MixturePair::new(a, b), &W2Options::with_tol(tol))
}

/// Integration window: the source quantile window widened to cover every
/// source atom by six noise scales.
pub(crate) fn transport_window(a: &SmoothedMixture) -> Result<(f64, f64)> {
    let (rmin, rmax) = a.base().support();
    let lo = a.quantile(WINDOW_EPS)?.min(rmin - 6.0 * a.sigma());
    let hi = a.quantile(1.0 - WINDOW_EPS)?.max(rmax + 6.0 * a.sigma());
    Ok((lo, hi))
}

pub(crate) fn panel_breakpoints(lo: f64, hi: f64, centers: &[f64], scale: f64) -> Vec<f64> {
    let mut cand = Vec::new();
    for &c in centers {
        for k in [0.0, 1.0, 2.0, 4.0, 8.0] {
            cand.push(c - k * scale);
            cand.push(c + k * scale);
        }
    }
    let coarse = breakpoints_within(lo, hi, cand);
    // Limit panel width so that the initial Simpson samples resolve the integrand.
    let max_width = 8.0 * scale;
    let mut out = Vec::with_capacity(coarse.len());
    for w in coarse.windows(2) {
        out.push(w[0]);
        let pieces = ((w[1] - w[0]) / max_width).ceil().min(4096.0) as usize;
        for j in 1..pieces {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
        }
    }
    out.push(hi);
    out
}

/// Squared W2 distance for a prepared pair.
pub fn w2_squared_with(pair: &MixturePair<'_>, opts: &W2Options) -> Result<TransportEvaluation> {
    let a = pair.source();
    let b = pair.target();
    let (lo, hi) = transport_window(a)?;
    let mut centers: Vec<f64> = a.base().locations().to_vec();
    centers.extend(b.base().locations().iter().copied());
    let bps = panel_breakpoints(lo, hi, &centers, a.sigma());
    let failure = std::sync::Mutex::new(None::<Error>);
    let integrand = |t: f64| -> f64 {
        match pair.displacement(t) {
            Ok(d) => (a.log_pdf(t) + 2.0 * d.abs().ln()).exp(),
            Err(e) => {
                let mut slot = failure.lock().expect("failure slot");
                if slot.is_none() {
                    *slot = Some(e);
                }
                f64::NAN
            }
        }
    };
    let quad = integrate(
        integrand,
        &bps,
        &QuadOptions {
            abs_tol: opts.tol,
            rel_tol: opts.rel_tol,
            ..QuadOptions::default()
        },
    );
    if let Some(e) = failure.into_inner().expect("failure slot") {
        return Err(e);
    }
    let quad = quad?;
    let tail_bound = transport_tail_bound(a, b, lo, hi)?;
    let mut grid = Vec::new();
    if opts.diagnostic_points >= 2 {
        let m = opts.diagnostic_points;
        let dt = (hi - lo) / (m - 1) as f64;
        for i in 0..m {
            let t = lo + dt * i as f64;
            let d = pair.displacement(t)?;
            let rho = a.pdf(t);
            grid.push(TransportGridPoint {
                t,
                rho,
                map: t + d,
                contribution: rho * d * d * dt,
            });
        }
    }
    Ok(TransportEvaluation {
        grid,
        total: quad.value.max(0.0),
        tail_bound,
        quadrature_error: quad.error,
        window: (lo, hi),
    })
}

/// Linear-in-`|x|` displacement bound for unit-noise smoothings of two
/// subgaussian laws with the given profiles.
pub fn linear_displacement_bound(p: &SubgaussianProfile, q: &SubgaussianProfile, x: f64) -> f64 {
    let k1 = p.k * (2.0 * (2.0 * p.c).ln()).sqrt();
    let arg = x.abs() + 2.0 + k1;
    let k2 = q.k * arg + q.k * (2.0 * (4.0 * arg * q.c).ln()).sqrt();
    2.0 * x.abs() + 2.0 + k1 + k2
}

/// Derivative of [`linear_displacement_bound`] in `|x|`.
fn linear_displacement_slope(p: &SubgaussianProfile, q: &SubgaussianProfile, x: f64) -> f64 {
    let k1 = p.k * (2.0 * (2.0 * p.c).ln()).sqrt();
    let arg = x.abs() + 2.0 + k1;
    let root = (2.0 * (4.0 * arg * q.c).ln()).sqrt();
    2.0 + q.k + q.k / (arg * root)
}

/// Certified bound on `int_{outside [lo, hi]} rho_A (T(t) - t)^2 dt`.
///
/// Uses the linear displacement bound (valid for a shared noise scale) with
/// profiles fitted to each base, a concave-majorant linearization at the
/// window edges, and closed-form Gaussian partial moments. Returns `+inf`
/// when the noise scales differ, since the bound does not apply.
pub fn transport_tail_bound(a: &SmoothedMixture, b: &SmoothedMixture, lo: f64, hi: f64) -> Result<f64> {
    if a.sigma() != b.sigma() {
        return Ok(f64::INFINITY);
    }
    let s = a.sigma();
    let pa = SubgaussianProfile::default_for(a.base(), s)?;
    let pb = SubgaussianProfile::default_for(b.base(), s)?;
    let unit = a.base().scaled(1.0 / s)?;
    let mut total = 0.0;
    for (edge, mirror) in [(hi / s, false), (lo / s, true)] {
        let x0 = edge.abs();
        let c0 = linear_displacement_bound(&pa, &pb, x0);
        let c1 = linear_displacement_slope(&pa, &pb, x0);
        let coeffs = [c0 * c0, 2.0 * c0 * c1, c1 * c1];
        for (x, lw) in unit.atoms() {
            let z0 = if mirror { -(edge - x) } else { edge - x };
            total += lw.exp() * gauss_tail_poly_bound(z0, &coeffs);
        }
    }
    Ok(total * s * s)
}

/// Crossing lower bound: when `F_A(t) >= F_B(t + 2)`, returns `P_B([t + 1, t + 2])`.
pub fn w2_crossing_lower_bound(a: &SmoothedMixture, b: &SmoothedMixture, t: f64) -> Option<f64> {
    let (la, lb) = (a.log_cdf(t), b.log_cdf(t + 2.0));
    let premise = if la.max(lb) < -std::f64::consts::LN_2 {
        la >= lb
    } else {
        a.log_sf(t) <= b.log_sf(t + 2.0)
    };
    premise.then(|| b.interval_mass(t + 1.0, t + 2.0))
}

/// Report of [`displacement_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementReport {
    /// `sup_{[t-h, t+h]} |F_P - F_Q|`.
    pub cdf_gap_sup: f64,
    /// `inf_{[t-h, t+h]} rho_P`.
    pub density_inf: f64,
    /// Ratio of the two, the displacement bound.
    pub bound: f64,
    /// Whether the bound is at most `h`.
    pub premise_holds: bool,
    /// Computed displacement `F_Q^{-1}(F_P(t)) - t`.
    pub displacement: f64,
    /// `Some(ok)` when the premise holds, `None` otherwise.
    pub holds: Option<bool>,
}

fn refine_extremum(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, maximize: bool) -> f64 {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |x: f64| sign * f(x);
    let phi = 0.618_033_988_749_895;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..40 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    sign * g(0.5 * (a + b)).max(gc).max(gd)
}

/// Dense-grid check of `|F_Q^{-1}(F_P(t)) - t| <= sup|F_P - F_Q| / inf rho_P` over `[t - h, t + h]`.
pub fn displacement_bound_check(
    p: &SmoothedMixture,
    q: &SmoothedMixture,
    t: f64,
    h: f64,
) -> Result<DisplacementReport> {
    if !(h > 0.0) {
        return invalid("window half-width h must be positive");
    }
    let pair = MixturePair::new(p, q);
    let points = 2001;
    let dt = 2.0 * h / (points - 1) as f64;
    let gap = |x: f64| pair.cdf_gap(x).to_f64().abs();
    let dens = |x: f64| p.pdf(x);
    let mut best_gap = (0.0_f64, 0usize);
    let mut worst_dens = (f64::INFINITY, 0usize);
    for i in 0..points {
        let x = t - h + dt * i as f64;
        let g = gap(x);
        if g > best_gap.0 {
            best_gap = (g, i);
        }
        let r = dens(x);
        if r < worst_dens.0 {
            worst_dens = (r, i);
        }
    }
    let around = |i: usize| {
        let l = t - h + dt * i.saturating_sub(1) as f64;
        let r = (t - h + dt * (i + 1).min(points - 1) as f64).min(t + h);
        (l, r)
    };
    let (gl, gr) = around(best_gap.1);
    let sup_gap = best_gap.0.max(refine_extremum(&gap, gl, gr, true));
    let (dl, dr) = around(worst_dens.1);
    let inf_dens = worst_dens.0.min(refine_extremum(&dens, dl, dr, false));
    let bound = if sup_gap == 0.0 { 0.0 } else { sup_gap / inf_dens };
    let premise_holds = bound <= h;
    let displacement = pair.displacement(t)?;
    let holds = premise_holds.then(|| displacement.abs() <= bound * (1.0 + 1e-9) + 1e-15);
    Ok(DisplacementReport {
        cdf_gap_sup: sup_gap,
        density_inf: inf_dens,
        bound,
        premise_holds,
        displacement,
        holds,
    })
}

/// Report of [`truncation_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Grid points examined.
    pub points: usize,
    /// Grid points where the bound failed.
    pub violations: Vec<f64>,
    /// Largest ratio `|T(x) - x| / bound(x)` over the grid.
    pub max_ratio: f64,
}

/// Checks the linear displacement bound on a grid (unit noise scale required).
pub fn truncation_bound_check(
    p_profile: &SubgaussianProfile,
    q_profile: &SubgaussianProfile,
    p: &SmoothedMixture,
    q: &SmoothedMixture,
    x_grid: &[f64],
) -> Result<TruncationReport> {
    if p.sigma() != 1.0 || q.sigma() != 1.0 {
        return invalid("truncation bound check requires unit noise; rescale first");
    }
    let radii = |d: &crate::dist_core::AtomicDistribution| -> Vec<f64> {
        let mut r: Vec<f64> = d.locations().iter().map(|x| x.abs()).collect();
        r.extend((0..=200).map(|i| i as f64 * 0.1));
        r
    };
    if let Some(r) = p_profile.verify_on(p.base(), &radii(p.base())) {
        return invalid(format!("source profile violates its tail inequality at r = {r}"));
    }
    if let Some(r) = q_profile.verify_on(q.base(), &radii(q.base())) {
        return invalid(format!("target profile violates its tail inequality at r = {r}"));
    }
    let pair = MixturePair::new(p, q);
    let mut violations = Vec::new();
    let mut max_ratio = 0.0_f64;
    for &x in x_grid {
        let d = pair.displacement(x)?.abs();
        let bound = linear_displacement_bound(p_profile, q_profile, x);
        max_ratio = max_ratio.max(d / bound);
        if d > bound {
            violations.push(x);
        }
    }
    Ok(TruncationReport {
        points: x_grid.len(),
        violations,
        max_ratio,
    })
}

/// Report of [`upper_bound_decomposition`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// Sample size.
    pub n: u64,
    /// Exponent used for the density threshold.
    pub alpha: f64,
    /// Truncation radius `2 K sqrt(2 log n)`.
    pub radius: f64,
    /// Density threshold `n^{-alpha}`.
    pub density_threshold: f64,
    /// Total squared W2 between truth and smoothed empirical.
    pub total: f64,
    /// Contribution from `|t| > radius`.
    pub outer: f64,
    /// Contribution from low-density points inside the radius.
    pub low_density: f64,
    /// Contribution from high-density points inside the radius.
    pub high_density: f64,
    /// Number of grid points where the pointwise displacement premise held.
    pub pointwise_checked: usize,
    /// Number of those points where the pointwise bound failed.
    pub pointwise_violations: usize,
}

/// Splits the squared W2 distance between `P * N(0,1)` and its smoothed
/// empirical counterpart into outer, low-density and high-density regions.
pub fn upper_bound_decomposition(
    p: &SmoothedMixture,
    k: f64,
    n: u64,
    seed: u64,
    tol: f64,
) -> Result<DecompositionReport> {
    if p.sigma() != 1.0 {
        return invalid("decomposition requires unit noise; rescale first");
    }
    if n < 2 {
        return invalid("decomposition needs n >= 2");
    }
    let mut rng = stream_rng(seed, 0);
    let pn = empirical_from_counts(p.base(), n, &mut rng)?;
    let smoothed_emp = SmoothedMixture::new(pn, 1.0)?;
    let pair = MixturePair::new(p, &smoothed_emp);
    let alpha = crate::tail_bounds::alpha_exponent(k, 1.0)?;
    let ln_n = (n as f64).ln();
    let radius = 2.0 * k * (2.0 * ln_n).sqrt();
    let threshold_log = -alpha * ln_n;
    let (lo, hi) = transport_window(p)?;
    let lo = lo.min(-radius - 1.0);
    let hi = hi.max(radius + 1.0);
    // Locate density level crossings inside the radius.
    let scan = 4000;
    let mut cuts = vec![-radius, radius];
    let level = |t: f64| p.log_pdf(t) - threshold_log;
    let step = 2.0 * radius / scan as f64;
    let mut prev_t = -radius;
    let mut prev = level(prev_t);
    for i in 1..=scan {
        let t = -radius + step * i as f64;
        let cur = level(t);
        if (prev < 0.0) != (cur < 0.0) {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (level(m) < 0.0) == (prev < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            cuts.push(0.5 * (a + b));
        }
        prev = cur;
        prev_t = t;
    }
    let mut centers: Vec<f64> = p.base().locations().to_vec();
    centers.extend(cuts.iter().copied());
    let mut bps = panel_breakpoints(lo, hi, &centers, 1.0);
    bps.extend(cuts.iter().copied().filter(|c| *c > lo && *c < hi));
    let bps = breakpoints_within(lo, hi, bps);
    let opts = QuadOptions {
        abs_tol: tol,
        ..QuadOptions::default()
    };
    let region = |t: f64| -> usize {
        if t.abs() > radius {
            0
        } else if p.log_pdf(t) < threshold_log {
            1
        } else {
            2
        }
    };
    let mut parts = [0.0; 3];
    for w in bps.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let r = region(mid);
        let q = integrate(
            |t| match pair.displacement(t) {
                Ok(d) => p.pdf(t) * d * d,
                Err(_) => f64::NAN,
            },
            &[w[0], w[1]],
            &opts,
        )?;
        parts[r] += q.value;
    }
    let mut checked = 0;
    let mut violations = 0;
    let probes = 41;
    for i in 0..probes {
        let t = -radius + 2.0 * radius * i as f64 / (probes - 1) as f64;
        let rep = displacement_bound_check(p, &smoothed_emp, t, 1.0)?;
        if let Some(ok) = rep.holds {
            checked += 1;
            if !ok {
                violations += 1;
            }
        }
    }
    let total = parts.iter().sum();
    Ok(DecompositionReport {
        n,
        alpha,
        radius,
        density_threshold: threshold_log.exp(),
        total,
        outer: parts[0],
        low_density: parts[1],
        high_density: parts[2],
        pointwise_checked: checked,
        pointwise_violations: violations,
    })
}

/// Monte Carlo estimate of `W2^2` from the sorted-sample coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingEstimate {
    /// Mean of the per-batch estimates.
    pub estimate: f64,
    /// Standard error across batches.
    pub stderr: f64,
    /// Number of independent batches.
    pub batches: usize,
    /// Sample pairs per batch.
    pub pairs_per_batch: usize,
}

/// Estimates `W2^2(A, B)` by pairing sorted independent samples.
///
/// The `pairs` draws are split into `batches` independent batches; each batch
/// sorts its own samples and averages the squared differences, and the
/// standard error is taken across batches.
pub fn sorted_coupling_w2sq(
    a: &SmoothedMixture,
    b: &SmoothedMixture,
    pairs: usize,
    batches: usize,
    seed: u64,
) -> Result<CouplingEstimate> {
    if batches < 2 || pairs < 2 * batches {
        return invalid("need at least two batches with at least two pairs each");
    }
    let m = pairs / batches;
    let values: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|i| {
            let mut ra = stream_rng(seed, 2 * i as u64);
            let mut rb = stream_rng(seed, 2 * i as u64 + 1);
            let mut xs = draw_smoothed(a, m, &mut ra);
            let mut ys = draw_smoothed(b, m, &mut rb);
            xs.sort_unstable_by(f64::total_cmp);
            ys.sort_unstable_by(f64::total_cmp);
            xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / m as f64
        })
        .collect();
    let k = batches as f64;
    let estimate = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - estimate) * (v - estimate)).sum::<f64>() / (k - 1.0);
    Ok(CouplingEstimate {
        estimate,
        stderr: (var / k).sqrt(),
        batches,
        pairs_per_batch: m,
    })
}

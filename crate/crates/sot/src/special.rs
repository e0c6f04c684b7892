//! Log-space arithmetic and standard normal special functions.
//!
//! Everything that touches Gaussian tails goes through this module so that
//! probabilities far below `f64::MIN_POSITIVE` remain representable as
//! logarithms and interval masses keep full relative accuracy.

/// `ln(sqrt(2 * pi))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `sqrt(2)`.
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Eight-point Gauss-Legendre nodes on `[-1, 1]` (positive half).
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
/// Matching Gauss-Legendre weights.
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; returns `-inf` when the difference vanishes.
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + log1m_exp(b - a)
}

/// `ln(1 - e^x)` for `x < 0`, accurate near both ends.
pub fn log1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Log-sum-exp of a slice; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAcc {
    max: f64,
    scaled: f64,
}

impl Default for LogSumAcc {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumAcc {
    /// Empty accumulator (represents a sum of zero).
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    /// Adds `e^v` to the running sum.
    pub fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    /// Logarithm of the accumulated sum.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// `+1`, `-1`, or `0` for an exact zero.
    pub sign: f64,
    /// Natural log of the magnitude (`-inf` for zero).
    pub log_abs: f64,
}

impl SignedLog {
    /// Exact zero.
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        log_abs: f64::NEG_INFINITY,
    };

    /// Converts an ordinary float.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: x.signum(),
                log_abs: x.abs().ln(),
            }
        }
    }

    /// Converts back to an ordinary float (may underflow to zero).
    pub fn to_f64(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Sums signed log-magnitude terms, returning the signed log of the total.
pub fn signed_log_sum(terms: impl IntoIterator<Item = SignedLog>) -> SignedLog {
    let mut pos = LogSumAcc::new();
    let mut neg = LogSumAcc::new();
    for t in terms {
        if t.sign > 0.0 {
            pos.add(t.log_abs);
        } else if t.sign < 0.0 {
            neg.add(t.log_abs);
        }
    }
    let (p, n) = (pos.value(), neg.value());
    if p > n {
        SignedLog {
            sign: 1.0,
            log_abs: log_diff_exp(p, n),
        }
    } else if n > p {
        SignedLog {
            sign: -1.0,
            log_abs: log_diff_exp(n, p),
        }
    } else {
        SignedLog::ZERO
    }
}

/// Standard normal log-density.
pub fn norm_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    norm_log_pdf(x).exp()
}

/// Mills ratio `(1 - Phi(x)) / phi(x)` for `x >= 0`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 10.0 {
        0.5 * libm::erfc(x / SQRT_2) / norm_pdf(x)
    } else {
        // Continued fraction 1/(x + 1/(x + 2/(x + 3/(x + ...)))), evaluated backward.
        let mut t = x;
        for k in (1..=80).rev() {
            t = x + k as f64 / t;
        }
        1.0 / t
    }
}

/// `ln(1 - Phi(x))` with full relative accuracy in both tails.
pub fn norm_log_sf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x >= 10.0 {
        norm_log_pdf(x) + mills_ratio(x).ln()
    } else if x > -1.0 {
        (0.5 * libm::erfc(x / SQRT_2)).ln()
    } else {
        (-0.5 * libm::erfc(-x / SQRT_2)).ln_1p()
    }
}

/// `ln(Phi(x))` with full relative accuracy in both tails.
pub fn norm_log_cdf(x: f64) -> f64 {
    norm_log_sf(-x)
}

/// Standard normal CDF via the complementary error function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function via the complementary error function.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `ln(Phi(b) - Phi(a))` for `a < b`, accurate for narrow and far-tail intervals.
///
/// Returns `-inf` when `b <= a`.
pub fn norm_log_interval(a: f64, b: f64) -> f64 {
    if b <= a || a.is_nan() || b.is_nan() {
        return f64::NEG_INFINITY;
    }
    if a == f64::NEG_INFINITY {
        return norm_log_cdf(b);
    }
    if b == f64::INFINITY {
        return norm_log_sf(a);
    }
    norm_log_interval_width(a, b - a)
}

/// `ln(Phi(a + w) - Phi(a))` for `w > 0`, using the width exactly as given.
///
/// Narrow intervals are integrated directly so that no precision is lost to
/// rounding in `a + w`.
pub fn norm_log_interval_width(a: f64, w: f64) -> f64 {
    if !(w > 0.0) || a.is_nan() {
        return f64::NEG_INFINITY;
    }
    let b = a + w;
    let m = a + 0.5 * w;
    if w <= 1.0 && w * (m.abs() + w) <= 1.0 {
        let half = 0.5 * w;
        let mut acc = LogSumAcc::new();
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let lw = weight.ln();
            acc.add(lw + norm_log_pdf(m + half * node));
            acc.add(lw + norm_log_pdf(m - half * node));
        }
        half.ln() + acc.value()
    } else if a >= 0.0 {
        log_diff_exp(norm_log_sf(a), norm_log_sf(b))
    } else if b <= 0.0 {
        log_diff_exp(norm_log_cdf(b), norm_log_cdf(a))
    } else {
        (-(norm_cdf(a) + norm_sf(b))).ln_1p()
    }
}

/// Upper bound on `int_{z0}^inf phi(z) * sum_j c_j (z - z0)^j dz` for nonnegative `c_j`.
///
/// Used to certify the mass of polynomially weighted Gaussian tails.
pub fn gauss_tail_poly_bound(z0: f64, coeffs: &[f64]) -> f64 {
    debug_assert!(coeffs.iter().all(|c| *c >= 0.0));
    let deg = coeffs.len();
    if deg == 0 {
        return 0.0;
    }
    let mut moments = vec![0.0; deg];
    if z0 <= 0.0 {
        moments[0] = norm_sf(z0);
        if deg > 1 {
            moments[1] = norm_pdf(z0) - z0 * moments[0];
        }
        for j in 2..deg {
            moments[j] = (j - 1) as f64 * moments[j - 2] - z0 * moments[j - 1];
        }
    } else {
        let phi = norm_pdf(z0);
        let mut factorial = 1.0;
        let crude: Vec<f64> = (0..deg)
            .map(|j| {
                if j > 0 {
                    factorial *= j as f64;
                }
                // int_0^inf s^j exp(-z0 s) (1 - s^2/2 + s^4/8) ds, an upper bound
                // because exp(-x) <= 1 - x + x^2/2 for x >= 0.
                let jf = j as f64;
                let z2 = z0 * z0;
                let corr = 1.0 - (jf + 1.0) * (jf + 2.0) / (2.0 * z2)
                    + (jf + 1.0) * (jf + 2.0) * (jf + 3.0) * (jf + 4.0) / (8.0 * z2 * z2);
                factorial / z0.powi(j as i32 + 1) * corr.min(1.0)
            })
            .collect();
        if z0 < 8.0 {
            let mut scaled = vec![0.0; deg];
            scaled[0] = mills_ratio(z0);
            if deg > 1 {
                scaled[1] = 1.0 - z0 * scaled[0];
            }
            for j in 2..deg {
                scaled[j] = (j - 1) as f64 * scaled[j - 2] - z0 * scaled[j - 1];
            }
            for j in 0..deg {
                moments[j] = phi * scaled[j].max(0.0).min(crude[j]);
            }
        } else {
            for j in 0..deg {
                moments[j] = phi * crude[j];
            }
        }
    }
    let total: f64 = coeffs.iter().zip(moments.iter()).map(|(c, m)| c * m.max(0.0)).sum();
    total * (1.0 + 1e-12)
}

/// `ln int_{z0}^inf phi(z) exp(a + b s + c s^2) dz` with `s = z - z0`.
///
/// Returns `+inf` when the integral diverges (`c >= 1/2`).
pub fn log_gauss_tail_exp_quad(z0: f64, a: f64, b: f64, c: f64) -> f64 {
    let tau = 1.0 - 2.0 * c;
    if tau <= 0.0 {
        return f64::INFINITY;
    }
    let beta = b - z0;
    norm_log_pdf(z0)
        + a
        + 0.5 * (2.0 * std::f64::consts::PI / tau).ln()
        + beta * beta / (2.0 * tau)
        + norm_log_cdf(beta / tau.sqrt())
}

/// `(1 + x) ln(1 + x) - x` expressed through `u = ln(1 + x)`: `u e^u - e^u + 1`.
///
/// This is the nonnegative Bregman integrand of the KL divergence.
pub fn kl_bregman(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // sum_{n>=2} (n-1) u^n / n!
        let mut term = u; // u^1 / 1!
        let mut total = 0.0;
        for n in 2..=18 {
            term *= u / n as f64;
            total += (n - 1) as f64 * term;
        }
        total
    } else {
        u.exp() * (u - 1.0) + 1.0
    }
}

/// `e^{lambda u} - 1 - lambda (e^u - 1)`, the nonnegative Renyi integrand for `lambda > 1`.
pub fn renyi_bregman(u: f64, lambda: f64) -> f64 {
    if u.abs() < 0.05 && (lambda * u).abs() < 0.2 {
        // sum_{n>=2} (lambda^n - lambda) u^n / n!
        let mut un = u; // u^n / n! at n = 1
        let mut ln = lambda;
        let mut total = 0.0;
        for n in 2..=24 {
            un *= u / n as f64;
            ln *= lambda;
            total += (ln - lambda) * un;
        }
        total
    } else {
        (lambda * u).exp_m1() - lambda * u.exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sf_matches_erfc_in_overlap() {
        for &x in &[9.0, 9.9, 10.0, 10.1, 12.0, 20.0, 26.0] {
            let direct = (0.5 * libm::erfc(x / SQRT_2)).ln();
            let got = norm_log_sf(x);
            assert!((got - direct).abs() < 1e-12 * direct.abs(), "x={x}: {got} vs {direct}");
        }
    }

    #[test]
    fn far_tail_is_finite() {
        let v = norm_log_sf(100.0);
        // ln phi(100) - ln(100) is the leading asymptotic term.
        let lead = norm_log_pdf(100.0) - 100f64.ln();
        assert!((v - lead).abs() < 1e-3);
    }

    #[test]
    fn interval_narrow_and_wide_agree() {
        let a = 1.3;
        let b = 1.3 + 1e-6;
        let narrow = norm_log_interval(a, b).exp();
        assert!((narrow / (norm_pdf(1.3 + 5e-7) * 1e-6) - 1.0).abs() < 1e-10);
        let wide = norm_log_interval(-0.5, 2.0).exp();
        assert!((wide - (norm_cdf(2.0) - norm_cdf(-0.5))).abs() < 1e-15);
        let far = norm_log_interval(40.0, 41.0);
        let reference = log_diff_exp(norm_log_sf(40.0), norm_log_sf(41.0));
        assert!((far - reference).abs() < 1e-10);
    }

    #[test]
    fn bregman_series_matches_direct_form() {
        for &u in &[-0.09_f64, -0.01, 0.02, 0.099] {
            let direct = u.exp() * (u - 1.0) + 1.0;
            assert!((kl_bregman(u) - direct).abs() < 1e-15);
        }
        for &u in &[-0.04_f64, 0.01, 0.049] {
            let direct = (1.7 * u).exp_m1() - 1.7 * u.exp_m1();
            assert!((renyi_bregman(u, 1.7) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn signed_sum_cancels() {
        let s = signed_log_sum([SignedLog::from_f64(3.0), SignedLog::from_f64(-1.0)]);
        assert!((s.to_f64() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tail_exp_quad_reduces_to_survival() {
        let z0 = 1.5;
        let v = log_gauss_tail_exp_quad(z0, 0.0, 0.0, 0.0).exp();
        assert!((v - norm_sf(z0)).abs() < 1e-15);
    }

    #[test]
    fn tail_poly_bound_covers_moments() {
        // int_{z0}^inf phi(z) (z - z0)^2 dz computed by brute force.
        for &z0 in &[-2.0, 0.0, 0.5, 3.0, 9.0] {
            let mut brute = 0.0;
            let n = 200_000;
            let h = 20.0 / n as f64;
            for i in 0..n {
                let z = z0 + (i as f64 + 0.5) * h;
                brute += norm_pdf(z) * (z - z0).powi(2) * h;
            }
            let bound = gauss_tail_poly_bound(z0, &[0.0, 0.0, 1.0]);
            assert!(bound >= brute * (1.0 - 1e-9), "z0={z0}");
            assert!(bound <= brute * 1.05 + 1e-300, "z0={z0}: {bound} vs {brute}");
        }
    }
}

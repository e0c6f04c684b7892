//! Globally adaptive Simpson quadrature over a partition into panels.
//!
//! Every panel starts as one interval; the interval with the largest local
//! error estimate is bisected until the summed error meets the tolerance.
//! Refinement order and the final summation are deterministic, so results are
//! bit-stable across runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerance and refinement limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Absolute tolerance on the whole integral.
    pub abs_tol: f64,
    /// Relative tolerance on the whole integral (combined with `abs_tol` by `max`).
    pub rel_tol: f64,
    /// Maximum bisection depth of any interval.
    pub max_depth: u32,
    /// Minimum bisection depth of every interval.
    pub min_depth: u32,
    /// Cap on integrand evaluations.
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 60,
            min_depth: 2,
            max_evals: 4_000_000,
        }
    }
}

/// Integral value with its accumulated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    /// Richardson-extrapolated integral.
    pub value: f64,
    /// Sum of local error estimates.
    pub error: f64,
    /// Number of integrand evaluations.
    pub evals: usize,
}

/// Interval with integrand values at its five equally spaced nodes.
#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    f: [f64; 5],
    depth: u32,
    value: f64,
    error: f64,
}

impl Cell {
    fn new(a: f64, b: f64, f: [f64; 5], depth: u32) -> Self {
        let w = b - a;
        let coarse = w / 6.0 * (f[0] + 4.0 * f[2] + f[4]);
        let fine = w / 12.0 * (f[0] + 4.0 * f[1] + 2.0 * f[2] + 4.0 * f[3] + f[4]);
        let delta = fine - coarse;
        let (value, error) = if delta.is_finite() {
            (fine + delta / 15.0, delta.abs() / 15.0)
        } else {
            (fine, f64::INFINITY)
        };
        Self {
            a,
            b,
            f,
            depth,
            value,
            error,
        }
    }

    fn splittable(&self, max_depth: u32) -> bool {
        let q = 0.25 * (self.b - self.a);
        self.depth < max_depth && self.a + 0.5 * q > self.a && self.b - 0.5 * q < self.b
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn split<F: Fn(f64) -> f64>(f: &F, c: &Cell) -> (Cell, Cell) {
    let q = 0.25 * (c.b - c.a);
    let m = c.a + 2.0 * q;
    let l1 = f(c.a + 0.5 * q);
    let l3 = f(c.a + 1.5 * q);
    let r1 = f(m + 0.5 * q);
    let r3 = f(m + 1.5 * q);
    (
        Cell::new(c.a, m, [c.f[0], l1, c.f[1], l3, c.f[2]], c.depth + 1),
        Cell::new(m, c.b, [c.f[2], r1, c.f[3], r3, c.f[4]], c.depth + 1),
    )
}

/// Integrates `f` over the union of consecutive breakpoints.
///
/// `breakpoints` must be sorted ascending with at least two entries; each
/// consecutive pair forms an initial panel. The target accuracy is
/// `max(abs_tol, rel_tol * |integral|)`, evaluated against the running
/// estimate as refinement proceeds.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidInput("quadrature needs at least two breakpoints".into()));
    }
    let mut evals = 0usize;
    let mut active = BinaryHeap::new();
    let mut done: Vec<Cell> = Vec::new();
    let mut pending: Vec<Cell> = Vec::new();
    for w in breakpoints.windows(2).filter(|w| w[1] > w[0]) {
        let (a, b) = (w[0], w[1]);
        let h = 0.25 * (b - a);
        let vals = [f(a), f(a + h), f(a + 2.0 * h), f(a + 3.0 * h), f(b)];
        evals += 5;
        pending.push(Cell::new(a, b, vals, 0));
    }
    let non_finite = |c: &Cell| c.f.iter().any(|v| !v.is_finite());
    let abort = |value: f64| Error::Quadrature {
        estimate: value,
        error: f64::INFINITY,
    };
    if pending.iter().any(non_finite) {
        return Err(abort(f64::NAN));
    }
    while let Some(c) = pending.pop() {
        if c.depth < opts.min_depth && c.splittable(opts.max_depth) {
            let (l, r) = split(&f, &c);
            evals += 4;
            if non_finite(&l) || non_finite(&r) {
                return Err(abort(f64::NAN));
            }
            pending.push(l);
            pending.push(r);
        } else {
            active.push(c);
        }
    }
    let mut value: f64 = active.iter().map(|c| c.value).sum();
    let mut error: f64 = active.iter().map(|c| c.error).sum();
    let mut since_resum = 0usize;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || evals >= opts.max_evals {
            break;
        }
        let Some(c) = active.pop() else { break };
        if !c.splittable(opts.max_depth) {
            done.push(c);
            continue;
        }
        let (l, r) = split(&f, &c);
        evals += 4;
        if non_finite(&l) || non_finite(&r) {
            return Err(abort(value));
        }
        value += l.value + r.value - c.value;
        error += l.error + r.error - c.error;
        active.push(l);
        active.push(r);
        since_resum += 1;
        if since_resum >= 256 || !error.is_finite() {
            // Recompute the running sums to shed accumulated rounding.
            since_resum = 0;
            value = active.iter().chain(done.iter()).map(|c| c.value).sum();
            error = active.iter().chain(done.iter()).map(|c| c.error).sum();
        }
    }
    let mut cells: Vec<Cell> = active.into_vec();
    cells.extend(done);
    cells.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = cells.iter().map(|c| c.value).sum();
    let error: f64 = cells.iter().map(|c| c.error).sum();
    let target = opts.abs_tol.max(opts.rel_tol * value.abs());
    if !(error <= target) || !value.is_finite() {
        return Err(Error::Quadrature {
            estimate: value,
            error,
        });
    }
    Ok(QuadResult { value, error, evals })
}

/// Sorted, deduplicated breakpoints from arbitrary candidate points clipped to `[lo, hi]`.
pub fn breakpoints_within(lo: f64, hi: f64, candidates: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = candidates
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let r = integrate(|x| x * x * x - x, &[0.0, 1.0, 2.0], &QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_gaussian_peak() {
        let r = integrate(
            |x| (-0.5 * x * x).exp(),
            &[-10.0, -2.0, 0.0, 2.0, 10.0],
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn relative_tolerance_handles_tiny_scales() {
        let scale = 1e-200;
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            ..QuadOptions::default()
        };
        let r = integrate(|x| scale * x.sin(), &[0.0, std::f64::consts::PI], &opts).unwrap();
        assert!((r.value / scale - 2.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_are_sorted_and_clipped() {
        let b = breakpoints_within(0.0, 1.0, [0.5, 2.0, -1.0, 0.5, 0.25]);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
    }
}

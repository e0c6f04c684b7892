//! Exponent formulas, tail-versus-density probes, and interval probabilities.

mod common;

use common::SEED;
use sot::constructions::{bernoulli_two_point, chi2_hard_example, chi2_hard_ratio, w2_hard_example};
use sot::dist_core::{sample_smoothed, AtomicDistribution, SmoothedMixture, SubgaussianProfile};
use sot::tail_bounds::{
    alpha_exponent, beta_exponent, density_tail_lower_probe, interval_prob_bounds, log_spaced_tail_grid,
    tail_density_inequality_probe, GRID_LOG_TAIL_FLOOR,
};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn beta_examples() {
    assert!((beta_exponent(1.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((beta_exponent(3.0).unwrap() - 0.36).abs() < 1e-15);
    assert!(beta_exponent(1e4).unwrap() < 1e-7);
    assert!(beta_exponent(0.0).is_err());
}

#[test]
fn alpha_examples() {
    assert!((alpha_exponent(1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((alpha_exponent(2.5, 2.5).unwrap() - 0.5).abs() < 1e-15);
    assert!((alpha_exponent(2.0, 1.0).unwrap() - 25.0 / 68.0).abs() < 1e-15);
    assert!((alpha_exponent(1e6, 1.0).unwrap() - 0.25).abs() < 1e-10);
    assert!(alpha_exponent(1.0, 0.0).is_err());
}

#[test]
fn alpha_beta_identity_at_unit_noise() {
    for i in 0..50 {
        let k = 0.1 * 1.15_f64.powi(i);
        let a = alpha_exponent(k, 1.0).unwrap();
        let b = beta_exponent(k).unwrap();
        assert!((2.0 * a - 1.0 / (2.0 - b)).abs() <= 1e-12, "K = {k}");
    }
}

#[test]
fn tail_probe_point_mass_constant_is_finite() {
    let p = AtomicDistribution::point_mass(0.0);
    let prof = SubgaussianProfile::new(1.0, 1.0, 0.0).unwrap();
    let r = tail_density_inequality_probe(&p, &prof, 0.1, &linspace(0.0, 8.0, 161)).unwrap();
    assert!(r.m_hat.is_finite() && r.m_hat > 0.0);
    assert_eq!(r.rows.len(), 161);
}

#[test]
fn tail_probe_is_tight_at_the_crossing_radius() {
    for &h in &[20.0, 30.0] {
        let k = 2.0;
        let p = bernoulli_two_point(h, k).unwrap();
        let prof = SubgaussianProfile::fit(&p, k).unwrap();
        let r0 = (k * k + 1.0) * h / (2.0 * k * k);
        let r = tail_density_inequality_probe(&p, &prof, 0.01, &[r0]).unwrap();
        let beta = 16.0 / 25.0;
        assert!((r.beta - beta).abs() < 1e-15);
        assert!((r.rows[0].ratio - beta).abs() <= 0.1 * beta, "h = {h}: {}", r.rows[0].ratio);
    }
}

#[test]
fn tail_probe_constant_collapses_as_slack_reaches_exponent() {
    let p = bernoulli_two_point(6.0, 2.0).unwrap();
    let prof = SubgaussianProfile::fit(&p, 2.0).unwrap();
    let grid = linspace(0.0, 20.0, 201);
    let beta = beta_exponent(2.0).unwrap();
    let r = tail_density_inequality_probe(&p, &prof, beta * (1.0 - 1e-12), &grid).unwrap();
    assert!(r.m_hat <= 1.0 + 1e-9, "{}", r.m_hat);
    assert!(tail_density_inequality_probe(&p, &prof, beta, &grid).is_err());
}

#[test]
fn tail_probe_constant_is_grid_stable() {
    let (c, _) = chi2_hard_ratio(2.0).unwrap();
    let p = chi2_hard_example(2.0, c, 6).unwrap();
    let prof = SubgaussianProfile::fit(&p, 2.0).unwrap();
    let grid = log_spaced_tail_grid(&p, 1.0, 400).unwrap();
    let doubled = log_spaced_tail_grid(&p, 1.0, 799).unwrap();
    let a = tail_density_inequality_probe(&p, &prof, 0.05, &grid).unwrap().m_hat;
    let b = tail_density_inequality_probe(&p, &prof, 0.05, &doubled).unwrap().m_hat;
    assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
}

#[test]
fn default_grid_reaches_the_tail_floor() {
    let p = bernoulli_two_point(10.0, 2.0).unwrap();
    let g = log_spaced_tail_grid(&p, 1.0, 50).unwrap();
    assert_eq!(g.len(), 50);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    let m = SmoothedMixture::new(p, 1.0).unwrap();
    let last = m.log_sf(g[49]);
    assert!(last > GRID_LOG_TAIL_FLOOR && last < GRID_LOG_TAIL_FLOOR + 1e-6, "{last}");
    assert!((GRID_LOG_TAIL_FLOOR - 1e-280_f64.ln()).abs() < 1e-12);
}

#[test]
fn density_lower_probe_examples() {
    let grid: Vec<f64> = linspace(0.1, 8.0, 80);
    let prof = SubgaussianProfile::new(1.0, 1.0, 0.0).unwrap();
    let r = density_tail_lower_probe(&AtomicDistribution::point_mass(0.0), &prof, 0.1, &grid).unwrap();
    assert!(r.log_c_hat.is_infinite() && r.log_c_hat > 0.0);

    let h = 8.0;
    let p = bernoulli_two_point(h, 2.0).unwrap();
    let prof = SubgaussianProfile::fit(&p, 2.0).unwrap();
    let r = density_tail_lower_probe(&p, &prof, 0.1, &linspace(0.0, 2.0 * h, 161)).unwrap();
    assert!(r.passed, "{r:?}");

    let (c, _) = chi2_hard_ratio(2.0).unwrap();
    let g = chi2_hard_example(2.0, c, 8).unwrap();
    let r6 = g.locations()[6];
    let prof = SubgaussianProfile::fit(&g, 2.0).unwrap();
    let r = density_tail_lower_probe(&g, &prof, 0.1, &linspace(0.0, r6, 400)).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn interval_probabilities_first_stage() {
    let (p, s) = w2_hard_example(2.0, 1.0, 4).unwrap();
    let b = interval_prob_bounds(&s, &p, 1.0, 1).unwrap();
    assert!((b.c_l_explicit - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert!(b.lower_ok && b.c_l >= b.c_l_explicit, "{b:?}");
    for k in 1..=4 {
        let b = interval_prob_bounds(&s, &p, 1.0, k).unwrap();
        assert!(b.log_prob_lower_interval <= 0.0 && b.log_prob_upper_interval <= 0.0);
        assert!(b.log_prob_lower_interval.is_finite() && b.log_prob_upper_interval.is_finite());
        assert!(b.log_prob_lower_interval <= b.log_prob_upper_interval);
        assert!(b.log_c_u.is_finite() && b.log_c_l.is_finite());
    }
    assert!(interval_prob_bounds(&s, &p, 1.0, 9).is_err());
}

#[test]
fn interval_probabilities_match_monte_carlo() {
    let (p, s) = w2_hard_example(2.0, 1.0, 4).unwrap();
    let m = SmoothedMixture::new(p.clone(), 1.0).unwrap();
    let n = 10_000_000;
    let xs = sample_smoothed(&m, n, SEED).unwrap();
    let xs = xs.samples();
    let mut tested = 0;
    for k in 1..=4 {
        let rec = &s.records[k - 1];
        let b = interval_prob_bounds(&s, &p, 1.0, k).unwrap();
        for (lo, hi, lp) in [
            (rec.probe + 1.0, rec.probe + 2.0, b.log_prob_lower_interval),
            (rec.probe, rec.probe + 2.0, b.log_prob_upper_interval),
        ] {
            let prob = lp.exp();
            if prob < 1e-5 {
                continue;
            }
            tested += 1;
            let count = xs.partition_point(|&x| x <= hi) - xs.partition_point(|&x| x <= lo);
            let freq = count as f64 / n as f64;
            let se = (prob * (1.0 - prob) / n as f64).sqrt();
            assert!((freq - prob).abs() <= 4.0 * se, "stage {k} [{lo}, {hi}]: {freq} vs {prob}");
        }
    }
    assert!(tested >= 1);
}

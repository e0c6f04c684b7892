//! Monte Carlo expectations, rate fits, and the two-point scans.

mod common;

use common::SEED;
use sot::constructions::bernoulli_two_point;
use sot::dist_core::{AtomicDistribution, SmoothedMixture};
use sot::divergences::{renyi_mutual_information, soft_covering_kl_bound, soft_covering_order};
use sot::experiments::{
    bernoulli_scan_plan, fit_rate, mc_expected_kl, mc_expected_w2sq, mean_stderr, phase_scan, rate_series,
    scan_zeta, trial_empirical, McOptions, PhaseFamily, RatePoint, RateSeries, SweepQuantity,
};
use sot::rng::stream_rng;
use sot::transport::{sorted_coupling_w2sq, w2_squared};

fn series(points: &[(u64, f64)]) -> RateSeries {
    RateSeries {
        points: points
            .iter()
            .map(|&(n, e)| RatePoint {
                n,
                estimate: e,
                stderr: 0.01 * e,
                trials: 100,
            })
            .collect(),
    }
}

#[test]
fn point_mass_estimators_vanish_trialwise() {
    let p = AtomicDistribution::point_mass(0.0);
    let opts = McOptions::fixed(10, 1e-12);
    let w = mc_expected_w2sq(&p, 1.0, 100, &opts, SEED).unwrap();
    let k = mc_expected_kl(&p, 1.0, 100, &opts, SEED).unwrap();
    assert_eq!(w.values.len(), 10);
    for v in w.values.iter().chain(&k.values) {
        assert!(v.abs() <= 1e-12);
    }
    assert!(w.estimate.abs() <= 1e-12 && k.estimate.abs() <= 1e-12);
}

#[test]
fn expected_w2_matches_sorted_coupling_oracle_per_trial() {
    let p = bernoulli_two_point(2.0, 1.0).unwrap();
    let sigma = 2.0;
    let n = 512;
    let trials = 20;
    let truth = SmoothedMixture::new(p.clone(), sigma).unwrap();
    let est = mc_expected_w2sq(&p, sigma, n, &McOptions::fixed(trials, 1e-12), SEED).unwrap();
    let mut oracle = Vec::with_capacity(trials);
    for i in 0..trials {
        let emp = SmoothedMixture::new(trial_empirical(&p, n, SEED, i).unwrap(), sigma).unwrap();
        let exact = w2_squared(&truth, &emp, 1e-12).unwrap().total;
        assert!((exact - est.values[i]).abs() <= 1e-9 * exact.max(1e-12));
        oracle.push(sorted_coupling_w2sq(&truth, &emp, 1_000_000, 2, SEED + i as u64).unwrap().estimate);
    }
    let (o_mean, o_se) = mean_stderr(&oracle);
    let combined = (est.stderr * est.stderr + o_se * o_se).sqrt();
    assert!((est.estimate - o_mean).abs() <= 3.0 * combined, "{} vs {o_mean} (se {combined})", est.estimate);
}

#[test]
fn standard_error_scales_with_inverse_root_trials() {
    let p = bernoulli_two_point(2.0, 1.0).unwrap();
    let se = |t| mc_expected_w2sq(&p, 1.0, 64, &McOptions::fixed(t, 1e-12), SEED).unwrap().stderr;
    let (s1, s2, s4) = (se(100), se(200), se(400));
    let r2 = s2 / s1;
    let r4 = s4 / s1;
    assert!((r2 - 0.5_f64.sqrt()).abs() <= 0.3 * 0.5_f64.sqrt(), "{r2}");
    assert!((r4 - 0.5).abs() <= 0.3 * 0.5, "{r4}");
}

#[test]
fn early_stop_truncates_trials() {
    let p = bernoulli_two_point(2.0, 1.0).unwrap();
    let opts = McOptions {
        trials: 200,
        early_stop_rel: Some(0.5),
        tol: 1e-12,
    };
    let e = mc_expected_w2sq(&p, 1.0, 64, &opts, SEED).unwrap();
    assert!(e.values.len() < 200 && e.values.len() % 20 == 0);
    let full = mc_expected_w2sq(&p, 1.0, 64, &McOptions::fixed(200, 1e-12), SEED).unwrap();
    assert_eq!(&full.values[..e.values.len()], e.values.as_slice());
}

#[test]
fn expected_kl_is_dominated_by_soft_covering_bound_and_decreases() {
    let p = bernoulli_two_point(2.0, 0.8).unwrap();
    let ns = [64u64, 128, 256, 512];
    let mut est = Vec::new();
    for &n in &ns {
        let e = mc_expected_kl(&p, 1.0, n, &McOptions::fixed(60, 1e-12), SEED).unwrap();
        assert!(e.values.iter().all(|v| *v >= 0.0));
        let l = soft_covering_order(n).unwrap();
        let i = renyi_mutual_information(&p, 1.0, l, None, 1e-12).unwrap().value;
        let bound = soft_covering_kl_bound(i, l, n).unwrap();
        assert!(e.estimate <= bound + 3.0 * e.stderr, "n = {n}: {} vs {bound}", e.estimate);
        est.push(e);
    }
    for w in est.windows(2) {
        assert!(w[1].estimate <= w[0].estimate + w[1].stderr, "{:?}", est.iter().map(|e| e.estimate).collect::<Vec<_>>());
    }
}

#[test]
fn w2_series_decreases_in_n() {
    let p = bernoulli_two_point(2.0, 1.0).unwrap();
    let ns = [64u64, 128, 256, 512, 1024];
    let s = rate_series(&p, 1.0, &ns, SweepQuantity::W2Squared, &McOptions::fixed(60, 1e-12), SEED).unwrap();
    for w in s.points.windows(2) {
        assert!(w[1].estimate <= w[0].estimate + w[1].stderr, "{s:?}");
    }
}

#[test]
fn rate_series_is_deterministic() {
    let p = bernoulli_two_point(2.0, 1.0).unwrap();
    let run = || {
        let s = rate_series(&p, 1.0, &[64, 128, 256], SweepQuantity::Kl, &McOptions::fixed(8, 1e-10), 11).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        for pt in &s.points {
            w.serialize(pt).unwrap();
        }
        w.into_inner().unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn fit_recovers_exact_power_law() {
    let pts: Vec<(u64, f64)> = (7..14).map(|e| (1u64 << e, 7.0 / (1u64 << e) as f64)).collect();
    let f = fit_rate(&series(&pts)).unwrap();
    assert!((f.slope + 1.0).abs() <= 1e-12, "{f:?}");
    assert!((f.intercept - 7.0_f64.ln()).abs() <= 1e-10);
}

#[test]
fn fit_recovers_noisy_square_root_law() {
    use rand::Rng;
    let mut rng = stream_rng(SEED, 3);
    let pts: Vec<(u64, f64)> = (6..16)
        .map(|e| {
            let n = 1u64 << e;
            (n, (n as f64).powf(-0.5) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
        })
        .collect();
    let f = fit_rate(&series(&pts)).unwrap();
    assert!(f.slope >= -0.52 && f.slope <= -0.48, "{f:?}");
}

#[test]
fn fit_guards() {
    assert!(fit_rate(&series(&[(10, 1.0), (20, 0.5)])).is_err());
    assert!(fit_rate(&series(&[(10, 1.0), (20, 0.0), (40, 0.2)])).is_err());
    assert!(fit_rate(&series(&[(10, 1.0), (10, 0.5), (40, 0.2)])).is_err());
}

#[test]
fn scan_constants() {
    assert!((scan_zeta(2.0, 1.0) - 25.0 / 128.0).abs() < 1e-15);
    let plan = bernoulli_scan_plan(2.0, 1.0, 0.02, &[1 << 10, 1 << 16]).unwrap();
    assert!((plan.zeta - 0.195_312_5).abs() < 1e-15);
    assert_eq!(plan.records.len(), 2);
    assert!(plan.records[1].h > plan.records[0].h);
    for r in &plan.records {
        assert_eq!(r.feasible, r.expected_far_count >= 128.0);
    }
    assert!(bernoulli_scan_plan(0.5, 1.0, 0.02, &[1024]).is_err());
}

#[test]
fn phase_scan_separates_regimes() {
    let ns: Vec<u64> = (7..=13).map(|e| 1u64 << e).collect();
    let parametric = phase_scan(&[0.5], 1.0, PhaseFamily::FixedTwoPoint { h: 2.0 }, &ns, &McOptions::fixed(100, 1e-12), SEED).unwrap();
    let slope = parametric.rows[0].fit.slope;
    assert!((slope + 1.0).abs() <= 0.15, "{slope}");

    let ns: Vec<u64> = (10..=16).map(|e| 1u64 << e).collect();
    let scan = phase_scan(&[2.0], 1.0, PhaseFamily::BernoulliScan { epsilon: 0.02 }, &ns, &McOptions::fixed(100, 1e-12), SEED).unwrap();
    let slope = scan.rows[0].fit.slope;
    assert!(slope > -0.92, "{slope}");

    let empty = phase_scan(&[], 1.0, PhaseFamily::FixedTwoPoint { h: 2.0 }, &ns, &McOptions::fixed(10, 1e-12), SEED).unwrap();
    assert!(empty.rows.is_empty());
}

#[test]
fn phase_family_json_form() {
    let f: PhaseFamily = serde_json::from_str(r#"{"kind":"fixed_two_point","h":2.0}"#).unwrap();
    assert_eq!(f, PhaseFamily::FixedTwoPoint { h: 2.0 });
    let q: SweepQuantity = serde_json::from_str(r#""w2_squared""#).unwrap();
    assert_eq!(q, SweepQuantity::W2Squared);
}

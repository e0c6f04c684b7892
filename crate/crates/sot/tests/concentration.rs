//! Weighted CDF statistics and event-frequency simulations.

mod common;

use common::{gaussian, mixture, SEED};
use sot::concentration::{
    berry_esseen_event_frequency, concentration_batch, first_feasible_stage, schedule_gap_dominance,
    two_point_min_sample, two_point_probe, weighted_cdf_statistic, ConcentrationBound, EmpiricalCdf, SampleMode,
};
use sot::constructions::w2_hard_example;
use sot::dist_core::{sample_smoothed, AtomicDistribution, EmpiricalMeasure, SmoothedMixture};

#[test]
fn single_draw_statistic_is_finite() {
    let truth = gaussian(0.0, 1.0);
    let s = EmpiricalMeasure::new(vec![0.3]).unwrap();
    let v = weighted_cdf_statistic(&truth, EmpiricalCdf::Sample(&s)).unwrap();
    // At n = 1 the weight floor is 1, so the statistic is the largest CDF jump deviation.
    let f = truth.cdf(0.3);
    assert!((v - f.max(1.0 - f)).abs() < 1e-12, "{v}");
}

#[test]
fn statistic_is_invariant_under_increasing_affine_maps() {
    let truth = mixture(&[(-1.0, 0.4), (2.0, 0.6)], 0.7);
    let sample = sample_smoothed(&truth, 300, SEED).unwrap();
    let base = weighted_cdf_statistic(&truth, EmpiricalCdf::Sample(&sample)).unwrap();
    for &(a, b) in &[(2.0, 0.0), (0.5, -3.0), (10.0, 7.0)] {
        let t2 = SmoothedMixture::new(truth.base().scaled(a).unwrap().shifted(b), 0.7 * a).unwrap();
        let s2 = EmpiricalMeasure::new(sample.samples().iter().map(|x| a * x + b).collect()).unwrap();
        let v = weighted_cdf_statistic(&t2, EmpiricalCdf::Sample(&s2)).unwrap();
        assert!((v - base).abs() < 1e-9, "({a}, {b}): {v} vs {base}");
    }
}

#[test]
fn smoothed_empirical_statistic_is_invariant_under_increasing_affine_maps() {
    let truth = mixture(&[(-1.0, 0.4), (2.0, 0.6)], 1.0);
    let emp = AtomicDistribution::from_weights(&[(-1.0, 0.3), (2.0, 0.7)]).unwrap();
    let measure = SmoothedMixture::new(emp.clone(), 1.0).unwrap();
    let base = weighted_cdf_statistic(&truth, EmpiricalCdf::Smoothed { measure: &measure, n: 10 }).unwrap();
    let t2 = SmoothedMixture::new(truth.base().scaled(3.0).unwrap().shifted(1.0), 3.0).unwrap();
    let m2 = SmoothedMixture::new(emp.scaled(3.0).unwrap().shifted(1.0), 3.0).unwrap();
    let v = weighted_cdf_statistic(&t2, EmpiricalCdf::Smoothed { measure: &m2, n: 10 }).unwrap();
    assert!((v - base).abs() < 1e-9, "{v} vs {base}");
}

#[test]
fn weighted_concentration_violation_rate_is_below_delta() {
    let truth = gaussian(0.0, 1.0);
    for mode in [SampleMode::Plain, SampleMode::SmoothedEmpirical] {
        let b = concentration_batch(&truth, 1024, 0.1, 200, SEED, mode, ConcentrationBound::Smoothed).unwrap();
        assert_eq!(b.rows.len(), 200);
        assert!(b.violation_rate <= 0.1, "{mode:?}: {}", b.violation_rate);
    }
    let b = concentration_batch(&truth, 1024, 0.1, 200, SEED, SampleMode::Plain, ConcentrationBound::PlainSample).unwrap();
    assert!(b.violation_rate <= 0.1);
}

#[test]
fn batches_are_deterministic() {
    let truth = gaussian(0.0, 1.0);
    let a = concentration_batch(&truth, 128, 0.1, 20, 5, SampleMode::Plain, ConcentrationBound::Smoothed).unwrap();
    let b = concentration_batch(&truth, 128, 0.1, 20, 5, SampleMode::Plain, ConcentrationBound::Smoothed).unwrap();
    assert_eq!(a, b);
}

#[test]
fn statistic_median_does_not_grow_with_n() {
    let truth = gaussian(0.0, 1.0);
    let median = |n: usize| {
        let b = concentration_batch(&truth, n, 0.1, 200, SEED, SampleMode::Plain, ConcentrationBound::Smoothed).unwrap();
        let mut v: Vec<f64> = b.rows.iter().map(|r| r.statistic).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[99] + v[100])
    };
    let (small, large) = (median(256), median(4096));
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn batch_input_validation() {
    let truth = gaussian(0.0, 1.0);
    let run = |n, d, r| concentration_batch(&truth, n, d, r, 1, SampleMode::Plain, ConcentrationBound::Smoothed);
    assert!(run(0, 0.1, 10).is_err());
    assert!(run(10, 0.1, 0).is_err());
    assert!(run(10, 0.0, 10).is_err());
    assert!(run(10, 1.0, 10).is_err());
}

#[test]
fn bound_values() {
    let v = ConcentrationBound::Smoothed.value(1024, 0.1);
    assert!((v - 16.0 / 32.0 * (20480.0_f64).ln()).abs() < 1e-14);
    let v = ConcentrationBound::PlainSample.value(100, 0.5);
    assert!((v - 0.8 * 200.0_f64.ln()).abs() < 1e-14);
}

#[test]
fn two_point_event_frequency_meets_one_sixteenth() {
    let (h, k) = (3.0, 2.0);
    let n = 2 * two_point_min_sample(h, k);
    let r = berry_esseen_event_frequency(h, k, 1.0, n, 2000, SEED).unwrap();
    assert!(r.applicable);
    assert_eq!(r.passed, Some(true), "{r:?}");
    assert!(r.frequency >= 1.0 / 16.0 - 3.0 * r.standard_error);
    assert!((r.probe - two_point_probe(h, k, 1.0)).abs() < 1e-15);
    assert!((r.probe - 1.875).abs() < 1e-15);
}

#[test]
fn two_point_event_guards() {
    assert!(berry_esseen_event_frequency(1.0, 2.0, 1.0, 10_000, 10, SEED).is_err());
    assert!(berry_esseen_event_frequency(3.0, 2.0, 1.0, 10_000, 0, SEED).is_err());
    let small = two_point_min_sample(3.0, 2.0) - 1;
    let r = berry_esseen_event_frequency(3.0, 2.0, 1.0, small, 10, SEED).unwrap();
    assert!(!r.applicable && r.passed.is_none() && r.note.is_some());
}

#[test]
fn schedule_gap_event_guards_and_feasibility() {
    let (p, s) = w2_hard_example(2.0, 1.0, 5).unwrap();
    assert!(schedule_gap_dominance(&s, &p, 1.0, 1, 0, SEED).is_err());
    assert!(schedule_gap_dominance(&s, &p, 1.0, 9, 10, SEED).is_err());
    match first_feasible_stage(&s) {
        Some(k) => {
            let r = schedule_gap_dominance(&s, &p, 1.0, k, 200, SEED).unwrap();
            assert_eq!(r.passed, Some(true), "{r:?}");
        }
        None => {
            for k in 1..=5 {
                let r = schedule_gap_dominance(&s, &p, 1.0, k, 10, SEED).unwrap();
                assert!(!r.applicable && r.passed.is_none(), "stage {k}: {r:?}");
            }
        }
    }
}

use rkld_core::uht::{estimate_exponents, worst_case_type_i, Hypothesis};
use rkld_core::{decide, robust_statistic, Cdf, DetectorConfig, Verdict};

fn config(threshold: f64) -> DetectorConfig {
    DetectorConfig::new(Cdf::standard_normal(), 0.1, threshold).unwrap()
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let c = config(0.2);
    let alt = Cdf::normal(1.5, 1.0).unwrap();
    let one = estimate_exponents(&c, &alt, Hypothesis::H1, &[10, 40], 60, 11, 1).unwrap();
    let many = estimate_exponents(&c, &alt, Hypothesis::H1, &[10, 40], 60, 11, 4).unwrap();
    assert_eq!(one, many);
}

#[test]
fn far_alternative_is_rejected() {
    let c = config(0.2);
    let samples: Vec<f64> = (0..50).map(|k| 6.0 + k as f64 * 0.01).collect();
    let d = decide(robust_statistic(&samples, &c).unwrap(), c.threshold());
    assert_eq!(d.verdict, Verdict::H1);
}

#[test]
fn worst_case_member_must_lie_in_the_ball() {
    let c = config(0.2);
    let inside = Cdf::normal(0.05, 1.0).unwrap();
    let report = worst_case_type_i(&c, &inside, &[20], 30, 3, 2).unwrap();
    assert!(report.rates()[0] <= 1.0);
    assert!(worst_case_type_i(&c, &Cdf::normal(3.0, 1.0).unwrap(), &[20], 30, 3, 2).is_err());
}

//! Universal hypothesis testing with a Levy-ball null.
//!
//! The robust detector declares `H1` when the robust divergence of the
//! empirical distribution from `B_L(P0, r)` exceeds the threshold. The
//! Monte-Carlo harness estimates its error exponents with per-trial seeds
//! derived from `(seed, n, trial)`, so reports do not depend on how many
//! workers run the trials.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{empirical_from_samples, levy_distance, Cdf, LevyBall};
use crate::error::{Error, Result};
use crate::kld::{kld_discrete, robust_kld};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    ball: LevyBall,
    threshold: f64,
}

impl DetectorConfig {
    /// The nominal must be continuous; `threshold` is in nats.
    pub fn new(nominal: Cdf, radius: f64, threshold: f64) -> Result<Self> {
        if !nominal.is_continuous() {
            return Err(Error::DiscontinuousCenter);
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
        }
        Ok(Self { ball: LevyBall::new(nominal, radius)?, threshold })
    }

    pub fn nominal(&self) -> &Cdf {
        self.ball.center()
    }

    pub fn radius(&self) -> f64 {
        self.ball.radius()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn ball(&self) -> &LevyBall {
        &self.ball
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
}

/// `D(empirical || B_L(P0, r))` in nats.
pub fn robust_statistic(samples: &[f64], config: &DetectorConfig) -> Result<f64> {
    let mu = empirical_from_samples(samples)?;
    Ok(robust_kld(&mu, &config.ball).value)
}

/// `H1` iff `statistic > threshold`; ties go to `H0`.
pub fn decide(statistic: f64, threshold: f64) -> Decision {
    let verdict = if statistic > threshold { Verdict::H1 } else { Verdict::H0 };
    Decision { verdict, statistic, threshold }
}

/// Empirical divergence `D(empirical pmf || nominal)` over a finite alphabet.
pub fn hoeffding_statistic<S: Ord>(samples: &[S], nominal: &BTreeMap<S, f64>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut counts: BTreeMap<&S, usize> = nominal.keys().map(|k| (k, 0)).collect();
    for (index, s) in samples.iter().enumerate() {
        match counts.get_mut(s) {
            Some(c) => *c += 1,
            None => return Err(Error::UnknownSymbol { index }),
        }
    }
    let n = samples.len() as f64;
    let p: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
    let q: Vec<f64> = nominal.values().copied().collect();
    kld_discrete(&p, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    pub n: usize,
    pub trials: usize,
    pub errors: usize,
    pub rate: f64,
    /// `-ln(rate) / n`; absent when no error was observed.
    pub exponent: Option<f64>,
    /// `ln(trials) / n`, reported only when no error was observed.
    pub exponent_lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub hypothesis: Hypothesis,
    pub seed: u64,
    pub points: Vec<ExponentPoint>,
    /// Least-squares slope of `-ln(rate)` against `n` over points with a
    /// nonzero rate; absent with fewer than two such points.
    pub slope: Option<f64>,
}

impl ExponentReport {
    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sample size `n`.
pub fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ n as u64) ^ trial as u64)
}

fn validate_run(n_list: &[usize], trials: usize, workers: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sample sizes must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Error rates of the robust detector when samples come from `truth`.
///
/// Under `Hypothesis::H0` an error is a `H1` verdict (false alarm); under
/// `Hypothesis::H1` it is a `H0` verdict (miss).
pub fn estimate_exponents(
    config: &DetectorConfig,
    truth: &Cdf,
    hypothesis: Hypothesis,
    n_list: &[usize],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<ExponentReport> {
    validate_run(n_list, trials, workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let wrong = match hypothesis {
        Hypothesis::H0 => Verdict::H1,
        Hypothesis::H1 => Verdict::H0,
    };

    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let errors = pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|trial| -> Result<usize> {
                    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, n, trial));
                    let samples: Vec<f64> = (0..n).map(|_| truth.sample(&mut rng)).collect();
                    let stat = robust_statistic(&samples, config)?;
                    Ok(usize::from(decide(stat, config.threshold).verdict == wrong))
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))
        })?;
        let rate = errors as f64 / trials as f64;
        let (exponent, exponent_lower_bound) = if errors == 0 {
            (None, Some((trials as f64).ln() / n as f64))
        } else {
            (Some(-rate.ln() / n as f64), None)
        };
        points.push(ExponentPoint { n, trials, errors, rate, exponent, exponent_lower_bound });
    }
    let slope = regression_slope(&points);
    Ok(ExponentReport { hypothesis, seed, points, slope })
}

fn regression_slope(points: &[ExponentPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points.iter().filter(|p| p.errors > 0).map(|p| (p.n as f64, -p.rate.ln())).collect();
    if xy.len() < 2 {
        return None;
    }
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// False-alarm rates when the data come from `member`, a user-chosen
/// element of the null ball.
pub fn worst_case_type_i(
    config: &DetectorConfig,
    member: &Cdf,
    n_list: &[usize],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<ExponentReport> {
    if !config.ball.contains(member) {
        return Err(Error::OutsideBall { distance: levy_distance(member, config.nominal()), radius: config.radius() });
    }
    estimate_exponents(config, member, Hypothesis::H0, n_list, trials, seed, workers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn config(r: f64, eta: f64) -> DetectorConfig {
        DetectorConfig::new(Cdf::standard_normal(), r, eta).unwrap()
    }

    #[test]
    fn single_sample_statistic() {
        let s = robust_statistic(&[0.0], &config(0.1, 1.0)).unwrap();
        assert!((s - 1.274196166291383).abs() < 1e-10);
        assert_eq!(decide(s, 1.0).verdict, Verdict::H1);
    }

    #[test]
    fn quantile_cluster_is_accepted() {
        let n = Cdf::standard_normal();
        let samples: Vec<f64> = (1..=50).map(|k| n.quantile((k as f64 - 0.5) / 50.0)).collect();
        assert_eq!(robust_statistic(&samples, &config(0.05, 0.1)).unwrap(), 0.0);
    }

    #[test]
    fn strict_threshold() {
        assert_eq!(decide(0.5, 0.3).verdict, Verdict::H1);
        assert_eq!(decide(0.3, 0.3).verdict, Verdict::H0);
        assert_eq!(decide(0.0, 1e-9).verdict, Verdict::H0);
    }

    #[test]
    fn hoeffding_examples() {
        let nominal: BTreeMap<char, f64> = [('a', 0.5), ('b', 0.5)].into();
        assert!((hoeffding_statistic(&['a'; 4], &nominal).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(hoeffding_statistic(&['a', 'b'], &nominal).unwrap(), 0.0);
        assert!(matches!(hoeffding_statistic(&['a', 'c'], &nominal), Err(Error::UnknownSymbol { index: 1 })));
    }

    #[test]
    fn threshold_above_bound_never_alarms() {
        let cfg = config(0.1, 10f64.ln() + 1.0);
        let r = estimate_exponents(&cfg, cfg.nominal(), Hypothesis::H0, &[5, 10], 50, 3, 2).unwrap();
        assert!(r.points.iter().all(|p| p.errors == 0 && p.exponent_lower_bound.is_some()));
        assert!(estimate_exponents(&cfg, cfg.nominal(), Hypothesis::H0, &[5], 0, 3, 2).is_err());
    }

    #[test]
    fn far_point_mass_is_always_detected() {
        let cfg = config(0.1, 1.0);
        let truth = Cdf::point_mass(50.0).unwrap();
        let r = estimate_exponents(&cfg, &truth, Hypothesis::H1, &[1], 20, 9, 1).unwrap();
        assert_eq!(r.points[0].errors, 0);
    }

    #[test]
    fn report_ignores_worker_count() {
        let cfg = config(0.05, 0.02);
        let run = |w| estimate_exponents(&cfg, cfg.nominal(), Hypothesis::H0, &[20, 40], 64, 11, w).unwrap();
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn member_check() {
        let cfg = config(0.05, 0.1);
        let shifted = Cdf::normal(0.025, 1.0).unwrap();
        assert!(worst_case_type_i(&cfg, &shifted, &[10], 8, 1, 1).is_ok());
        let far = Cdf::normal(2.0, 1.0).unwrap();
        assert!(matches!(worst_case_type_i(&cfg, &far, &[10], 8, 1, 1), Err(Error::OutsideBall { .. })));
        let same = worst_case_type_i(&cfg, cfg.nominal(), &[10], 8, 1, 1).unwrap();
        assert_eq!(same, estimate_exponents(&cfg, cfg.nominal(), Hypothesis::H0, &[10], 8, 1, 1).unwrap());
    }

    #[test]
    fn rejects_discontinuous_nominal() {
        assert!(matches!(DetectorConfig::new(Cdf::point_mass(0.0).unwrap(), 0.1, 0.1), Err(Error::DiscontinuousCenter)));
    }
}

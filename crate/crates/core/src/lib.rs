//! Robust Kullback-Leibler divergence from a distribution to a Levy ball,
//! and the robust universal hypothesis test built on it.
//!
//! All divergences are in nats.

pub mod dist;
mod error;
pub mod extremal;
pub mod kld;
pub mod uht;

pub use dist::{empirical_from_samples, levy_distance, Cdf, LevyBall, Partition, StepCdf};
pub use kld::{kld_discrete, refine_until, robust_kld, robust_kld_quantized, RobustKldSolution};
pub use uht::{decide, robust_statistic, Decision, DetectorConfig, Verdict};
pub use error::{Error, Result};


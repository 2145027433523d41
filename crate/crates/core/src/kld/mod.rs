//! Robust KL divergence `D(mu || B_L(P0, r)) = inf_{P in ball} D(mu || P)`.
//!
//! Both the direct program on the atoms of a step `mu` and the quantized
//! program on a partition reduce to maximizing a weighted sum of logs of
//! consecutive differences of a monotone chain, solved in `chain`.

mod brute;
mod chain;
mod discrete;
mod refine;
mod robust;

pub use brute::brute_force_robust_kld;
pub use discrete::kld_discrete;
pub use refine::{refine_until, Refinement, TrailEntry};
pub use robust::{constraint_violation, point_mass_value, robust_kld, robust_kld_quantized, robust_kld_value, RobustKldSolution};

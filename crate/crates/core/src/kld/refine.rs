use serde::{Deserialize, Serialize};

use super::robust::robust_kld_quantized;
use crate::dist::{Cdf, LevyBall, Partition};
use crate::error::{Error, Result};

/// Cell count at which refinement gives up.
pub const MAX_CELLS: usize = 1 << 14;
/// Level 0 uses the center quantiles at `k / 2^FIRST_LEVEL`.
const FIRST_LEVEL: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub cells: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub value: f64,
    pub trail: Vec<TrailEntry>,
    pub converged: bool,
}

/// Quantized divergence on a nested sequence of partitions, halving cells
/// in center-probability until two successive values differ by less than
/// `tol`.
///
/// Every level also cuts at each jump `x` of `mu` and just below it, so a
/// step `mu` is resolved exactly from the first level on. Levels are nested,
/// which makes the trail nondecreasing.
pub fn refine_until(mu: &Cdf, ball: &LevyBall, tol: f64) -> Result<Refinement> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let center = ball.center();
    let atom_cuts: Vec<f64> = mu.jumps().into_iter().flat_map(|x| [x.next_down(), x]).collect();

    let mut trail: Vec<TrailEntry> = Vec::new();
    let mut level = FIRST_LEVEL;
    loop {
        let denom = (1u64 << level) as f64;
        let mut cuts: Vec<f64> = (1..(1u64 << level)).map(|k| center.quantile(k as f64 / denom)).collect();
        cuts.extend_from_slice(&atom_cuts);
        let partition = Partition::from_unsorted(cuts)?;
        let value = robust_kld_quantized(mu, ball, &partition).value;
        let cells = partition.cells();
        let previous = trail.last().map(|e| e.value);
        trail.push(TrailEntry { cells, value });
        if previous.is_some_and(|p| (value - p).abs() < tol) {
            return Ok(Refinement { value, trail, converged: true });
        }
        if cells >= MAX_CELLS {
            return Ok(Refinement { value, trail, converged: false });
        }
        level += 1;
    }
}

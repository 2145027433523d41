use crate::dist::{LevyBall, StepCdf};
use crate::error::{Error, Result};

/// Largest support the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_ATOMS: usize = 3;

/// Exhaustive search for the direct program, used as an oracle.
///
/// For fixed `b_{j-1}` the best `a_j` is `max(lower(x_j-), b_{j-1})` and the
/// last `b_n` is `upper(x_n)`, so only `b_1..b_{n-1}` are enumerated: on a
/// grid of width `grid_step`, then on a grid a hundred times finer around
/// the best coarse point.
pub fn brute_force_robust_kld(mu: &StepCdf, ball: &LevyBall, grid_step: f64) -> Result<f64> {
    if mu.len() > BRUTE_FORCE_MAX_ATOMS {
        return Err(Error::InvalidArgument(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_ATOMS} atoms, got {}",
            mu.len()
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::InvalidArgument(format!("grid step must lie in (0, 0.1], got {grid_step}")));
    }
    let lows: Vec<f64> = mu.atoms().iter().map(|&x| ball.lower_left(x)).collect();
    let highs: Vec<f64> = mu.atoms().iter().map(|&x| ball.upper(x)).collect();
    let search = Search { w: mu.weights(), lows: &lows, highs: &highs };

    let coarse = |lo: f64, hi: f64| grid(lo, hi, grid_step, &lows, &highs);
    let (mut best, centre) = search.run(0, 0.0, &mut Vec::new(), &coarse);
    if !centre.is_empty() {
        let (fine, _) = search.run_windowed(0, 0.0, &mut Vec::new(), &centre, grid_step, grid_step / 100.0);
        best = best.max(fine);
    }
    Ok((-best).max(0.0))
}

struct Search<'a> {
    w: &'a [f64],
    lows: &'a [f64],
    highs: &'a [f64],
}

impl Search<'_> {
    fn term(&self, j: usize, prev_b: f64, b: f64) -> Option<f64> {
        let a = self.lows[j].max(prev_b);
        let gap = b - a;
        (gap > 0.0).then(|| self.w[j] * (gap / self.w[j]).ln())
    }

    /// Best `sum w ln(p / w)` over the remaining atoms; returns the choice
    /// of `b_j` for every non-final atom.
    fn run(&self, j: usize, prev_b: f64, path: &mut Vec<f64>, cand: &dyn Fn(f64, f64) -> Vec<f64>) -> (f64, Vec<f64>) {
        let n = self.w.len();
        if j + 1 == n {
            let v = self.term(j, prev_b, self.highs[j].min(1.0)).unwrap_or(f64::NEG_INFINITY);
            return (v, path.clone());
        }
        let lo = self.lows[j].max(prev_b);
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for b in cand(lo, self.highs[j].min(1.0)) {
            let Some(here) = self.term(j, prev_b, b) else { continue };
            path.push(b);
            let (rest, p) = self.run(j + 1, b, path, cand);
            path.pop();
            if here + rest > best.0 {
                best = (here + rest, p);
            }
        }
        best
    }

    fn run_windowed(&self, j: usize, prev_b: f64, path: &mut Vec<f64>, centre: &[f64], width: f64, step: f64) -> (f64, Vec<f64>) {
        let n = self.w.len();
        if j + 1 == n {
            let v = self.term(j, prev_b, self.highs[j].min(1.0)).unwrap_or(f64::NEG_INFINITY);
            return (v, path.clone());
        }
        let lo = self.lows[j].max(prev_b);
        let hi = self.highs[j].min(1.0);
        let from = (centre[j] - width).max(lo);
        let to = (centre[j] + width).min(hi);
        let mut best = (f64::NEG_INFINITY, Vec::new());
        if from > to {
            return best;
        }
        let mut pts = grid(from, to, step, &[], &[]);
        pts.push(lo);
        pts.push(hi);
        for b in pts {
            let Some(here) = self.term(j, prev_b, b) else { continue };
            path.push(b);
            let (rest, p) = self.run_windowed(j + 1, b, path, centre, width, step);
            path.pop();
            if here + rest > best.0 {
                best = (here + rest, p);
            }
        }
        best
    }
}

fn grid(lo: f64, hi: f64, step: f64, lows: &[f64], highs: &[f64]) -> Vec<f64> {
    if lo > hi {
        return Vec::new();
    }
    let count = ((hi - lo) / step).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    pts.push(hi);
    pts.extend(lows.iter().chain(highs).filter(|&&v| v >= lo && v <= hi));
    pts
}

use serde::{Deserialize, Serialize};

use super::chain::{ChainProgram, Link, SolverOptions};
use crate::dist::{quantize, Cdf, LevyBall, Partition, StepCdf, MEMBERSHIP_TOL};

/// Optimal information projection of a distribution onto a Levy ball.
///
/// For the direct program the `i`-th entry describes atom `x_i`:
/// `partial_sums[i] = (a_i, b_i)` are the projection's CDF just before and
/// at `x_i`, and `masses[i] = b_i - a_i`. For the quantized program the
/// entries describe cells and the pairs are consecutive partial sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustKldSolution {
    /// Divergence in nats.
    pub value: f64,
    pub masses: Vec<f64>,
    pub partial_sums: Vec<(f64, f64)>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl RobustKldSolution {
    fn exact_member(masses: Vec<f64>, partial_sums: Vec<(f64, f64)>) -> Self {
        Self { value: 0.0, masses, partial_sums, kkt_residual: 0.0, iterations: 0, converged: true }
    }
}

fn divergence(weights: &[f64], masses: &[f64]) -> f64 {
    weights
        .iter()
        .zip(masses)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| w * (w / p).ln())
        .sum::<f64>()
        .max(0.0)
}

/// `D(mu || B_L(P0, r))` for a finite-support `mu`.
///
/// The projection is a step distribution on the atoms of `mu`; with
/// `a_j`, `b_j` its CDF just before and at atom `x_j` the program is
///
/// ```text
/// maximize  sum_j w_j ln(b_j - a_j)
/// s.t.      a_j >= lower(x_j-),  b_j <= upper(x_j),  b_{j-1} <= a_j
/// ```
pub fn robust_kld(mu: &StepCdf, ball: &LevyBall) -> RobustKldSolution {
    let n = mu.len();
    let lows: Vec<f64> = mu.atoms().iter().map(|&x| ball.lower_left(x)).collect();
    let highs: Vec<f64> = mu.atoms().iter().map(|&x| ball.upper(x)).collect();

    let own: Vec<(f64, f64)> = (0..n).map(|j| (mu.cumulative_before(j), mu.cumulative(j))).collect();
    if own.iter().zip(lows.iter().zip(&highs)).all(|(&(a, b), (&l, &u))| a >= l - MEMBERSHIP_TOL && b <= u + MEMBERSHIP_TOL) {
        return RobustKldSolution::exact_member(mu.weights().to_vec(), own);
    }

    let mut links = Vec::with_capacity(2 * n + 1);
    let mut lower = Vec::with_capacity(2 * n);
    let mut upper = Vec::with_capacity(2 * n);
    links.push(Link::Free);
    for j in 0..n {
        links.push(Link::Objective(mu.weights()[j]));
        links.push(if j + 1 < n { Link::Order } else { Link::Free });
        lower.extend([Some(lows[j]), None]);
        upper.extend([None, Some(highs[j])]);
    }
    let program = ChainProgram { left_anchor: None, right_anchor: None, links, lower, upper };
    let sol = program.solve(&SolverOptions::default());
    let partial_sums: Vec<(f64, f64)> = sol.z.chunks(2).map(|c| (c[0], c[1])).collect();
    let masses: Vec<f64> = partial_sums.iter().map(|(a, b)| b - a).collect();
    RobustKldSolution {
        value: divergence(mu.weights(), &masses),
        masses,
        partial_sums,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// `D(mu^A || B_L^A(P0, r))`: the divergence after quantizing on `partition`,
/// with the ball replaced by the polytope of cell masses whose partial sums
/// at each cut `a_j` lie in `[lower(a_j), upper(a_j)]`.
///
/// When the center has jumps this box polytope is used as is; it is not
/// shown to coincide with the quantization of the ball itself.
pub fn robust_kld_quantized(mu: &Cdf, ball: &LevyBall, partition: &Partition) -> RobustKldSolution {
    let cells = quantize(mu, partition);
    let cuts = partition.cuts();
    let lows: Vec<f64> = cuts.iter().map(|&a| ball.lower(a)).collect();
    let highs: Vec<f64> = cuts.iter().map(|&a| ball.upper(a)).collect();

    let own: Vec<f64> = cuts.iter().map(|&a| mu.eval(a)).collect();
    if own.iter().zip(lows.iter().zip(&highs)).all(|(&s, (&l, &u))| s >= l - MEMBERSHIP_TOL && s <= u + MEMBERSHIP_TOL) {
        let sums = partial_pairs(&own);
        return RobustKldSolution::exact_member(cells, sums);
    }

    let links = cells.iter().map(|&m| if m > 0.0 { Link::Objective(m) } else { Link::Order }).collect();
    let program = ChainProgram {
        left_anchor: Some(0.0),
        right_anchor: Some(1.0),
        links,
        lower: lows.into_iter().map(Some).collect(),
        upper: highs.into_iter().map(Some).collect(),
    };
    let sol = program.solve(&SolverOptions::default());
    let partial_sums = partial_pairs(&sol.z);
    let masses: Vec<f64> = partial_sums.iter().map(|(a, b)| (b - a).max(0.0)).collect();
    RobustKldSolution {
        value: divergence(&cells, &masses),
        masses,
        partial_sums,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

fn partial_pairs(inner: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(inner.len() + 2);
    pts.push(0.0);
    pts.extend_from_slice(inner);
    pts.push(1.0);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Convenience wrapper returning only the value.
pub fn robust_kld_value(mu: &StepCdf, ball: &LevyBall) -> f64 {
    robust_kld(mu, ball).value
}

/// Checks the linear constraints of a direct solution against the ball.
pub fn constraint_violation(mu: &StepCdf, ball: &LevyBall, sol: &RobustKldSolution) -> f64 {
    let mut worst = 0.0f64;
    let mut prev_b = 0.0;
    for (j, &(a, b)) in sol.partial_sums.iter().enumerate() {
        let x = mu.atoms()[j];
        worst = worst.max(ball.lower_left(x) - a).max(b - ball.upper(x)).max(prev_b - a).max(a - b).max(b - 1.0);
        prev_b = b;
    }
    worst.max(0.0)
}

/// `ln(1 / (upper(x) - lower(x-)))`: the divergence of a unit mass at `x`.
pub fn point_mass_value(ball: &LevyBall, x: f64) -> f64 {
    -ball.atom_gap(x).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate_ball() -> LevyBall {
        LevyBall::new(Cdf::point_mass(0.0).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn member_has_zero_value() {
        let sol = robust_kld(&StepCdf::point_mass(0.5).unwrap(), &degenerate_ball());
        assert_eq!(sol.value, 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn shifted_point_mass_costs_ln2() {
        let sol = robust_kld(&StepCdf::point_mass(0.6).unwrap(), &degenerate_ball());
        assert!((sol.value - std::f64::consts::LN_2).abs() < 1e-12, "{sol:?}");
        assert!(sol.converged);
        assert_eq!(sol.partial_sums[0], (0.5, 1.0));
    }

    #[test]
    fn single_atom_under_normal_center() {
        let ball = LevyBall::new(Cdf::standard_normal(), 0.1).unwrap();
        let sol = robust_kld(&StepCdf::point_mass(0.0).unwrap(), &ball);
        // mpmath: ln(1 / (Phi(0.1) + 0.1 - Phi(-0.1) + 0.1))
        assert!((sol.value - 1.274196166291383).abs() < 1e-10, "{}", sol.value);
    }

    #[test]
    fn solution_satisfies_constraints() {
        let ball = LevyBall::new(Cdf::standard_normal(), 0.05).unwrap();
        let mu = StepCdf::new(vec![-3.0, -0.2, 0.0, 0.1, 2.5], vec![0.3, 0.1, 0.2, 0.1, 0.3]).unwrap();
        let sol = robust_kld(&mu, &ball);
        assert!(sol.converged);
        assert!(constraint_violation(&mu, &ball, &sol) <= 1e-10);
        let direct: f64 = mu.weights().iter().zip(&sol.masses).map(|(w, p)| w * (w / p).ln()).sum();
        assert!((direct - sol.value).abs() <= 1e-10);
        assert!(sol.value > 0.0 && sol.value <= (1.0f64 / 0.05).ln());
    }

    #[test]
    fn quantized_two_cell_program() {
        let mu = Cdf::point_mass(0.6).unwrap();
        let sol = robust_kld_quantized(&mu, &degenerate_ball(), &Partition::new(vec![0.55]).unwrap());
        assert!((sol.value - std::f64::consts::LN_2).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn quantized_center_is_zero() {
        let ball = LevyBall::new(Cdf::standard_normal(), 0.1).unwrap();
        let p = Partition::new(vec![-1.0, 0.0, 0.3, 2.0]).unwrap();
        assert_eq!(robust_kld_quantized(ball.center(), &ball, &p).value, 0.0);
    }

    #[test]
    fn quantized_never_exceeds_direct() {
        let ball = LevyBall::new(Cdf::standard_normal(), 0.05).unwrap();
        let mu = StepCdf::new(vec![-1.0, 0.3, 1.7], vec![0.2, 0.5, 0.3]).unwrap();
        let direct = robust_kld(&mu, &ball).value;
        let p = Partition::new(vec![-2.0, -0.5, 0.0, 0.5, 1.0, 2.0]).unwrap();
        let q = robust_kld_quantized(&Cdf::from(mu), &ball, &p).value;
        assert!(q <= direct + 1e-10, "{q} > {direct}");
    }
}

//! Extremal members of a Levy ball and continuity diagnostics.
//!
//! The transition family `mu_x^delta` follows the lower envelope of
//! `B_L(mu0, delta)` strictly before `x` and the upper envelope from `x` on.
//! Its members are the vertices over which the robust divergence attains
//! its supremum on the ball, so `sup_over_ball` only scans `x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Cdf, LevyBall, StepCdf};
use crate::error::{Error, Result};
use crate::kld::robust_kld;

/// Tail expansion stops once the single-atom gap is this close to its limit.
const TAIL_GAP_TOL: f64 = 1e-6;
const TAIL_MAX_STEPS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProfile {
    pub base: StepCdf,
    pub delta: f64,
    pub x: f64,
    pub realized: StepCdf,
}

impl TransitionProfile {
    /// Mass of the jump at the transition point.
    pub fn jump_at_x(&self) -> f64 {
        self.realized.eval(self.x) - self.realized.left_limit(self.x)
    }
}

pub fn transition_family(mu0: &StepCdf, delta: f64, x: f64) -> Result<TransitionProfile> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("transition point must be finite, got {x}")));
    }
    LevyBall::new(Cdf::from(mu0.clone()), delta)?;
    // Envelopes are counted against the shifted atoms themselves: evaluating
    // mu0((a + delta) - delta) can round below `a` and drop a whole step.
    let right: Vec<f64> = mu0.atoms().iter().map(|a| a + delta).collect();
    let left: Vec<f64> = mu0.atoms().iter().map(|a| a - delta).collect();
    let level = |shifted: &[f64], t: f64| match shifted.partition_point(|&s| s <= t) {
        0 => 0.0,
        k => mu0.cumulative(k - 1),
    };
    let value = |t: f64| if t < x { (level(&right, t) - delta).max(0.0) } else { (level(&left, t) + delta).min(1.0) };

    let mut breaks: Vec<f64> =
        right.iter().copied().filter(|&t| t < x).chain(std::iter::once(x)).chain(left.iter().copied().filter(|&t| t > x)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut pairs = Vec::with_capacity(breaks.len());
    let mut prev = 0.0;
    for t in breaks {
        let v = value(t);
        if v > prev {
            pairs.push((t, v - prev));
            prev = v;
        }
    }
    let (atoms, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let realized = StepCdf::new(atoms, weights)?;
    Ok(TransitionProfile { base: mu0.clone(), delta, x, realized })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupReport {
    pub value: f64,
    pub argmax: f64,
    pub candidates: usize,
    /// Outermost tail points scanned on each side.
    pub tail_range: (f64, f64),
    /// `max |U(x) - L(x-) - r|` at the two outermost tail points.
    pub tail_gap: f64,
}

/// Supremum of `D(mu || ball)` over `mu` in `B_L(mu0, delta)`, scanned over
/// the transition points of the extremal family.
pub fn sup_over_ball(mu0: &StepCdf, delta: f64, ball: &LevyBall, extra_grid: &[f64]) -> Result<SupReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidRadius(delta));
    }
    let mut xs: Vec<f64> = mu0.atoms().iter().flat_map(|a| [a - delta, *a, a + delta]).collect();
    xs.extend(extra_grid.iter().copied().filter(|v| v.is_finite()));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mids: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    xs.extend(mids);

    let r = ball.radius();
    let settled = |x: f64| (ball.atom_gap(x) - r).abs() <= TAIL_GAP_TOL;
    let lo0 = xs.first().copied().unwrap_or(0.0);
    let hi0 = xs.last().copied().unwrap_or(0.0);
    let (lo, hi) = (expand_tail(lo0, -1.0, &settled, &mut xs), expand_tail(hi0, 1.0, &settled, &mut xs));
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let (value, argmax) = xs
        .par_iter()
        .map(|&x| {
            let v = transition_family(mu0, delta, x).map(|p| robust_kld(&p.realized, ball).value).unwrap_or(f64::NEG_INFINITY);
            (v, x)
        })
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), better);
    let tail_gap = (ball.atom_gap(lo) - r).abs().max((ball.atom_gap(hi) - r).abs());
    Ok(SupReport { value, argmax, candidates: xs.len(), tail_range: (lo, hi), tail_gap })
}

/// Larger value wins; ties go to the smaller location so that the reduction
/// does not depend on evaluation order.
fn better(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => if a.1 <= b.1 { a } else { b },
    }
}

fn expand_tail(start: f64, dir: f64, settled: &dyn Fn(f64) -> bool, xs: &mut Vec<f64>) -> f64 {
    let mut x = start;
    let mut h = 0.25;
    for i in 0..TAIL_MAX_STEPS {
        if settled(x) {
            break;
        }
        x += dir * h;
        xs.push(x);
        if i % 8 == 7 {
            h *= 2.0;
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalBound {
    pub value: f64,
    pub argmax: f64,
    /// `ln(1/r)` minus the scanned maximum.
    pub gap: f64,
}

/// Largest single-atom value `ln(1 / (U(x) - L(x-)))` on a grid.
pub fn global_bound_scan(ball: &LevyBall, x_lo: f64, x_hi: f64, step: f64) -> Result<GlobalBound> {
    if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite x_lo < x_hi, got [{x_lo}, {x_hi}]")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let count = ((x_hi - x_lo) / step).floor() as usize;
    let (value, argmax) = (0..=count + 1)
        .into_par_iter()
        .map(|k| {
            let x = if k > count { x_hi } else { x_lo + k as f64 * step };
            (-ball.atom_gap(x).ln(), x)
        })
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), better);
    let value = value.max(0.0);
    Ok(GlobalBound { value, argmax, gap: (1.0 / ball.radius()).ln() - value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusScan {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub max_adjacent_jump: f64,
}

fn require_continuous(center: &Cdf) -> Result<()> {
    if center.is_continuous() {
        Ok(())
    } else {
        Err(Error::DiscontinuousCenter)
    }
}

/// `D(mu || B_L(center, r))` along an increasing radius grid.
pub fn radius_scan(mu: &StepCdf, center: &Cdf, radii: &[f64]) -> Result<RadiusScan> {
    require_continuous(center)?;
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radii must be nonempty and strictly increasing".into()));
    }
    let values = radii
        .par_iter()
        .map(|&r| LevyBall::new(center.clone(), r).map(|b| robust_kld(mu, &b).value))
        .collect::<Result<Vec<f64>>>()?;
    let max_adjacent_jump = values.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    Ok(RadiusScan { radii: radii.to_vec(), values, max_adjacent_jump })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub coarse: RadiusScan,
    pub fine: RadiusScan,
    /// Fine max jump over coarse max jump; `None` when the coarse scan is flat.
    pub ratio: Option<f64>,
}

/// Reruns `radius_scan` on a grid with nine extra points in every gap.
pub fn radius_refinement_study(mu: &StepCdf, center: &Cdf, radii: &[f64]) -> Result<RefinementStudy> {
    let coarse = radius_scan(mu, center, radii)?;
    let mut fine_radii: Vec<f64> = radii
        .windows(2)
        .flat_map(|w| (0..10).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / 10.0))
        .collect();
    fine_radii.push(*radii.last().unwrap());
    let fine = radius_scan(mu, center, &fine_radii)?;
    let ratio = (coarse.max_adjacent_jump > 0.0).then(|| fine.max_adjacent_jump / coarse.max_adjacent_jump);
    Ok(RefinementStudy { coarse, fine, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub delta: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityProbe {
    pub points: Vec<ProbePoint>,
    pub base_value: f64,
    /// `|sup - D(mu0 || ball)|` at the last radius of the schedule.
    pub final_gap: f64,
}

/// `sup_over_ball` along a decreasing schedule of perturbation radii.
pub fn semicontinuity_probe(mu0: &StepCdf, ball: &LevyBall, schedule: &[f64]) -> Result<SemicontinuityProbe> {
    require_continuous(ball.center())?;
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("schedule must be nonempty and strictly decreasing".into()));
    }
    if *schedule.last().unwrap() < 1e-6 {
        return Err(Error::InvalidArgument("schedule must stay at or above 1e-6".into()));
    }
    let points = schedule
        .iter()
        .map(|&delta| sup_over_ball(mu0, delta, ball, &[]).map(|s| ProbePoint { delta, sup: s.value }))
        .collect::<Result<Vec<_>>>()?;
    let base_value = robust_kld(mu0, ball).value;
    let final_gap = (points.last().unwrap().sup - base_value).abs();
    Ok(SemicontinuityProbe { points, base_value, final_gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvBallDemo {
    pub n: usize,
    /// `D(P_n || B_L(P0, r))`.
    pub levy_value: f64,
    /// `ln(1 / (P0(S_n) + r))` with `P0(S_n) = 0`.
    pub tv_lower_bound: f64,
    pub atoms: Vec<f64>,
}

/// Discretization of `p0` with mass `1/n` at each of its `(k - 1/2)/n`
/// quantiles. The sup-distance to `p0` is `1/(2n)`.
pub fn midpoint_quantization(p0: &Cdf, n: usize) -> Result<StepCdf> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let atoms: Vec<f64> = (1..=n).map(|k| p0.quantile((k as f64 - 0.5) / n as f64)).collect();
    StepCdf::from_pairs(atoms.into_iter().map(|x| (x, 1.0 / n as f64)).collect())
}

/// Compares the Levy ball with a total-variation ball around a continuous
/// `p0`: the discrete `P_n` lies in the Levy ball once `1/n <= r`, while
/// every TV ball member keeps divergence at least `ln(1/r)` from it.
pub fn tv_ball_demo(p0: &Cdf, radius: f64, n: usize) -> Result<TvBallDemo> {
    require_continuous(p0)?;
    let ball = LevyBall::new(p0.clone(), radius)?;
    let pn = midpoint_quantization(p0, n)?;
    let levy_value = robust_kld(&pn, &ball).value;
    Ok(TvBallDemo { n, levy_value, tv_lower_bound: (1.0 / radius).ln(), atoms: pn.atoms().to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBallDemo {
    /// `D(mu || B_KL(P0, r))`; infinite when `mu` has an atom `P0` does not charge.
    pub value: f64,
    pub infinite: bool,
    pub witness_atoms: Vec<f64>,
}

/// Every member of a KL ball around `p0` is absolutely continuous with
/// respect to `p0`, so any atom of `mu` where `p0` has no mass makes the
/// divergence infinite. Only that case and `mu == p0` are decided.
pub fn kl_ball_value(mu: &Cdf, p0: &Cdf) -> Result<KlBallDemo> {
    if mu == p0 {
        return Ok(KlBallDemo { value: 0.0, infinite: false, witness_atoms: Vec::new() });
    }
    let witness: Vec<f64> = mu.jumps().into_iter().filter(|&x| p0.eval(x) - p0.left_limit(x) <= 0.0).collect();
    if witness.is_empty() {
        return Err(Error::InvalidArgument("KL-ball divergence is only decided for atoms outside the nominal support".into()));
    }
    Ok(KlBallDemo { value: f64::INFINITY, infinite: true, witness_atoms: witness })
}

/// The KL-ball counterpart of `tv_ball_demo` for `P_n` built from `p0`.
pub fn kl_ball_demo(p0: &Cdf, n: usize) -> Result<KlBallDemo> {
    require_continuous(p0)?;
    let pn = midpoint_quantization(p0, n)?;
    kl_ball_value(&Cdf::from(pn), p0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
}

pub fn envelope_rows(ball: &LevyBall, grid: &[f64]) -> Vec<EnvelopeRow> {
    grid.iter()
        .map(|&t| EnvelopeRow { t, lower: ball.lower(t), upper: ball.upper(t), center: ball.center().eval(t) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_10, LN_2};

    fn normal_ball(r: f64) -> LevyBall {
        LevyBall::new(Cdf::standard_normal(), r).unwrap()
    }

    #[test]
    fn unit_radius_family_is_a_point_mass() {
        let p = transition_family(&StepCdf::point_mass(0.0).unwrap(), 1.0, 3.0).unwrap();
        assert_eq!(p.realized, StepCdf::point_mass(3.0).unwrap());
    }

    #[test]
    fn shifted_atoms_survive_rounding() {
        // (1.9804756750070416 + 0.05) - 0.05 rounds below the atom.
        let mu0 = StepCdf::from_pairs(vec![(1.3066930155733685, 0.4), (1.9804756750070416, 0.6)]).unwrap();
        let p = transition_family(&mu0, 0.05, 8.0).unwrap();
        assert_eq!(p.realized.len(), 3);
        assert!((p.jump_at_x() - 0.05).abs() < 1e-15);
        assert!(LevyBall::new(Cdf::from(mu0), 0.05).unwrap().contains(&Cdf::from(p.realized)));
    }

    #[test]
    fn jump_at_transition_point() {
        let mu0 = StepCdf::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p = transition_family(&mu0, 0.1, 0.5).unwrap();
        assert!((p.jump_at_x() - 0.2).abs() < 1e-15);
        let ball = LevyBall::new(Cdf::from(mu0), 0.1).unwrap();
        assert!(ball.contains(&Cdf::from(p.realized)));
    }

    #[test]
    fn left_of_everything_follows_upper_envelope() {
        let mu0 = StepCdf::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p = transition_family(&mu0, 0.1, -5.0).unwrap();
        let ball = LevyBall::new(Cdf::from(mu0), 0.1).unwrap();
        for t in [-5.0, -1.0, -0.1, 0.3, 0.9, 2.0] {
            assert_eq!(p.realized.eval(t), ball.upper(t));
        }
    }

    #[test]
    fn sup_reaches_tail_limit() {
        let s = sup_over_ball(&StepCdf::point_mass(0.0).unwrap(), 1.0, &normal_ball(0.1), &[5.0]).unwrap();
        // mpmath: ln(1 / (1 - Phi(4.9) + 0.1)) = 2.302580301172760
        assert!(s.value >= 2.302580301172760 - 1e-12, "{s:?}");
        assert!(s.value <= LN_10 + 1e-8);
    }

    #[test]
    fn tiny_perturbation_of_member() {
        let ball = normal_ball(0.1);
        let mu0 = midpoint_quantization(ball.center(), 10).unwrap();
        assert_eq!(robust_kld(&mu0, &ball).value, 0.0);
        let s = sup_over_ball(&mu0, 1e-6, &ball, &[]).unwrap();
        assert!(s.value <= 1e-3);
    }

    #[test]
    fn global_bound_examples() {
        let g = global_bound_scan(&normal_ball(0.1), -5.0, 5.0, 0.01).unwrap();
        assert!(g.gap >= 0.0 && g.gap < 5e-5, "{g:?}");
        let u = LevyBall::new(Cdf::uniform(0.0, 1.0).unwrap(), 0.25).unwrap();
        assert!(global_bound_scan(&u, -3.0, 3.0, 0.1).unwrap().value <= 4f64.ln());
        assert_eq!(global_bound_scan(&normal_ball(1.0), -3.0, 3.0, 0.1).unwrap().value, 0.0);
        assert!(global_bound_scan(&normal_ball(0.1), 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn radius_scan_single_atom_closed_form() {
        let radii = [0.02, 0.05, 0.1, 0.2];
        let mu = StepCdf::point_mass(0.3).unwrap();
        let scan = radius_scan(&mu, &Cdf::standard_normal(), &radii).unwrap();
        for (r, v) in radii.iter().zip(&scan.values) {
            assert!((v + normal_ball(*r).atom_gap(0.3).ln()).abs() < 1e-10);
        }
        assert!(scan.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(matches!(radius_scan(&mu, &Cdf::point_mass(0.0).unwrap(), &radii), Err(Error::DiscontinuousCenter)));
    }

    #[test]
    fn radius_scan_hits_zero_on_entry() {
        let mu = StepCdf::new(vec![-0.1, 0.1], vec![0.5, 0.5]).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| k as f64 * 0.025).collect();
        let scan = radius_scan(&mu, &Cdf::standard_normal(), &radii).unwrap();
        let first_zero = scan.values.iter().position(|&v| v == 0.0).unwrap();
        assert!(scan.values[first_zero..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probe_on_member_vanishes() {
        let ball = normal_ball(0.1);
        let mu0 = midpoint_quantization(ball.center(), 10).unwrap();
        let probe = semicontinuity_probe(&mu0, &ball, &[0.1, 0.05, 0.01, 0.001]).unwrap();
        assert!(probe.points.windows(2).all(|w| w[1].sup <= w[0].sup + 1e-12));
        assert!(probe.final_gap <= 1e-3);
    }

    #[test]
    fn tv_and_kl_demos() {
        let d = tv_ball_demo(&Cdf::standard_normal(), 0.1, 20).unwrap();
        assert_eq!(d.levy_value, 0.0);
        assert_eq!(d.tv_lower_bound, LN_10);
        assert_eq!(tv_ball_demo(&Cdf::standard_normal(), 0.5, 4).unwrap().tv_lower_bound, LN_2);
        let small = tv_ball_demo(&Cdf::standard_normal(), 0.1, 5).unwrap();
        assert!(small.levy_value >= 0.0 && small.tv_lower_bound == LN_10);
        assert!(tv_ball_demo(&Cdf::point_mass(0.0).unwrap(), 0.1, 20).is_err());

        let kl = kl_ball_demo(&Cdf::standard_normal(), 7).unwrap();
        assert!(kl.infinite && kl.value.is_infinite());
        assert_eq!(kl.witness_atoms.len(), 7);
        assert_eq!(kl_ball_value(&Cdf::standard_normal(), &Cdf::standard_normal()).unwrap().value, 0.0);
    }

    #[test]
    fn envelope_row_at_zero() {
        let rows = envelope_rows(&normal_ball(0.045), &[0.0]);
        // mpmath: Phi(0.045) + 0.045
        assert!((rows[0].upper - 0.562946345522139).abs() < 1e-14);
        assert!((rows[0].lower - 0.437053654477861).abs() < 1e-14);
        assert_eq!(rows[0].center, 0.5);
    }
}

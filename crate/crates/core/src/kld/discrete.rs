use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidProbability(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidProbability(format!("{name} sums to {s}")));
    }
    Ok(())
}

/// `sum_i p_i ln(p_i / q_i)` with `0 ln 0 = 0`; `+inf` when some `q_i = 0 < p_i`.
pub fn kld_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    check_simplex("p", p)?;
    check_simplex("q", q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        // mpmath: 0.5 ln 2 + 0.5 ln(2/3)
        let v = kld_discrete(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((v - 0.143841036225890).abs() < 1e-14);
        assert_eq!(kld_discrete(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(kld_discrete(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(kld_discrete(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch { .. })));
        assert!(kld_discrete(&[0.6, 0.6], &[0.5, 0.5]).is_err());
        assert!(kld_discrete(&[1.1, -0.1], &[0.5, 0.5]).is_err());
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            let mut v: Vec<f64> = v.into_iter().map(|x| x / s).collect();
            let head: f64 = v[..v.len() - 1].iter().sum();
            *v.last_mut().unwrap() = 1.0 - head;
            v
        })
    }

    proptest! {
        #[test]
        fn nonnegative_and_zero_on_diagonal(p in simplex(5), q in simplex(5)) {
            prop_assert!(kld_discrete(&p, &q).unwrap() >= 0.0);
            prop_assert!(kld_discrete(&p, &p).unwrap() <= 1e-15);
        }
    }
}

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Result of comparing the score gap between two policies with
/// `max|R| * TV(pi_star, pi_0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapBound {
    pub delta: BigRational,
    pub tv: BigRational,
    pub bound: BigRational,
    pub holds: bool,
}

impl GapBound {
    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64().unwrap_or(f64::NAN)
    }

    pub fn bound_f64(&self) -> f64 {
        self.bound.to_f64().unwrap_or(f64::NAN)
    }

    pub fn tv_f64(&self) -> f64 {
        self.tv.to_f64().unwrap_or(f64::NAN)
    }
}

fn exact(values: &[f64], what: &str) -> Result<Vec<BigRational>> {
    values
        .iter()
        .map(|&v| {
            BigRational::from_f64(v)
                .ok_or_else(|| Error::InvalidDistribution(format!("{what} has non-finite entry {v}")))
        })
        .collect()
}

/// Float front end: every entry is converted to the rational it denotes
/// exactly, then checked with [`gap_bound_check_exact`].
pub fn gap_bound_check(pi_star: &[f64], pi_0: &[f64], r: &[f64]) -> Result<GapBound> {
    gap_bound_check_exact(
        &exact(pi_star, "pi_star")?,
        &exact(pi_0, "pi_0")?,
        &exact(r, "R")?,
    )
}

/// `delta = E_{pi_star}[R] - E_{pi_0}[R]` against `max|R| * TV`.
///
/// Both distributions must sum to 1 within 1e-9; they are renormalized
/// exactly before use. Scores must be non-negative, as they are everywhere
/// in this crate; with signed scores the bound needs the range of R rather
/// than its maximum.
pub fn gap_bound_check_exact(
    pi_star: &[BigRational],
    pi_0: &[BigRational],
    r: &[BigRational],
) -> Result<GapBound> {
    if pi_star.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if pi_star.len() != pi_0.len() || pi_star.len() != r.len() {
        return Err(Error::InvalidDistribution(format!(
            "support mismatch: |pi_star| = {}, |pi_0| = {}, |R| = {}",
            pi_star.len(),
            pi_0.len(),
            r.len()
        )));
    }
    if let Some(x) = r.iter().find(|x| x.is_negative()) {
        return Err(Error::InvalidDistribution(format!("negative score {x}")));
    }
    let p = normalized(pi_star, "pi_star")?;
    let q = normalized(pi_0, "pi_0")?;

    let delta: BigRational = p
        .iter()
        .zip(&q)
        .zip(r)
        .map(|((a, b), x)| (a - b) * x)
        .sum();
    let l1: BigRational = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
    let tv = l1 / BigRational::from_integer(BigInt::from(2));
    let r_max = r.iter().max().cloned().unwrap_or_else(BigRational::zero);
    let bound = &r_max * &tv;
    // exact arithmetic, so the 1e-12 slack is never needed
    let holds = delta <= bound;
    Ok(GapBound {
        delta,
        tv,
        bound,
        holds,
    })
}

fn normalized(p: &[BigRational], what: &str) -> Result<Vec<BigRational>> {
    if let Some(x) = p.iter().find(|x| x.is_negative()) {
        return Err(Error::InvalidDistribution(format!("{what} has negative mass {x}")));
    }
    let total: BigRational = p.iter().sum();
    let slack = BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000));
    let one = BigRational::from_integer(BigInt::from(1));
    if (&total - &one).abs() > slack {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {}, not 1",
            total.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(p.iter().map(|x| x / &total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_policies_have_zero_gap() {
        let g = gap_bound_check(&[0.25, 0.75], &[0.25, 0.75], &[0.3, 0.9]).unwrap();
        assert!(g.delta.is_zero() && g.bound.is_zero() && g.holds);
    }

    #[test]
    fn disjoint_point_masses_meet_the_bound() {
        let g = gap_bound_check(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(g.delta_f64(), 1.0);
        assert_eq!(g.tv_f64(), 1.0);
        assert_eq!(g.bound_f64(), 1.0);
        assert!(g.holds);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gap_bound_check(&[1.0], &[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(gap_bound_check(&[0.5, 0.6], &[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(gap_bound_check(&[0.5, 0.5], &[0.5, 0.5], &[1.0, -1.0]).is_err());
        assert!(gap_bound_check(&[0.5, f64::NAN], &[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(gap_bound_check(&[], &[], &[]).is_err());
    }

    #[test]
    fn tolerates_float_rounding_in_sums() {
        let third = 1.0 / 3.0;
        let g = gap_bound_check(&[third, third, third], &[0.5, 0.25, 0.25], &[0.0, 0.5, 1.0]).unwrap();
        assert!(g.holds);
    }

    proptest! {
        #[test]
        fn bound_holds(weights in prop::collection::vec((1u32..100, 1u32..100, 0u32..100), 1..32)) {
            let frac = |v: Vec<u32>| {
                let total: u32 = v.iter().sum();
                v.into_iter().map(|x| BigRational::new(x.into(), total.into())).collect::<Vec<_>>()
            };
            let p = frac(weights.iter().map(|w| w.0).collect());
            let q = frac(weights.iter().map(|w| w.1).collect());
            let r: Vec<BigRational> = weights.iter().map(|w| BigRational::new(w.2.into(), 100.into())).collect();
            prop_assert!(gap_bound_check_exact(&p, &q, &r).unwrap().holds);
        }
    }
}

//! Closed-form values for choice matching games, used as oracles.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::analysis::{Ect, Extended, Gct};
use crate::error::{Error, Result};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Expected coordination time from a stage with two touched edges and `n`
/// untouched ones, when both players put mass `p` on the touched choices.
/// `e1` and `e2` are the continuation values after a miss on touched and on
/// untouched edges respectively.
pub fn formula_e(p: f64, n: usize, e1: f64, e2: f64) -> f64 {
    let n = n as f64;
    p * p * (0.5 + 0.5 * (1.0 + e1))
        + 2.0 * p * (1.0 - p) * 2.0
        + (1.0 - p) * (1.0 - p) * (1.0 / n + (n - 1.0) / n * (1.0 + e2))
}

/// Probability that loop avoidance first coordinates in round `l` of `CM_m`
/// (odd `m`, `1 <= l <= ceil(m/2)`).
pub fn la_round_probability(l: usize, m: usize) -> Result<BigRational> {
    if m.is_multiple_of(2) || l == 0 || l > m.div_ceil(2) {
        return Err(Error::InvalidArgument(format!(
            "round {l} of CM_{m} is outside the odd-m range"
        )));
    }
    let (l, m) = (l as i64, m as i64);
    let mut p = q(1, m - 2 * l + 2);
    for k in 0..=l - 2 {
        p *= q(m - 2 * k - 1, m - 2 * k);
    }
    Ok(p)
}

/// Expected coordination time of loop avoidance in `CM_m`, odd `m`.
pub fn la_ect(m: usize) -> Result<BigRational> {
    if m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "loop avoidance has no finite closed form for even m = {m}"
        )));
    }
    let mut e = BigRational::zero();
    for l in 1..=m.div_ceil(2) {
        e += la_round_probability(l, m)? * BigRational::from_integer(l.into());
    }
    Ok(e)
}

/// Expected coordination time of wait-or-move in `CM_m`.
pub fn wm_ect(m: usize) -> BigRational {
    BigRational::from_integer(3.into()) - q(2, m as i64)
}

/// Closed-form summary for `CM_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CmClosedForms {
    pub m: usize,
    pub wm_ect: BigRational,
    pub la_ect: Option<BigRational>,
    pub la_gct: Option<u64>,
    pub optimal_ect: Ect,
    pub optimal_gct: Gct,
}

pub fn cm_closed_forms(m: usize) -> Result<CmClosedForms> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let odd = m % 2 == 1;
    let optimal = match m {
        1 => BigRational::one(),
        3 => q(5, 3),
        5 => q(7, 3),
        _ => wm_ect(m),
    };
    Ok(CmClosedForms {
        m,
        wm_ect: wm_ect(m),
        la_ect: if odd { Some(la_ect(m)?) } else { None },
        la_gct: odd.then(|| m.div_ceil(2) as u64),
        optimal_ect: Extended::Finite(optimal),
        optimal_gct: if odd {
            Extended::Finite(m.div_ceil(2) as u64)
        } else {
            Extended::Infinite
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn formula_e_examples() {
        assert_abs_diff_eq!(formula_e(1.0, 4, 2.0, 1.5), 2.0);
        for i in 0..=10 {
            assert_abs_diff_eq!(
                formula_e(i as f64 / 10.0, 2, 2.0, 2.0),
                2.0,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(formula_e(0.0, 3, 0.0, 1.0), 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn la_table() {
        assert_eq!(la_ect(1).unwrap(), q(1, 1));
        assert_eq!(la_ect(3).unwrap(), q(5, 3));
        assert_eq!(la_ect(5).unwrap(), q(7, 3));
        assert_eq!(la_ect(7).unwrap(), q(3, 1));
        assert_eq!(la_ect(9).unwrap(), q(11, 3));
        assert_eq!(la_round_probability(1, 9).unwrap(), q(1, 9));
        assert!(la_ect(4).is_err());
        for m in [1usize, 3, 5, 7, 9, 11] {
            let total: BigRational = (1..=m.div_ceil(2))
                .map(|l| la_round_probability(l, m).unwrap())
                .sum();
            assert_eq!(total, q(1, 1), "m={m}");
        }
    }

    #[test]
    fn figure_one_rows() {
        let want = [
            q(1, 1),
            q(2, 1),
            q(5, 3),
            q(5, 2),
            q(7, 3),
            q(8, 3),
            q(19, 7),
            q(11, 4),
            q(25, 9),
        ];
        for (i, v) in want.into_iter().enumerate() {
            let c = cm_closed_forms(i + 1).unwrap();
            assert_eq!(c.optimal_ect, Extended::Finite(v));
            let gct = if (i + 1) % 2 == 1 {
                Extended::Finite((i as u64 + 2) / 2)
            } else {
                Extended::Infinite
            };
            assert_eq!(c.optimal_gct, gct);
        }
        let c7 = cm_closed_forms(7).unwrap();
        assert_eq!((c7.la_ect.unwrap(), c7.wm_ect), (q(3, 1), q(19, 7)));
        assert!(cm_closed_forms(0).is_err());
    }
}

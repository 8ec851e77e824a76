//! Worst-case query counts and competitive ratios, in exact arithmetic.

use alloc::vec::Vec;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow};

use crate::error::{contract, Result};
use crate::model::ModelStats;
use crate::tra::TraRun;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundReport {
    /// Distinct split levels.
    pub n: u64,
    /// Number of axes.
    pub m: usize,
    /// Split levels per axis.
    pub s: Vec<u64>,
    /// `prod(s_i + 1)`: cells of the split-level grid.
    pub prop1_bound: BigUint,
    /// `(1 + n/m)^m`, the largest value of `prop1_bound` over all `s` with the same sum.
    pub cor1_bound: BigRational,
    /// `2 prod(s_i + 1) - 1`.
    pub worst_case_queries: BigUint,
    /// `n + 1`.
    pub opt_queries_lower: BigUint,
    /// `worst_case_queries / opt_queries_lower`.
    pub c_tra: BigRational,
}

impl BoundReport {
    pub fn from_stats(stats: &ModelStats) -> Self {
        bound_report(&stats.s)
    }
}

fn grid_cells(s: &[u64]) -> BigUint {
    s.iter().map(|&si| BigUint::from(si) + 1u32).product()
}

/// Bounds for split-level counts `s`.
pub fn bound_report(s: &[u64]) -> BoundReport {
    let n: u64 = s.iter().sum();
    let m = s.len();
    let prop1_bound = grid_cells(s);
    let cor1_bound = if m == 0 {
        BigRational::one()
    } else {
        let base = BigRational::new(BigInt::from(m as u64 + n), BigInt::from(m as u64));
        Pow::pow(base, m as u32)
    };
    let worst_case_queries = &prop1_bound * 2u32 - 1u32;
    let opt_queries_lower = BigUint::from(n) + 1u32;
    let c_tra = BigRational::new(worst_case_queries.clone().into(), opt_queries_lower.clone().into());
    BoundReport { n, m, s: s.to_vec(), prop1_bound, cor1_bound, worst_case_queries, opt_queries_lower, c_tra }
}

/// `prod(s_i + 1) <= (1 + n/m)^m`, checked as `prod(s_i + 1) m^m <= (m + n)^m`.
pub fn am_gm_holds(s: &[u64]) -> bool {
    let m = s.len() as u32;
    let n: u64 = s.iter().sum();
    let lhs = grid_cells(s) * Pow::pow(BigUint::from(m), m);
    let rhs = Pow::pow(BigUint::from(m as u64 + n), m);
    lhs <= rhs
}

/// Billed queries of a certified run over the offline lower bound `n + 1`.
pub fn measured_ratio(run: &TraRun, target: &ModelStats) -> Result<BigRational> {
    if !run.certified {
        return Err(contract!("the competitive ratio needs a complete run with certified absences"));
    }
    Ok(BigRational::new(BigInt::from(run.queries), BigInt::from(target.n + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn base_cases() {
        let r = bound_report(&[1, 1]);
        assert_eq!(r.worst_case_queries, BigUint::from(7u32));
        assert_eq!(r.opt_queries_lower, BigUint::from(3u32));
        assert_eq!(r.c_tra, ratio(7, 3));
        assert_eq!(r.cor1_bound, ratio(4, 1));
        let r = bound_report(&[2, 1]);
        assert_eq!((r.n, r.worst_case_queries.clone()), (3, BigUint::from(11u32)));
        assert_eq!(r.c_tra, ratio(11, 4));
        let r = bound_report(&[1]);
        assert_eq!(r.c_tra, ratio(3, 2));
        assert_eq!(r.c_tra.clone() * BigRational::from(BigInt::from(r.n + 1)), BigRational::from(BigInt::from(3)));
    }

    #[test]
    fn am_gm() {
        assert!(am_gm_holds(&[1, 1]));
        assert!(am_gm_holds(&[5, 0, 0]));
        assert!(am_gm_holds(&[]));
        assert!(am_gm_holds(&[3, 3, 3]));
        let r = bound_report(&[2, 2]);
        assert_eq!(BigRational::from(BigInt::from(r.prop1_bound)), r.cor1_bound);
        assert!(am_gm_holds(&[1000; 12]));
    }
}

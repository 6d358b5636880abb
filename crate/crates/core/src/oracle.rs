//! Brute-force convolution by enumerating entry pairs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vector::{ExactInt, Index, SparseVec};

/// Largest `‖A‖₀·‖B‖₀` the default oracle will enumerate.
pub const ORACLE_GUARD: u128 = 1 << 28;

/// `(A ⋆ B)_k = Σ_{i+j=k} A_i B_j` over all entry pairs.
pub fn oracle_conv(a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
    oracle_conv_guarded(a, b, ORACLE_GUARD)
}

pub fn oracle_conv_guarded(a: &SparseVec, b: &SparseVec, guard: u128) -> Result<SparseVec> {
    let pairs = a.nnz() as u128 * b.nnz() as u128;
    if pairs > guard {
        return Err(Error::guard("oracle pair enumeration", pairs, guard));
    }
    let len = if a.length() == 0 || b.length() == 0 {
        0
    } else {
        a.length() + b.length() - 1
    };
    let mut acc: HashMap<Index, ExactInt> = HashMap::with_capacity(pairs.min(1 << 20) as usize);
    for (i, x) in a.iter() {
        for (j, y) in b.iter() {
            *acc.entry(i + j).or_default() += x * y;
        }
    }
    SparseVec::from_pairs(len, acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(n: Index, pairs: &[(Index, i64)]) -> SparseVec {
        SparseVec::from_pairs(n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn examples() {
        let b = sv(9, &[(2, 7), (8, 1)]);
        assert_eq!(oracle_conv(&sv(1, &[(0, 1)]), &b).unwrap(), b);
        assert_eq!(
            oracle_conv(&sv(5, &[(1, 2), (4, 3)]), &sv(1, &[(0, 5)])).unwrap(),
            sv(5, &[(1, 10), (4, 15)])
        );
        assert!(oracle_conv(&SparseVec::zeros(0), &b).unwrap().is_zero());
        // cancellation leaves no explicit zero behind
        let c = oracle_conv(&sv(2, &[(0, 1), (1, 1)]), &sv(2, &[(0, 1), (1, -1)])).unwrap();
        assert_eq!(c, sv(3, &[(0, 1), (2, -1)]));
    }

    #[test]
    fn guard_refuses_large_products() {
        let a = SparseVec::from_pairs(100, (0..100u64).map(|i| (i, 1u32))).unwrap();
        assert!(matches!(oracle_conv_guarded(&a, &a, 9999), Err(Error::Guard { .. })));
        assert_eq!(oracle_conv_guarded(&a, &a, 10_000).unwrap().nnz(), 199);
    }
}

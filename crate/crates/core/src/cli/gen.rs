//! Random instances for the self-test, the benchmark and the test suites.

use rand::seq::index::sample;
use rand::Rng;

use crate::vector::{Index, SparseVec};

/// `k` distinct indices below `n` (fewer if `n < k`) with values uniform in `1..=max_value`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: Index, k: usize, max_value: u64) -> SparseVec {
    let k = k.min(n as usize);
    let idx = sample(rng, n as usize, k);
    let pairs: Vec<(Index, u64)> = idx.into_iter().map(|i| (i as Index, rng.gen_range(1..=max_value.max(1)))).collect();
    SparseVec::from_pairs(n, pairs).expect("indices below n")
}

/// `⌊2^u⌋` for `u` uniform in `[log₂ lo, log₂ hi]`, clamped to `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    assert!(1 <= lo && lo <= hi);
    let u = rng.gen_range((lo as f64).log2()..=(hi as f64).log2());
    (u.exp2() as u64).clamp(lo, hi)
}

/// Parameters of a random instance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceShape {
    pub max_length: Index,
    pub max_nnz: usize,
    pub max_value: u64,
    /// Upper bound on `‖A‖₀·‖B‖₀`; `usize::MAX` for none.
    pub max_pairs: usize,
}

impl InstanceShape {
    /// Lengths and sparsities log-uniform up to the maxima, values uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (SparseVec, SparseVec) {
        let n = log_uniform(rng, 1, self.max_length);
        let cap = (self.max_nnz as u64).min(n);
        let ka = log_uniform(rng, 1, cap.min(self.max_pairs as u64).max(1)) as usize;
        let cap_b = cap.min((self.max_pairs / ka).max(1) as u64);
        let kb = log_uniform(rng, 1, cap_b) as usize;
        let (ka, kb) = if rng.gen::<bool>() { (ka, kb) } else { (kb, ka) };
        (
            random_vector(rng, n, ka, self.max_value),
            random_vector(rng, n, kb, self.max_value),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn shapes_are_respected() {
        let mut rng = SeededRng::new(1);
        let shape = InstanceShape {
            max_length: 1 << 12,
            max_nnz: 40,
            max_value: 9,
            max_pairs: 100,
        };
        for _ in 0..500 {
            let (a, b) = shape.sample(&mut rng);
            assert_eq!(a.length(), b.length());
            assert!(a.nnz() >= 1 && b.nnz() >= 1);
            assert!(a.nnz() <= 40 && b.nnz() <= 40 && a.nnz() * b.nnz() <= 100);
            assert!(a.iter().all(|(_, v)| *v >= 1.into() && *v <= 9.into()));
        }
        let v = random_vector(&mut rng, 3, 10, 1);
        assert_eq!(v.support(), vec![0, 1, 2]);
    }
}

//! Hash families used by the Las Vegas engines, and the prime sieve behind them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::vector::{DenseVec, ExactInt, Index, SparseVec, MAX_LENGTH};

/// Largest upper end accepted by [`primes_in_range`].
pub const SIEVE_GUARD: u64 = 1 << 36;

/// Largest number of integers sieved in one call.
pub const SIEVE_SPAN_GUARD: u64 = 1 << 30;

/// Anything that sends keys to a fixed number of buckets.
pub trait BucketHash {
    /// Number of buckets of a hashed vector.
    fn buckets(&self) -> Index;
    fn eval(&self, x: Index) -> Index;
}

/// `h(x) = ((a·x) mod N) mod m_eff`, almost additive with offsets `phi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearHash {
    n: Index,
    m_user: Index,
    m_eff: Index,
    big_n: u128,
    a: u128,
    phi: Vec<Index>,
}

impl LinearHash {
    /// The hash with a fixed multiplier; `a` must be odd and below `N`.
    pub fn with_multiplier(n: Index, m: Index, a: u128) -> Result<Self> {
        if m == 0 || n == 0 || m > n {
            return Err(Error::Contract(format!("linear hash needs n ≥ m ≥ 1, got n = {n}, m = {m}")));
        }
        if n > 2 * MAX_LENGTH {
            return Err(Error::LengthTooLarge(n as u128));
        }
        let m_eff = if m % 2 == 1 { m } else { (m - 1).max(1) };
        let big_n = (n as u128 * m_eff as u128 + 1).next_power_of_two();
        if a % 2 == 0 || a >= big_n {
            return Err(Error::Contract(format!("multiplier {a} must be odd and below {big_n}")));
        }
        let base = [0, (big_n % m_eff as u128) as Index];
        let mut phi: Vec<Index> = if m % 2 == 1 {
            base.to_vec()
        } else {
            base.iter()
                .flat_map(|&f| [f + m - 1, f, f + 1].map(|v| v % m))
                .collect()
        };
        phi.sort_unstable();
        phi.dedup();
        Ok(LinearHash {
            n,
            m_user: m,
            m_eff,
            big_n,
            a,
            phi,
        })
    }

    pub fn n(&self) -> Index {
        self.n
    }

    pub fn m_user(&self) -> Index {
        self.m_user
    }

    pub fn m_eff(&self) -> Index {
        self.m_eff
    }

    pub fn big_n(&self) -> u128 {
        self.big_n
    }

    pub fn multiplier(&self) -> u128 {
        self.a
    }

    /// Offsets `φ` with `h(x) + h(y) ≡ h(x + y) + φ (mod m_user)`.
    pub fn phi_offsets(&self) -> &[Index] {
        &self.phi
    }
}

/// Draws a linear hash `[n] → [m]` with `a` uniform among odd residues of `[N]`.
pub fn sample_linear<R: Rng + ?Sized>(n: Index, m: Index, rng: &mut R) -> Result<LinearHash> {
    let probe = LinearHash::with_multiplier(n, m, 1)?;
    let a = rng.gen_range(0..probe.big_n / 2) * 2 + 1;
    Ok(LinearHash { a, ..probe })
}

impl BucketHash for LinearHash {
    fn buckets(&self) -> Index {
        self.m_user
    }

    #[inline]
    fn eval(&self, x: Index) -> Index {
        debug_assert!((x as u128) < 2 * self.n as u128);
        if self.big_n <= 1 << 64 {
            // only the low 64 bits of a·x survive the mask
            let ax = (self.a as u64).wrapping_mul(x) & (self.big_n - 1) as u64;
            return ax % self.m_eff;
        }
        let ax = self.a.wrapping_mul(x as u128) & (self.big_n - 1);
        (ax % self.m_eff as u128) as Index
    }
}

/// `h(x) = x mod p` for a prime `p ∈ [m, 2m]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeHash {
    m: Index,
    p: Index,
}

impl PrimeHash {
    /// A hash with a given prime, for tests that need a specific `p`.
    #[cfg(test)]
    pub(crate) fn with_prime(m: Index, p: Index) -> Self {
        PrimeHash { m, p }
    }

    pub fn m(&self) -> Index {
        self.m
    }

    pub fn p(&self) -> Index {
        self.p
    }
}

impl BucketHash for PrimeHash {
    fn buckets(&self) -> Index {
        self.p
    }

    #[inline]
    fn eval(&self, x: Index) -> Index {
        x % self.p
    }
}

/// The primes in `[lo, hi]`, ascending, by a segmented sieve of Eratosthenes.
pub fn primes_in_range(lo: u64, hi: u64) -> Result<Vec<u64>> {
    if hi > SIEVE_GUARD {
        return Err(Error::guard("sieve upper end", hi, SIEVE_GUARD));
    }
    let lo = lo.max(2);
    if lo > hi {
        return Ok(Vec::new());
    }
    if hi - lo >= SIEVE_SPAN_GUARD {
        return Err(Error::guard("sieve span", hi - lo + 1, SIEVE_SPAN_GUARD));
    }
    let root = (hi as f64).sqrt() as u64 + 1;
    let mut small = vec![true; root as usize + 1];
    let mut base = Vec::new();
    for i in 2..=root {
        if small[i as usize] {
            base.push(i);
            let mut j = i * i;
            while j <= root {
                small[j as usize] = false;
                j += i;
            }
        }
    }
    let mut is_prime = vec![true; (hi - lo + 1) as usize];
    for &q in &base {
        let start = (q * q).max(lo.div_ceil(q) * q);
        let mut j = start;
        while j <= hi {
            is_prime[(j - lo) as usize] = false;
            j += q;
        }
    }
    Ok(is_prime
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| lo + i as u64)
        .collect())
}

fn bertrand_primes(m: Index) -> Result<Arc<Vec<u64>>> {
    static MEMO: OnceLock<Mutex<HashMap<Index, Arc<Vec<u64>>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(ps) = memo.lock().unwrap().get(&m) {
        return Ok(Arc::clone(ps));
    }
    let ps = Arc::new(primes_in_range(m, 2 * m)?);
    Ok(Arc::clone(memo.lock().unwrap().entry(m).or_insert(ps)))
}

/// Draws `p` uniformly among the primes of `[m, 2m]`.
pub fn sample_prime_hash<R: Rng + ?Sized>(m: Index, rng: &mut R) -> Result<PrimeHash> {
    if m < 2 {
        return Err(Error::Contract(format!("prime hash needs m ≥ 2, got {m}")));
    }
    let ps = bertrand_primes(m)?;
    let p = ps[rng.gen_range(0..ps.len())];
    Ok(PrimeHash { m, p })
}

/// `h(V)_j = Σ_{h(i) = j} V_i`, densely, refusing more than `guard` buckets.
pub fn hash_vector<H: BucketHash>(h: &H, v: &SparseVec, guard: Index) -> Result<DenseVec> {
    let m = h.buckets();
    if m > guard {
        return Err(Error::guard("hashed vector", m, guard));
    }
    let mut out = vec![ExactInt::zero(); m as usize];
    for (i, x) in v.iter() {
        out[h.eval(i) as usize] += x;
    }
    Ok(DenseVec::new(out))
}

/// Sparse form of [`hash_vector`], for bucket counts too large to materialize.
pub fn hash_sparse<H: BucketHash>(h: &H, v: &SparseVec) -> SparseVec {
    let raw = v.iter().map(|(i, x)| (h.eval(i), x.clone())).collect();
    SparseVec::from_unsorted_unchecked(h.buckets(), raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn trial_primes(lo: u64, hi: u64) -> Vec<u64> {
        (lo..=hi)
            .filter(|&n| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn linear_hash_parameters() {
        let h = LinearHash::with_multiplier(8, 3, 5).unwrap();
        assert_eq!(h.big_n(), 32);
        assert_eq!(h.phi_offsets(), &[0, 2]);
        assert_eq!(h.eval(2), 1);
        assert_eq!(h.eval(7), 0);
        assert_eq!(h.eval(0), 0);
        // x = 3, y = 4
        assert_eq!((h.eval(3) + h.eval(4) + 3 - h.eval(7)) % 3, 2);

        let even = LinearHash::with_multiplier(8, 4, 5).unwrap();
        assert_eq!(even.m_eff(), 3);
        assert_eq!(even.big_n(), 32);
        assert!(even.phi_offsets().len() <= 6);

        let one = LinearHash::with_multiplier(8, 1, 1).unwrap();
        assert_eq!(one.phi_offsets(), &[0]);
        assert!(LinearHash::with_multiplier(8, 3, 4).is_err());
        assert!(LinearHash::with_multiplier(2, 3, 1).is_err());
    }

    #[test]
    fn sampled_multipliers_are_odd() {
        let mut rng = SeededRng::new(4);
        for m in 1..40 {
            let h = sample_linear(1000, m, &mut rng).unwrap();
            assert_eq!(h.multiplier() % 2, 1);
            assert!(h.multiplier() < h.big_n());
            assert!(h.big_n() > 1000 * h.m_eff() as u128);
            assert!(h.big_n() / 2 <= 1000 * h.m_eff() as u128);
        }
    }

    #[test]
    fn almost_additivity_holds() {
        let mut rng = SeededRng::new(9);
        for _ in 0..2000 {
            let n = rng.gen_range(1..5000u64);
            let m = rng.gen_range(1..=n.min(300));
            let h = sample_linear(n, m, &mut rng).unwrap();
            for _ in 0..20 {
                let x = rng.gen_range(0..n);
                let y = rng.gen_range(0..n);
                let off = (h.eval(x) + h.eval(y) + m - h.eval(x + y) % m) % m;
                assert!(h.phi_offsets().contains(&off), "n={n} m={m} x={x} y={y}");
                assert!(h.eval(x) < h.m_eff());
            }
        }
    }

    #[test]
    fn eval_matches_wide_formula() {
        let mut rng = SeededRng::new(10);
        for _ in 0..2000 {
            let bits = rng.gen_range(1..62);
            let n = rng.gen_range(1..=1u64 << bits);
            let m = rng.gen_range(1..=n.min(1 << 22));
            let h = sample_linear(n, m, &mut rng).unwrap();
            for _ in 0..20 {
                let x = rng.gen_range(0..2 * n);
                let wide = (h.multiplier().wrapping_mul(x as u128) % h.big_n()) % h.m_eff() as u128;
                assert_eq!(h.eval(x) as u128, wide);
            }
        }
    }

    #[test]
    fn sieve_matches_trial_division() {
        assert_eq!(primes_in_range(10, 20).unwrap(), vec![11, 13, 17, 19]);
        assert_eq!(primes_in_range(2, 2).unwrap(), vec![2]);
        assert!(primes_in_range(24, 28).unwrap().is_empty());
        for (lo, hi) in [(0u64, 200u64), (1000, 1300), (7919, 7919), (50, 10)] {
            assert_eq!(primes_in_range(lo, hi).unwrap(), trial_primes(lo, hi));
        }
        assert!(matches!(primes_in_range(0, SIEVE_GUARD + 1), Err(Error::Guard { .. })));
    }

    #[test]
    fn prime_hash_sampling() {
        let mut rng = SeededRng::new(2);
        for _ in 0..100 {
            assert!([11, 13, 17, 19].contains(&sample_prime_hash(10, &mut rng).unwrap().p()));
            assert!([2, 3].contains(&sample_prime_hash(2, &mut rng).unwrap().p()));
        }
        let h = sample_prime_hash(1000, &mut rng).unwrap();
        for _ in 0..1000 {
            let (x, y) = (rng.gen_range(0..1u64 << 40), rng.gen_range(0..1u64 << 40));
            assert_eq!((h.eval(x) + h.eval(y)) % h.p(), h.eval(x + y));
        }
        assert!(sample_prime_hash(1, &mut rng).is_err());
    }

    #[test]
    fn hashing_vectors() {
        let h = PrimeHash { m: 10, p: 11 };
        let v = SparseVec::from_pairs(20, [(3u64, 5i64), (14, 2)]).unwrap();
        let d = hash_vector(&h, &v, 1 << 20).unwrap();
        assert_eq!(d.len(), 11);
        assert_eq!(d[3], 7.into());
        assert_eq!(d.l1(), v.l1());
        assert!(hash_vector(&h, &SparseVec::zeros(20), 1 << 20).unwrap().is_all_zero());
        let s = hash_sparse(&h, &v);
        assert_eq!(s.entries(), &[(3, 7.into())]);
        assert!(matches!(hash_vector(&h, &v, 5), Err(Error::Guard { .. })));

        let mut rng = SeededRng::new(6);
        for _ in 0..50 {
            let lh = sample_linear(1 << 20, 1000, &mut rng).unwrap();
            let pairs: Vec<(u64, i64)> = (0..100).map(|_| (rng.gen_range(0..1 << 20), rng.gen_range(1..1000))).collect();
            let v = SparseVec::from_pairs(1 << 20, pairs).unwrap();
            assert_eq!(hash_vector(&lh, &v, 1 << 20).unwrap().l1(), v.l1());
        }
    }
}

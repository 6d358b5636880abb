//! Deterministic convolution of nonnegative vectors.
//!
//! `conv_with_support` evaluates and interpolates modulo several small primes
//! `p`, each time in `F_p[X]/(X^{p-1} - β)` where `ω = X + 1` has order at
//! least `2^p`, and recombines the residues by CRT. `support_superset` folds
//! both inputs in half, recurses, and widens every index of the folded
//! product to the three positions it can come from.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::arith::{is_prime_u64, residue};
use crate::dense::{conv_small_words, linear_conv_dense};
use crate::error::{Error, Result};
use crate::field::{build_extension, CrtBasis, MAX_EXT_PRIME};
use crate::vandermonde::prime_field_conv;
use crate::vector::{ExactInt, Index, SparseVec};

/// Lengths up to this are multiplied densely.
pub const BASE_LENGTH: Index = 8;

/// Inputs no longer than this multiple of `‖A‖₀ + ‖B‖₀` are also multiplied
/// densely; the dense product then costs `O(t log t)`.
pub const DENSE_FACTOR: Index = 64;

/// Environment variable with the worker count for the per-prime loop.
pub const THREADS_VAR: &str = "SPARSECONV_THREADS";

/// Primes used by one call of `conv_with_support`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimePlan {
    /// `⌈log₂ n′⌉` for `n′ = max(n, Δ)`.
    pub log_length: u64,
    /// Every prime exceeds this.
    pub threshold: u64,
    pub primes: Vec<u64>,
    /// Whether results are lifted into the symmetric range.
    pub signed: bool,
}

impl PrimePlan {
    /// Plan for `A ⋆ B`: primes above `max(⌈log₂ n′⌉, 6)` whose product
    /// exceeds every possible output magnitude (twice it for signed input).
    pub fn for_inputs(a: &SparseVec, b: &SparseVec) -> Result<Self> {
        let (na, nb) = (a.norms(), b.norms());
        let n = a.length().max(b.length());
        let delta = na.linf.clone().max(nb.linf.clone());
        let n_prime = delta.max(ExactInt::from(n));
        let log_length = if n_prime <= ExactInt::one() {
            0
        } else {
            (n_prime - 1u8).bits()
        };
        let bound = (&na.l1 * &nb.linf).min(&na.linf * &nb.l1);
        let signed = !(a.is_nonnegative() && b.is_nonnegative());
        let target = if signed { bound * 2u8 } else { bound };
        let threshold = log_length.max(6);
        let mut primes = Vec::new();
        let mut product = BigInt::one();
        let mut c = threshold + 1;
        while primes.is_empty() || product <= target {
            if c > MAX_EXT_PRIME {
                return Err(Error::guard("extension prime", c, MAX_EXT_PRIME));
            }
            if is_prime_u64(c) {
                primes.push(c);
                product *= c;
            }
            c += 1;
        }
        Ok(PrimePlan {
            log_length,
            threshold,
            primes,
            signed,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetReport {
    /// Deepest recursion level reached; the outermost call is level 0.
    pub max_depth: usize,
    /// Plans of every sparse convolution, in call order.
    pub plans: Vec<PrimePlan>,
    /// Sizes of the computed support supersets, in call order.
    pub superset_sizes: Vec<usize>,
    pub dense_calls: usize,
}

/// Worker count from `SPARSECONV_THREADS`, default 1.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or(1)
}

fn pool(threads: usize) -> Result<Option<Arc<ThreadPool>>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    if threads <= 1 {
        return Ok(None);
    }
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    if let Some(p) = pools.get(&threads) {
        return Ok(Some(Arc::clone(p)));
    }
    let p = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    let p = Arc::new(p);
    pools.insert(threads, Arc::clone(&p));
    Ok(Some(p))
}

/// The deterministic engine with its worker pool and per-run report.
pub struct Deterministic {
    pool: Option<Arc<ThreadPool>>,
    report: DetReport,
}

impl Deterministic {
    pub fn new(threads: usize) -> Result<Self> {
        Ok(Deterministic {
            pool: pool(threads)?,
            report: DetReport::default(),
        })
    }

    pub fn from_env() -> Result<Self> {
        Deterministic::new(threads_from_env())
    }

    pub fn report(&self) -> &DetReport {
        &self.report
    }

    /// Exact `A ⋆ B` for nonnegative inputs.
    pub fn conv(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        check_nonnegative(a, b)?;
        self.conv_at(a, b, 0)
    }

    /// A set containing `supp(A ⋆ B)` of size at most `3·‖A′ ⋆ B′‖₀`, where `A′`, `B′`
    /// are the inputs folded in half. Folding moves each sum `i + j` by `0`, `h` or
    /// `2h` for half length `h`, so that is at most `9·‖A ⋆ B‖₀`.
    pub fn support_superset(&mut self, a: &SparseVec, b: &SparseVec) -> Result<Vec<Index>> {
        check_nonnegative(a, b)?;
        self.superset_at(a, b, 0)
    }

    /// Exact `A ⋆ B` given `support ⊇ supp(A ⋆ B)`; entries may be signed.
    pub fn conv_with_support(&mut self, a: &SparseVec, b: &SparseVec, support: &[Index]) -> Result<SparseVec> {
        let out_len = out_length(a, b);
        let mut t = support.to_vec();
        t.sort_unstable();
        t.dedup();
        if let Some(&last) = t.last() {
            if last >= out_len {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    length: out_len,
                });
            }
        }
        if a.is_zero() || b.is_zero() || t.is_empty() {
            return Ok(SparseVec::zeros(out_len));
        }
        let plan = PrimePlan::for_inputs(a, b)?;
        let run = |&p: &u64| -> Result<Vec<u64>> {
            let ctx = build_extension(p)?;
            let ra: Vec<(Index, u64)> = a.iter().map(|(i, v)| (i, residue(v, p))).filter(|&(_, r)| r != 0).collect();
            let rb: Vec<(Index, u64)> = b.iter().map(|(i, v)| (i, residue(v, p))).filter(|&(_, r)| r != 0).collect();
            prime_field_conv(&ctx, &ra, &rb, &t)
        };
        let residues: Vec<Vec<u64>> = match &self.pool {
            Some(pool) => pool.install(|| plan.primes.par_iter().map(run).collect::<Result<_>>())?,
            None => plan.primes.iter().map(run).collect::<Result<_>>()?,
        };
        let basis = CrtBasis::new(&plan.primes)?;
        let mut entries = Vec::with_capacity(t.len());
        let mut column = vec![0u64; plan.primes.len()];
        for (k, &x) in t.iter().enumerate() {
            for (slot, r) in column.iter_mut().zip(&residues) {
                *slot = r[k];
            }
            let v = if plan.signed {
                basis.reconstruct_signed(&column)
            } else {
                BigInt::from(basis.reconstruct(&column))
            };
            if !v.is_zero() {
                entries.push((x, v));
            }
        }
        self.report.plans.push(plan);
        Ok(SparseVec::from_canonical(out_len, entries))
    }

    fn conv_at(&mut self, a: &SparseVec, b: &SparseVec, depth: usize) -> Result<SparseVec> {
        self.report.max_depth = self.report.max_depth.max(depth);
        let out_len = out_length(a, b);
        if a.is_zero() || b.is_zero() {
            return Ok(SparseVec::zeros(out_len));
        }
        if prefers_dense(a, b) {
            self.report.dense_calls += 1;
            return dense_product(a, b);
        }
        let t = self.superset_at(a, b, depth)?;
        let c = self.conv_with_support(a, b, &t)?;
        if cfg!(debug_assertions) && (a.nnz() as u128) * (b.nnz() as u128) <= 1 << 16 {
            let expect = crate::oracle::oracle_conv(a, b)?;
            if c != expect {
                return Err(Error::Invariant("deterministic product disagrees with the oracle".into()));
            }
        }
        Ok(c)
    }

    fn superset_at(&mut self, a: &SparseVec, b: &SparseVec, depth: usize) -> Result<Vec<Index>> {
        let out_len = out_length(a, b);
        if a.is_zero() || b.is_zero() {
            return Ok(Vec::new());
        }
        if prefers_dense(a, b) {
            self.report.max_depth = self.report.max_depth.max(depth);
            self.report.dense_calls += 1;
            return Ok(dense_product(a, b)?.support());
        }
        let n = a.length().max(b.length());
        let half = n.div_ceil(2);
        // only supp(A' ⋆ B') is needed, and for nonnegative input it equals
        // the support of the product of the folded supports
        let fold = |v: &SparseVec| -> Result<SparseVec> {
            let folded = v.with_length(n)?.fold_half();
            SparseVec::from_pairs(half, folded.iter().map(|(i, _)| (i, 1u8)))
        };
        let folded = self.conv_at(&fold(a)?, &fold(b)?, depth + 1)?;
        let mut t: Vec<Index> = folded
            .iter()
            .flat_map(|(k, _)| [k, k + half, k + 2 * half])
            .filter(|&k| k < out_len)
            .collect();
        t.sort_unstable();
        t.dedup();
        self.report.superset_sizes.push(t.len());
        Ok(t)
    }
}

fn check_nonnegative(a: &SparseVec, b: &SparseVec) -> Result<()> {
    match a.first_negative().or(b.first_negative()) {
        Some(i) => Err(Error::NegativeEntry(i)),
        None => Ok(()),
    }
}

fn out_length(a: &SparseVec, b: &SparseVec) -> Index {
    if a.length() == 0 || b.length() == 0 {
        0
    } else {
        a.length() + b.length() - 1
    }
}

fn prefers_dense(a: &SparseVec, b: &SparseVec) -> bool {
    let n = a.length().max(b.length());
    n <= BASE_LENGTH || n <= DENSE_FACTOR.saturating_mul((a.nnz() + b.nnz()) as Index)
}

/// Dense exact product; word arithmetic when the result provably fits.
fn dense_product(a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
    let out_len = out_length(a, b);
    let small = |v: &SparseVec| -> Option<Vec<u64>> {
        let mut w = vec![0u64; v.length() as usize];
        for (i, x) in v.iter() {
            w[i as usize] = u64::try_from(x).ok().filter(|&x| x < 1 << 20)?;
        }
        Some(w)
    };
    // entries below 2^20 and fewer than 2^20 terms per output keep sums below 2^60
    if a.nnz().min(b.nnz()) < 1 << 20 {
        if let (Some(wa), Some(wb)) = (small(a), small(b)) {
            let c = conv_small_words(&wa, &wb);
            let entries = c
                .into_iter()
                .enumerate()
                .filter(|&(_, v)| v != 0)
                .map(|(k, v)| (k as Index, ExactInt::from(v)))
                .collect();
            return Ok(SparseVec::from_canonical(out_len, entries));
        }
    }
    let c = linear_conv_dense(&a.to_dense(Index::MAX)?, &b.to_dense(Index::MAX)?)?;
    SparseVec::from_dense(&c, out_len)
}

/// Exact `A ⋆ B` for nonnegative inputs, with the worker count from the environment.
pub fn deterministic_conv(a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
    Deterministic::from_env()?.conv(a, b)
}

pub fn support_superset(a: &SparseVec, b: &SparseVec) -> Result<Vec<Index>> {
    Deterministic::from_env()?.support_superset(a, b)
}

pub fn conv_with_support(a: &SparseVec, b: &SparseVec, support: &[Index]) -> Result<SparseVec> {
    Deterministic::from_env()?.conv_with_support(a, b, support)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::Rng;

    use super::*;
    use crate::oracle::oracle_conv;
    use crate::rng::SeededRng;

    fn sv(n: Index, pairs: &[(Index, i64)]) -> SparseVec {
        SparseVec::from_pairs(n, pairs.iter().copied()).unwrap()
    }

    fn random_vec(rng: &mut SeededRng, n: Index, k: usize, max: u64) -> SparseVec {
        let pairs: Vec<(Index, u64)> = (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(1..=max))).collect();
        SparseVec::from_pairs(n, pairs).unwrap()
    }

    #[test]
    fn conv_with_support_examples() {
        let a = sv(6, &[(0, 1), (5, 1)]);
        let b = sv(8, &[(0, 1), (7, 1)]);
        let expect = sv(13, &[(0, 1), (5, 1), (7, 1), (12, 1)]);
        assert_eq!(conv_with_support(&a, &b, &[0, 5, 7, 12]).unwrap(), expect);
        assert_eq!(conv_with_support(&a, &b, &[12, 3, 0, 7, 5]).unwrap(), expect);

        let mut rng = SeededRng::new(21);
        let b = random_vec(&mut rng, 1000, 30, 1 << 16);
        let e0 = sv(1, &[(0, 1)]);
        assert_eq!(conv_with_support(&e0, &b, &b.support()).unwrap(), b);
        assert!(matches!(
            conv_with_support(&e0, &b, &[1000]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn conv_with_support_accepts_signed_input() {
        let mut rng = SeededRng::new(22);
        for _ in 0..20 {
            let a = SparseVec::from_pairs(
                500,
                (0..12).map(|_| (rng.gen_range(0..500u64), rng.gen_range(-(1i64 << 16)..=1 << 16))),
            )
            .unwrap();
            let b = SparseVec::from_pairs(
                300,
                (0..12).map(|_| (rng.gen_range(0..300u64), rng.gen_range(-(1i64 << 16)..=1 << 16))),
            )
            .unwrap();
            let expect = oracle_conv(&a, &b).unwrap();
            let t: BTreeSet<Index> = a.support().iter().flat_map(|i| b.support().into_iter().map(move |j| i + j)).collect();
            let t: Vec<Index> = t.into_iter().collect();
            assert_eq!(conv_with_support(&a, &b, &t).unwrap(), expect);
        }
    }

    #[test]
    fn missing_support_index_is_detected() {
        let a = sv(64, &[(3, 2), (40, 1)]);
        let b = sv(64, &[(1, 5), (9, 7)]);
        // the product has support {4, 12, 41, 49}; drop 49
        let outcome = conv_with_support(&a, &b, &[4, 12, 41]);
        assert!(matches!(outcome, Err(Error::Contract(_))), "{outcome:?}");
    }

    #[test]
    fn superset_examples() {
        let one = sv(1, &[(0, 1)]);
        assert_eq!(support_superset(&one, &one).unwrap(), vec![0]);
        let a = sv(4, &[(0, 1), (2, 1)]);
        let b = sv(4, &[(0, 1)]);
        // the dense base case returns the exact support
        assert_eq!(support_superset(&a, &b).unwrap(), vec![0, 2]);
        // forcing one folding step gives {k', k'+2, k'+4} for C' = {(0, 2)}
        let mut eng = Deterministic::new(1).unwrap();
        let folded = eng.conv(&sv(2, &[(0, 1)]), &sv(2, &[(0, 1)])).unwrap();
        assert_eq!(folded.support(), vec![0]);
        let widened: Vec<Index> = folded.support().iter().flat_map(|&k| [k, k + 2, k + 4]).filter(|&k| k < 7).collect();
        assert_eq!(widened, vec![0, 2, 4]);
    }

    #[test]
    fn superset_invariants_on_random_instances() {
        let mut rng = SeededRng::new(23);
        for _ in 0..60 {
            let n = 1u64 << rng.gen_range(4..20);
            let (ka, kb) = (rng.gen_range(1..24), rng.gen_range(1..24));
            let a = random_vec(&mut rng, n, ka, 1 << 16);
            let b = random_vec(&mut rng, n, kb, 1 << 16);
            let truth = oracle_conv(&a, &b).unwrap();
            let t = support_superset(&a, &b).unwrap();
            let ts: BTreeSet<Index> = t.iter().copied().collect();
            assert!(truth.support().iter().all(|k| ts.contains(k)));
            let folded = oracle_conv(&a.fold_half(), &b.fold_half()).unwrap();
            assert!(t.len() <= 3 * folded.nnz().max(truth.nnz()));
            assert!(folded.nnz() <= 3 * truth.nnz());
            assert!(t.len() <= 9 * truth.nnz());
        }
    }

    #[test]
    fn folding_can_enlarge_the_support() {
        // n = 10s, A = {4s, 5s}, B = {6s..9s}: the product has 5 entries but
        // the folded product has 8, and the superset holds 18 > 3·5 indices
        let s = 1 << 10;
        let a = SparseVec::from_pairs(10 * s, [(4 * s, 1u8), (5 * s, 1)]).unwrap();
        let b = SparseVec::from_pairs(10 * s, (6..10).map(|k| (k * s, 1u8))).unwrap();
        assert_eq!(oracle_conv(&a, &b).unwrap().nnz(), 5);
        assert_eq!(oracle_conv(&a.fold_half(), &b.fold_half()).unwrap().nnz(), 8);
        assert_eq!(support_superset(&a, &b).unwrap().len(), 18);
        assert_eq!(deterministic_conv(&a, &b).unwrap(), oracle_conv(&a, &b).unwrap());
    }

    #[test]
    fn matches_oracle_and_is_repeatable() {
        let mut rng = SeededRng::new(24);
        for _ in 0..30 {
            let n = 1u64 << rng.gen_range(1..20);
            let (ka, kb) = (rng.gen_range(0..20), rng.gen_range(0..20));
            let a = random_vec(&mut rng, n, ka, 1 << 16);
            let b = random_vec(&mut rng, n, kb, 1 << 16);
            let truth = oracle_conv(&a, &b).unwrap();
            let mut first = Deterministic::new(1).unwrap();
            let c1 = first.conv(&a, &b).unwrap();
            assert_eq!(c1, truth);
            let mut second = Deterministic::new(3).unwrap();
            assert_eq!(second.conv(&a, &b).unwrap(), c1);
            assert_eq!(first.report(), second.report());
            let log_n = 64 - (n - 1).leading_zeros() as usize;
            assert!(first.report().max_depth <= log_n + 1);
        }
    }

    #[test]
    fn edge_cases() {
        let empty = SparseVec::zeros(0);
        assert_eq!(deterministic_conv(&empty, &empty).unwrap(), empty);
        let b = sv(10, &[(3, 4)]);
        assert_eq!(deterministic_conv(&SparseVec::zeros(5), &b).unwrap(), SparseVec::zeros(14));
        assert!(matches!(
            deterministic_conv(&sv(4, &[(1, -1)]), &b),
            Err(Error::NegativeEntry(1))
        ));
        // large entries push n' = max(n, Δ) above the length
        let big = SparseVec::from_pairs(1 << 12, [(5u64, ExactInt::from(1u64 << 40)), (4000, ExactInt::from(3))]).unwrap();
        let c = deterministic_conv(&big, &big).unwrap();
        assert_eq!(c, oracle_conv(&big, &big).unwrap());
    }

    #[test]
    fn prime_plans() {
        let a = sv(1 << 20, &[(0, 1 << 16), (7, 1)]);
        let b = sv(1 << 20, &[(1, 1 << 16)]);
        let plan = PrimePlan::for_inputs(&a, &b).unwrap();
        assert_eq!(plan.log_length, 20);
        assert_eq!(plan.threshold, 20);
        assert_eq!(plan.primes[0], 23);
        let product: u128 = plan.primes.iter().map(|&p| p as u128).product();
        assert!(product > (1u128 << 16) * ((1 << 16) + 1));
        let without_last: u128 = product / *plan.primes.last().unwrap() as u128;
        assert!(without_last <= (1u128 << 16) * ((1 << 16) + 1));
        assert!(!plan.signed);

        let small = PrimePlan::for_inputs(&sv(4, &[(0, 1)]), &sv(4, &[(0, 1)])).unwrap();
        assert_eq!(small.primes, vec![7]);
        let signed = PrimePlan::for_inputs(&sv(4, &[(0, -3)]), &sv(4, &[(0, 3)])).unwrap();
        assert!(signed.signed);
        assert_eq!(signed.primes, vec![7, 11]);
    }
}

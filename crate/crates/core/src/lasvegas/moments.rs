//! Bucket moments `X, Y, Z` of hashed products, computed prime by prime.
//!
//! Hashed vectors are built directly as residues, the six transforms share
//! one prime plan, and only buckets with `X_k ≠ 0` are lifted back to
//! integers. A bucket with `X_k = 0` is empty for genuine moments.

use num_integer::Integer;

use crate::arith::{add_mod, bit_length, inv_mod, mul_mod, residue, sub_mod};
use crate::dense::ntt::{primes, BITS_PER_PRIME};
use crate::error::{Error, Result};
use crate::field::crt::CrtBasis;
use crate::hashing::BucketHash;
use crate::sparsity::{classify, BucketMoments, SparsityVerdict};
use crate::vector::{ExactInt, Index, SparseVec};

/// Moments of one bucket; `Small` when they fit comfortably in `i128`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Moments {
    Small([i128; 3]),
    Big(BucketMoments),
}

impl Moments {
    pub(crate) fn big(&self) -> BucketMoments {
        match self {
            Moments::Small([x, y, z]) => BucketMoments::new(*x, *y, *z),
            Moments::Big(m) => m.clone(),
        }
    }

    /// Same verdict as [`classify`] on [`Moments::big`].
    pub(crate) fn classify(&self, max_index: Index) -> SparsityVerdict {
        match self {
            Moments::Big(m) => classify(m, max_index),
            Moments::Small([x, y, z]) => classify_small(*x, *y, *z, max_index),
        }
    }
}

/// Full 256-bit product as `(high, low)` halves.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const LO: u128 = (1 << 64) - 1;
    let (a1, a0) = (a >> 64, a & LO);
    let (b1, b0) = (b >> 64, b & LO);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & LO) + (p10 & LO);
    let lo = (p00 & LO) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

fn classify_small(x: i128, y: i128, z: i128, max_index: Index) -> SparsityVerdict {
    if x == 0 {
        return SparsityVerdict::Zero;
    }
    if x < 0 || y < 0 || z < 0 {
        return SparsityVerdict::Many;
    }
    let (x, y, z) = (x as u128, y as u128, z as u128);
    if mul_wide(y, y) != mul_wide(x, z) {
        return SparsityVerdict::Many;
    }
    let (q, r) = y.div_rem(&x);
    if r == 0 && q < max_index as u128 {
        SparsityVerdict::One {
            position: q as Index,
            value: ExactInt::from(x),
        }
    } else {
        SparsityVerdict::Many
    }
}

/// Signed Garner lift for at most two moduli whose product is below `2^124`.
struct SmallCrt {
    p0: u64,
    p1: u64,
    inv: u64,
    product: u128,
}

impl SmallCrt {
    fn new(moduli: &[u64]) -> Option<Self> {
        match *moduli {
            [p0] => Some(SmallCrt { p0, p1: 1, inv: 0, product: p0 as u128 }),
            [p0, p1] => Some(SmallCrt { p0, p1, inv: inv_mod(p0 % p1, p1)?, product: p0 as u128 * p1 as u128 }),
            _ => None,
        }
    }

    fn lift(&self, r: &[u64]) -> i128 {
        let v = if self.p1 == 1 {
            r[0] as u128
        } else {
            let d = mul_mod(sub_mod(r[1], r[0] % self.p1, self.p1), self.inv, self.p1);
            r[0] as u128 + self.p0 as u128 * d as u128
        };
        if v > self.product / 2 {
            v as i128 - self.product as i128
        } else {
            v as i128
        }
    }
}

/// Bits of a bound on `n'^2 · ‖A‖₁ · ‖B‖₁`, which dominates every moment.
pub(crate) fn moment_bound_bits(a: &SparseVec, b: &SparseVec, out_len: Index) -> u64 {
    bit_length(&a.l1()) + bit_length(&b.l1()) + 2 * (64 - out_len.leading_zeros() as u64)
}

/// Number of plan primes needed for moments of `bound_bits` bits, signed.
pub(crate) fn prime_count(bound_bits: u64) -> Result<usize> {
    let count = (bound_bits + 2).div_ceil(BITS_PER_PRIME) as usize;
    let available = primes().len();
    if count > available {
        return Err(Error::guard("NTT prime count", count as u64, available as u64));
    }
    Ok(count)
}

/// A vector with `V_i`, `i·V_i`, `i²·V_i` reduced modulo the first plan primes.
pub(crate) struct Prepared {
    index: Vec<Index>,
    // residues[prime][entry]
    residues: Vec<Vec<[u64; 3]>>,
}

impl Prepared {
    pub(crate) fn new(v: &SparseVec, count: usize) -> Self {
        let index = v.iter().map(|(i, _)| i).collect();
        let residues = primes()[..count]
            .iter()
            .map(|q| {
                let p = q.p;
                v.iter()
                    .map(|(i, x)| {
                        let x0 = residue(x, p);
                        let ir = i % p;
                        let x1 = mul_mod(x0, ir, p);
                        [x0, x1, mul_mod(x1, ir, p)]
                    })
                    .collect()
            })
            .collect();
        Prepared { index, residues }
    }

    fn fill(&self, prime: usize, p: u64, buckets: &[usize], len: usize, out: &mut [Vec<u64>; 3]) {
        for o in out.iter_mut() {
            o.clear();
            o.resize(len, 0);
        }
        for (&k, r) in buckets.iter().zip(&self.residues[prime]) {
            for d in 0..3 {
                out[d][k] = add_mod(out[d][k], r[d], p);
            }
        }
    }
}

/// Exact `(X_k, Y_k, Z_k)` for every bucket with `X_k ≠ 0`, where
/// `X = h(A) ⋆_m h(B) - h(C)` and `Y`, `Z` are the derivative analogues.
///
/// `bound_bits` must bound the magnitude of every moment.
/// `a` and `b` must be prepared for at least `prime_count(bound_bits)` primes.
pub(crate) fn hashed_bucket_moments<H: BucketHash>(
    h: &H,
    a: &Prepared,
    b: &Prepared,
    c: Option<&SparseVec>,
    bound_bits: u64,
) -> Result<Vec<(usize, Moments)>> {
    let m = h.buckets() as usize;
    let count = prime_count(bound_bits)?;
    let all = primes();
    let bucket_a: Vec<usize> = a.index.iter().map(|&i| h.eval(i) as usize).collect();
    let bucket_b: Vec<usize> = b.index.iter().map(|&i| h.eval(i) as usize).collect();
    let c = c.map(|c| (c.iter().map(|(i, _)| h.eval(i) as usize).collect::<Vec<_>>(), Prepared::new(c, count)));
    let native = m.is_power_of_two();
    let len = if native { m } else { (2 * m - 1).next_power_of_two() };

    // residues[d][prime][k]
    let mut residues: [Vec<Vec<u64>>; 3] = Default::default();
    let mut fa: [Vec<u64>; 3] = Default::default();
    let mut fb: [Vec<u64>; 3] = Default::default();
    let mut fc: [Vec<u64>; 3] = Default::default();
    for (qi, q) in all[..count].iter().enumerate() {
        a.fill(qi, q.p, &bucket_a, len, &mut fa);
        b.fill(qi, q.p, &bucket_b, len, &mut fb);
        for v in fa.iter_mut().chain(fb.iter_mut()) {
            q.forward(v);
        }
        let mut x = vec![0u64; len];
        let mut y = vec![0u64; len];
        let mut z = vec![0u64; len];
        for k in 0..len {
            let (a0, a1, a2) = (fa[0][k], fa[1][k], fa[2][k]);
            let (b0, b1, b2) = (fb[0][k], fb[1][k], fb[2][k]);
            x[k] = q.mont_mul(a0, b0);
            y[k] = q.add(q.mont_mul(a1, b0), q.mont_mul(a0, b1));
            let mid = q.mont_mul(a1, b1);
            z[k] = q.add(q.add(q.mont_mul(a2, b0), q.mont_mul(a0, b2)), q.add(mid, mid));
        }
        let scale = q.product_scale(len);
        if let Some((bucket_c, c)) = &c {
            c.fill(qi, q.p, bucket_c, m, &mut fc);
        }
        for (d, mut v) in [x, y, z].into_iter().enumerate() {
            q.inverse_unscaled(&mut v);
            for e in v.iter_mut() {
                *e = q.mont_mul(*e, scale);
            }
            if !native {
                for k in m..len {
                    v[k % m] = q.add(v[k % m], v[k]);
                }
                v.truncate(m);
            }
            if c.is_some() {
                for (e, &s) in v.iter_mut().zip(&fc[d]) {
                    *e = sub_mod(*e, s, q.p);
                }
            }
            residues[d].push(v);
        }
    }

    let moduli: Vec<u64> = all[..count].iter().map(|q| q.p).collect();
    let mut scratch = vec![0u64; count];
    let gather = |d: usize, k: usize, scratch: &mut Vec<u64>| {
        for (s, r) in scratch.iter_mut().zip(&residues[d]) {
            *s = r[k];
        }
    };
    let nonzero = (0..m).filter(|&k| residues[0].iter().any(|r| r[k] != 0));
    let mut out = Vec::new();
    if let Some(small) = SmallCrt::new(&moduli) {
        for k in nonzero {
            let mut v = [0i128; 3];
            for (d, slot) in v.iter_mut().enumerate() {
                gather(d, k, &mut scratch);
                *slot = small.lift(&scratch);
            }
            out.push((k, Moments::Small(v)));
        }
    } else {
        let basis = CrtBasis::new(&moduli)?;
        for k in nonzero {
            let mut v: [ExactInt; 3] = Default::default();
            for (d, slot) in v.iter_mut().enumerate() {
                gather(d, k, &mut scratch);
                *slot = basis.reconstruct_signed(&scratch);
            }
            let [x, y, z] = v;
            out.push((k, Moments::Big(BucketMoments { x, y, z })));
        }
    }
    Ok(out)
}

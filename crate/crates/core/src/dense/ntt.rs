//! Number-theoretic transforms over word-sized primes `p = c·2^32 + 1`.
//!
//! Butterflies use Shoup multiplication with lazily reduced values in
//! `[0, 4p)`; pointwise products are Montgomery-form (`R = 2^64`). Forward
//! transforms are decimation-in-frequency (natural order in, bit-reversed
//! out); inverse transforms consume bit-reversed input, so no permutation
//! pass is needed between them.

use std::sync::{OnceLock, RwLock};

use crate::arith::{factor_u64, inv_mod, is_prime_u64, mul_mod, pow_mod};

/// Every plan prime supports transforms up to this length.
pub(crate) const MAX_LOG_LEN: u32 = 32;

const PRIME_COUNT: usize = 48;

/// Blocks up to this many words are transformed level by level.
const CACHE_BLOCK: usize = 1 << 12;

#[derive(Debug)]
pub(crate) struct NttPrime {
    pub(crate) p: u64,
    /// `p^-1 mod 2^64`
    pinv: u64,
    /// `R^2 mod p`
    r2: u64,
    /// primitive `2^MAX_LOG_LEN`-th root of unity, plain form
    root: u64,
    /// `table[len + j]` is `w_{2len}^j` with its Shoup quotient `⌊w·2^64/p⌋`
    table: RwLock<Vec<[u64; 2]>>,
    /// Same layout for `w_{2len}^-j`
    inv_table: RwLock<Vec<[u64; 2]>>,
}

impl NttPrime {
    fn new(p: u64) -> Self {
        let c = (p - 1) >> MAX_LOG_LEN;
        let mut factors: Vec<u64> = factor_u64(c).into_iter().map(|(q, _)| q).collect();
        if !factors.contains(&2) {
            factors.push(2);
        }
        let g = (2u64..)
            .find(|&g| factors.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
            .expect("prime field has a generator");
        let root = pow_mod(g, c, p);
        let mut pinv: u64 = 1;
        for _ in 0..6 {
            pinv = pinv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(pinv)));
        }
        let r = ((1u128 << 64) % p as u128) as u64;
        let r2 = mul_mod(r, r, p);
        NttPrime {
            p,
            pinv,
            r2,
            root,
            table: RwLock::new(vec![[0, 0]]),
            inv_table: RwLock::new(vec![[0, 0]]),
        }
    }

    #[inline(always)]
    pub(crate) fn redc(&self, x: u128) -> u64 {
        let m = (x as u64).wrapping_mul(self.pinv);
        let y = ((m as u128 * self.p as u128) >> 64) as u64;
        let (out, borrow) = ((x >> 64) as u64).overflowing_sub(y);
        if borrow {
            out.wrapping_add(self.p)
        } else {
            out
        }
    }

    /// `a·b·R^-1 mod p`
    #[inline(always)]
    pub(crate) fn mont_mul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }

    #[inline(always)]
    pub(crate) fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    fn ensure_table(&self, n: usize) {
        self.extend(&self.table, n, self.root);
        let root_inv = inv_mod(self.root, self.p).expect("root is a unit");
        self.extend(&self.inv_table, n, root_inv);
    }

    fn extend(&self, lock: &RwLock<Vec<[u64; 2]>>, n: usize, root: u64) {
        if lock.read().unwrap().len() >= n {
            return;
        }
        let mut table = lock.write().unwrap();
        let mut len = table.len();
        while table.len() < n {
            // extend with level `len`: roots of order 2*len
            let w = pow_mod(root, (1u64 << MAX_LOG_LEN) / (2 * len as u64), self.p);
            let mut cur = 1u64;
            for _ in 0..len {
                let shoup = (((cur as u128) << 64) / self.p as u128) as u64;
                table.push([cur, shoup]);
                cur = mul_mod(cur, w, self.p);
            }
            len *= 2;
        }
    }

    /// `x·w mod p`, up to one extra `p`, for any 64-bit `x`.
    #[inline(always)]
    fn shoup_mul(&self, x: u64, [w, ws]: [u64; 2]) -> u64 {
        let q = ((x as u128 * ws as u128) >> 64) as u64;
        w.wrapping_mul(x).wrapping_sub(q.wrapping_mul(self.p))
    }

    /// Brings `x < 4p` into `[0, 2p)`.
    #[inline(always)]
    fn reduce_2p(&self, x: u64) -> u64 {
        let two_p = 2 * self.p;
        if x >= two_p {
            x - two_p
        } else {
            x
        }
    }

    /// Brings `x < 4p` into `[0, p)`.
    #[inline(always)]
    fn reduce_full(&self, x: u64) -> u64 {
        let x = self.reduce_2p(x);
        if x >= self.p {
            x - self.p
        } else {
            x
        }
    }

    /// In-place forward transform of values in `[0, p)`; `a.len()` must be a
    /// power of two.
    pub(crate) fn forward(&self, a: &mut [u64]) {
        let n = a.len();
        debug_assert!(n.is_power_of_two());
        if n <= 1 {
            return;
        }
        self.ensure_table(n);
        let table = self.table.read().unwrap();
        self.forward_levels(a, &table);
        for x in a.iter_mut() {
            *x = self.reduce_full(*x);
        }
    }

    /// Top level first, then each half depth-first so small blocks stay in
    /// cache. Values stay in `[0, 2p)`.
    fn forward_levels(&self, a: &mut [u64], table: &[[u64; 2]]) {
        let n = a.len();
        let two_p = 2 * self.p;
        let mut len = n >> 1;
        let stop = if n > CACHE_BLOCK { n >> 2 } else { 0 };
        while len > stop {
            let tw = &table[len..2 * len];
            for chunk in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = chunk.split_at_mut(len);
                for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let u = *x;
                    let v = *y;
                    *x = self.reduce_2p(u + v);
                    *y = self.shoup_mul(u + two_p - v, w);
                }
            }
            len >>= 1;
        }
        if stop > 0 {
            let (lo, hi) = a.split_at_mut(n >> 1);
            self.forward_levels(lo, table);
            self.forward_levels(hi, table);
        }
    }

    /// In-place inverse transform without the `1/n` scaling.
    pub(crate) fn inverse_unscaled(&self, a: &mut [u64]) {
        let n = a.len();
        debug_assert!(n.is_power_of_two());
        if n <= 1 {
            return;
        }
        self.ensure_table(n);
        let table = self.inv_table.read().unwrap();
        self.inverse_levels(a, &table);
        for x in a.iter_mut() {
            *x = self.reduce_full(*x);
        }
    }

    /// Mirror of `forward_levels` with inverse roots; values stay in `[0, 4p)`.
    fn inverse_levels(&self, a: &mut [u64], table: &[[u64; 2]]) {
        let n = a.len();
        let two_p = 2 * self.p;
        let mut len = 1;
        if n > CACHE_BLOCK {
            let (lo, hi) = a.split_at_mut(n >> 1);
            self.inverse_levels(lo, table);
            self.inverse_levels(hi, table);
            len = n >> 1;
        }
        while len < n {
            let tw = &table[len..2 * len];
            for chunk in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = chunk.split_at_mut(len);
                for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = self.shoup_mul(*y, w);
                    let u = self.reduce_2p(*x);
                    *x = u + t;
                    *y = u + two_p - t;
                }
            }
            len <<= 1;
        }
    }

    /// Factor that turns `inverse_unscaled(pointwise mont products)` into
    /// plain values: multiply by `n^-1·R^2` in Montgomery form.
    pub(crate) fn product_scale(&self, n: usize) -> u64 {
        let ninv = inv_mod(n as u64 % self.p, self.p).expect("n invertible mod p");
        mul_mod(ninv, self.r2, self.p)
    }
}

fn generate_primes() -> Vec<NttPrime> {
    let mut out = Vec::with_capacity(PRIME_COUNT);
    let mut c: u64 = (1u64 << (62 - MAX_LOG_LEN)) - 1;
    while out.len() < PRIME_COUNT {
        let p = (c << MAX_LOG_LEN) + 1;
        if is_prime_u64(p) {
            out.push(NttPrime::new(p));
        }
        c -= 1;
    }
    out
}

pub(crate) fn primes() -> &'static [NttPrime] {
    static PRIMES: OnceLock<Vec<NttPrime>> = OnceLock::new();
    PRIMES.get_or_init(generate_primes)
}

/// Bits guaranteed by each plan prime (`p > 2^61`).
pub(crate) const BITS_PER_PRIME: u64 = 61;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_are_ntt_friendly() {
        let ps = primes();
        assert_eq!(ps.len(), PRIME_COUNT);
        for q in ps {
            assert!(is_prime_u64(q.p));
            assert!(q.p < 1 << 62 && q.p > 1 << 61);
            assert_eq!((q.p - 1) % (1 << MAX_LOG_LEN), 0);
            assert_eq!(pow_mod(q.root, 1 << (MAX_LOG_LEN - 1), q.p), q.p - 1);
            assert_eq!(q.p.wrapping_mul(q.pinv), 1);
        }
    }

    #[test]
    fn transform_round_trip_and_convolution() {
        let q = &primes()[0];
        for log in 0..10 {
            let n = 1usize << log;
            let a: Vec<u64> = (0..n as u64).map(|i| (i * 7919 + 3) % q.p).collect();
            let b: Vec<u64> = (0..n as u64).map(|i| (i * i + 11) % q.p).collect();
            // cyclic product by definition
            let mut expect = vec![0u64; n];
            for i in 0..n {
                for j in 0..n {
                    let k = (i + j) % n;
                    expect[k] = (expect[k] + mul_mod(a[i], b[j], q.p)) % q.p;
                }
            }
            let (mut fa, mut fb) = (a.clone(), b.clone());
            q.forward(&mut fa);
            q.forward(&mut fb);
            let mut c: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| q.mont_mul(x, y)).collect();
            q.inverse_unscaled(&mut c);
            let s = q.product_scale(n);
            let c: Vec<u64> = c.into_iter().map(|x| q.mont_mul(x, s)).collect();
            assert_eq!(c, expect, "n = {n}");
        }
    }
}

//! Prime fields, the extension `F_p[X]/(X^{p-1} - β)`, and Chinese remaindering.
//!
//! Extension elements are coefficient vectors of length `d = p - 1`. With
//! `β` primitive the modulus is irreducible, and `ω = X + 1` has order at
//! least `2^p` once `p ≥ 7`; the deterministic engine relies on both facts.

pub mod crt;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use crate::arith::{factor_u64, inv_mod, is_prime_u64, pow_mod};
use crate::error::{Error, Result};

pub use crt::{crt_reconstruct, CrtBasis};

/// Largest base prime accepted for extension fields; keeps every
/// coefficient product sum inside a `u64` without intermediate reduction.
pub const MAX_EXT_PRIME: u64 = 1 << 12;

/// `Z/pZ` for a word-sized prime `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeFieldCtx {
    p: u64,
}

impl PrimeFieldCtx {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime_u64(p) {
            return Err(Error::Contract(format!("{p} is not prime")));
        }
        Ok(PrimeFieldCtx { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        crate::arith::add_mod(a, b, self.p)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        crate::arith::sub_mod(a, b, self.p)
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        crate::arith::mul_mod(a, b, self.p)
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        pow_mod(a, e, self.p)
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        inv_mod(a % self.p, self.p).ok_or_else(|| Error::Domain("inverse of zero".into()))
    }
}

/// Smallest `β ≥ 2` of multiplicative order exactly `p - 1`.
pub fn find_primitive(p: u64) -> Result<u64> {
    if p < 3 || !is_prime_u64(p) {
        return Err(Error::Contract(format!("primitive element needs an odd prime, got {p}")));
    }
    let factors: Vec<u64> = factor_u64(p - 1).into_iter().map(|(q, _)| q).collect();
    (2..p)
        .find(|&g| factors.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
        .ok_or_else(|| Error::Invariant(format!("no primitive element mod {p}")))
}

/// Element of an extension field: `d` coefficients in `[0, p)`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtElem(Vec<u32>);

impl ExtElem {
    /// Wraps already reduced coefficients.
    pub(crate) fn from_raw(coeffs: Vec<u32>) -> Self {
        ExtElem(coeffs)
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// The constant term when the element lies in the prime field.
    pub fn as_constant(&self) -> Option<u64> {
        if self.0[1..].iter().all(|&c| c == 0) {
            Some(self.0[0] as u64)
        } else {
            None
        }
    }
}

const WINDOW_BITS: u32 = 8;
const WINDOWS: usize = 64 / WINDOW_BITS as usize;

/// `F_p[X]/(X^{p-1} - β)` with `β` the smallest primitive element mod `p`.
#[derive(Debug)]
pub struct ExtFieldCtx {
    p: u64,
    beta: u64,
    d: usize,
    // omega_table[w][b] = ω^(b · 2^(8w))
    omega_table: OnceLock<Vec<Vec<ExtElem>>>,
}

impl ExtFieldCtx {
    /// Builds the field for an odd prime `p ≤ MAX_EXT_PRIME`.
    pub fn new(p: u64) -> Result<Self> {
        if p > MAX_EXT_PRIME {
            return Err(Error::guard("extension prime", p, MAX_EXT_PRIME));
        }
        let beta = find_primitive(p)?;
        Ok(ExtFieldCtx {
            p,
            beta,
            d: (p - 1) as usize,
            omega_table: OnceLock::new(),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn beta(&self) -> u64 {
        self.beta
    }

    /// Extension degree `p - 1`.
    pub fn degree(&self) -> usize {
        self.d
    }

    /// Field size `p^(p-1)`.
    pub fn order(&self) -> BigUint {
        num_traits::pow(BigUint::from(self.p), self.d)
    }

    pub fn zero(&self) -> ExtElem {
        ExtElem(vec![0; self.d])
    }

    pub fn one(&self) -> ExtElem {
        self.constant(1)
    }

    pub fn constant(&self, v: u64) -> ExtElem {
        let mut c = vec![0; self.d];
        c[0] = (v % self.p) as u32;
        ExtElem(c)
    }

    /// The generator `X` (equal to the constant `β` when `d = 1`).
    pub fn x(&self) -> ExtElem {
        self.from_coeffs(&[0, 1])
    }

    /// `ω = X + 1`.
    pub fn omega(&self) -> ExtElem {
        self.from_coeffs(&[1, 1])
    }

    /// Element from an arbitrary-length coefficient list, reduced by `X^d = β`.
    pub fn from_coeffs(&self, coeffs: &[u64]) -> ExtElem {
        let mut out = vec![0u64; self.d];
        let mut scale = 1u64;
        for chunk in coeffs.chunks(self.d) {
            for (o, &c) in out.iter_mut().zip(chunk) {
                *o = (*o + (c % self.p) * scale) % self.p;
            }
            scale = scale * self.beta % self.p;
        }
        ExtElem(out.into_iter().map(|c| c as u32).collect())
    }

    /// Reduces a product-length accumulator (`2d - 1` entries, any `u64`).
    pub(crate) fn reduce_wide(&self, acc: &[u64]) -> ExtElem {
        let d = self.d;
        let p = self.p;
        let mut out = Vec::with_capacity(d);
        for k in 0..d {
            let lo = acc.get(k).map_or(0, |&v| v % p);
            let hi = acc.get(k + d).map_or(0, |&v| v % p);
            out.push(((lo + self.beta * hi) % p) as u32);
        }
        ExtElem(out)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> ExtElem {
        ExtElem((0..self.d).map(|_| rng.gen_range(0..self.p) as u32).collect())
    }

    pub fn add(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        let p = self.p as u32;
        ExtElem(
            a.0.iter()
                .zip(&b.0)
                .map(|(&x, &y)| {
                    let s = x + y;
                    if s >= p {
                        s - p
                    } else {
                        s
                    }
                })
                .collect(),
        )
    }

    pub fn sub(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        let p = self.p as u32;
        ExtElem(
            a.0.iter()
                .zip(&b.0)
                .map(|(&x, &y)| if x >= y { x - y } else { x + p - y })
                .collect(),
        )
    }

    pub fn neg(&self, a: &ExtElem) -> ExtElem {
        self.sub(&self.zero(), a)
    }

    /// `a · c` for a prime-field scalar `c`.
    pub fn scale(&self, a: &ExtElem, c: u64) -> ExtElem {
        let c = c % self.p;
        ExtElem(a.0.iter().map(|&x| (x as u64 * c % self.p) as u32).collect())
    }

    pub fn mul(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        let d = self.d;
        let mut acc = vec![0u64; 2 * d - 1];
        for (i, &x) in a.0.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let x = x as u64;
            for (slot, &y) in acc[i..i + d].iter_mut().zip(&b.0) {
                *slot += x * y as u64;
            }
        }
        self.reduce_wide(&acc)
    }

    pub fn square(&self, a: &ExtElem) -> ExtElem {
        self.mul(a, a)
    }

    /// Multiplicative inverse by the extended Euclidean algorithm against the modulus.
    pub fn inv(&self, a: &ExtElem) -> Result<ExtElem> {
        if a.is_zero() {
            return Err(Error::Domain("inverse of zero in extension field".into()));
        }
        let p = self.p;
        let mut modulus = vec![0u64; self.d + 1];
        modulus[0] = (p - self.beta) % p;
        modulus[self.d] = 1;
        let a_poly: Vec<u64> = a.0.iter().map(|&c| c as u64).collect();
        // invariant: s_i · a ≡ r_i (mod modulus)
        let (mut r0, mut r1) = (modulus, poly_trim(a_poly));
        let (mut s0, mut s1) = (vec![], vec![1u64]);
        while r1.len() > 1 {
            let (q, r) = poly_divrem(&r0, &r1, p);
            let s2 = poly_sub(&s0, &poly_mul(&q, &s1, p), p);
            (r0, r1) = (r1, r);
            (s0, s1) = (s1, s2);
        }
        if r1.is_empty() {
            return Err(Error::Invariant("extension modulus is reducible".into()));
        }
        let c = inv_mod(r1[0], p).expect("nonzero constant");
        let inv: Vec<u64> = s1.iter().map(|&v| v * c % p).collect();
        Ok(self.from_coeffs(&inv))
    }

    pub fn pow(&self, a: &ExtElem, e: &BigUint) -> ExtElem {
        let mut acc = self.one();
        for i in (0..e.bits()).rev() {
            acc = self.square(&acc);
            if e.bit(i) {
                acc = self.mul(&acc, a);
            }
        }
        acc
    }

    pub fn pow_u64(&self, a: &ExtElem, e: u64) -> ExtElem {
        self.pow(a, &BigUint::from(e))
    }

    /// `ω^e` from a table of windowed powers, at most eight multiplications.
    pub fn omega_pow(&self, e: u64) -> ExtElem {
        let table = self.omega_table.get_or_init(|| {
            let mut base = self.omega();
            let mut table = Vec::with_capacity(WINDOWS);
            for _ in 0..WINDOWS {
                let mut row = Vec::with_capacity(1 << WINDOW_BITS);
                let mut cur = self.one();
                for _ in 0..1 << WINDOW_BITS {
                    row.push(cur.clone());
                    cur = self.mul(&cur, &base);
                }
                base = cur;
                table.push(row);
            }
            table
        });
        let mut acc: Option<ExtElem> = None;
        for (w, row) in table.iter().enumerate() {
            let digit = ((e >> (w as u32 * WINDOW_BITS)) & ((1 << WINDOW_BITS) - 1)) as usize;
            if digit != 0 {
                acc = Some(match acc {
                    None => row[digit].clone(),
                    Some(x) => self.mul(&x, &row[digit]),
                });
            }
        }
        acc.unwrap_or_else(|| self.one())
    }
}

/// Shared, lazily built extension contexts keyed by `p`.
pub fn build_extension(p: u64) -> Result<Arc<ExtFieldCtx>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ExtFieldCtx>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(ctx) = cache.lock().unwrap().get(&p) {
        return Ok(Arc::clone(ctx));
    }
    let ctx = Arc::new(ExtFieldCtx::new(p)?);
    Ok(Arc::clone(cache.lock().unwrap().entry(p).or_insert(ctx)))
}

/// Result of [`multiplicative_order`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Order {
    Exact(BigUint),
    /// The order exceeds the stated bound.
    AtLeast(BigUint),
}

/// Trial-division budget when factoring `q - 1`.
const ORDER_FACTOR_BUDGET: u64 = 1 << 22;

/// Multiplicative order of a nonzero element.
///
/// Exact when `q - 1` factors completely by trial division within budget;
/// otherwise the element is powered up to `cap` and the result is either the
/// exact order found or a lower bound `cap + 1`.
pub fn multiplicative_order(ctx: &ExtFieldCtx, x: &ExtElem, cap: &BigUint) -> Result<Order> {
    if x.is_zero() {
        return Err(Error::Domain("order of zero".into()));
    }
    let group = ctx.order() - 1u32;
    if let Some(factors) = factor_biguint(&group, ORDER_FACTOR_BUDGET) {
        let mut ord = group;
        for f in factors {
            while ord.is_multiple_of(&f) && ctx.pow(x, &(&ord / &f)) == ctx.one() {
                ord /= &f;
            }
        }
        return Ok(Order::Exact(ord));
    }
    let one = ctx.one();
    let mut cur = x.clone();
    let mut i = BigUint::one();
    while &i <= cap {
        if cur == one {
            return Ok(Order::Exact(i));
        }
        cur = ctx.mul(&cur, x);
        i += 1u32;
    }
    Ok(Order::AtLeast(cap + 1u32))
}

/// Distinct prime factors of `n`, if trial division up to `budget` completes it.
fn factor_biguint(n: &BigUint, budget: u64) -> Option<Vec<BigUint>> {
    let mut n = n.clone();
    let mut out = Vec::new();
    let mut d = 2u64;
    while d <= budget {
        let bd = BigUint::from(d);
        if (&bd * &bd) > n {
            break;
        }
        if n.is_multiple_of(&bd) {
            while n.is_multiple_of(&bd) {
                n /= &bd;
            }
            out.push(bd);
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n.is_one() {
        return Some(out);
    }
    let bd = BigUint::from(d);
    if &bd * &bd > n || n.to_u64().is_some_and(is_prime_u64) {
        out.push(n);
        return Some(out);
    }
    None
}

/// True when the monic-or-not polynomial `f` over `F_p` (lowest degree first)
/// has no monic factor of degree `1..=deg(f)/2`, checked by trial division
/// over every candidate. Exponential in the degree; test support only.
pub fn irreducible_by_trial(f: &[u64], p: u64) -> bool {
    let f = poly_trim(f.iter().map(|&c| c % p).collect());
    if f.len() <= 2 {
        return f.len() == 2;
    }
    let deg = f.len() - 1;
    for k in 1..=deg / 2 {
        let mut low = vec![0u64; k];
        loop {
            let mut g = low.clone();
            g.push(1);
            let (_, r) = poly_divrem(&f, &g, p);
            if r.is_empty() {
                return false;
            }
            // next coefficient tuple in base p
            let mut i = 0;
            while i < k {
                low[i] += 1;
                if low[i] < p {
                    break;
                }
                low[i] = 0;
                i += 1;
            }
            if i == k {
                break;
            }
        }
    }
    true
}

fn poly_trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    poly_trim(out)
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    poly_trim(out)
}

/// Quotient and remainder over `F_p`; `b` must be nonzero and trimmed.
fn poly_divrem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let mut r = poly_trim(a.to_vec());
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let lead_inv = inv_mod(*b.last().unwrap(), p).expect("nonzero leading coefficient");
    let mut q = vec![0u64; r.len() - b.len() + 1];
    while r.len() >= b.len() {
        let shift = r.len() - b.len();
        let c = r.last().unwrap() * lead_inv % p;
        q[shift] = c;
        for (i, &y) in b.iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - c * y % p) % p;
        }
        r = poly_trim(r);
    }
    (poly_trim(q), r)
}

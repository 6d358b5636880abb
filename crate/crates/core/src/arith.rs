//! Word-sized modular arithmetic and primality helpers.

use num_bigint::{BigInt, Sign};

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a as u128 + b as u128;
    if s >= m as u128 {
        (s - m as u128) as u64
    } else {
        s as u64
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        (a as u128 + m as u128 - b as u128) as u64
    }
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub(crate) fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization by trial division, ascending primes with multiplicity.
pub(crate) fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Residue of a signed big integer modulo a word-sized modulus, in `[0, m)`.
pub(crate) fn residue(v: &BigInt, m: u64) -> u64 {
    let (sign, digits) = (v.sign(), v.magnitude().iter_u64_digits());
    let r = residue_digits(digits, m);
    if sign == Sign::Minus && r != 0 {
        m - r
    } else {
        r
    }
}

fn residue_digits<I: DoubleEndedIterator<Item = u64>>(digits: I, m: u64) -> u64 {
    let mut r: u128 = 0;
    for d in digits.rev() {
        r = ((r << 64) | d as u128) % m as u128;
    }
    r as u64
}

/// Number of bits of `|v|`; zero for zero.
pub(crate) fn bit_length(v: &BigInt) -> u64 {
    v.bits()
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub(crate) fn ceil_log2(x: u128) -> u32 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_agrees_with_trial_division() {
        for n in 0u64..5000 {
            let trial = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime_u64(n), trial, "n = {n}");
        }
        assert!(is_prime_u64(4_611_686_018_427_387_847)); // 2^62 - 57
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to 2,3,5,7
    }

    #[test]
    fn inverse_and_power() {
        for m in [7u64, 97, 1_000_000_007] {
            for a in (1..50).filter(|a| a % m != 0) {
                let inv = inv_mod(a, m).unwrap();
                assert_eq!(mul_mod(a, inv, m), 1);
            }
        }
        assert_eq!(inv_mod(4, 8), None);
        assert_eq!(pow_mod(3, 4, 7), 4);
    }

    #[test]
    fn factorization() {
        assert_eq!(factor_u64(117_648), vec![(2, 4), (3, 2), (19, 1), (43, 1)]);
        assert_eq!(factor_u64(1), vec![]);
        assert_eq!(factor_u64(97), vec![(97, 1)]);
    }

    #[test]
    fn residues_of_big_values() {
        let v = BigInt::from(1u128 << 100) * 3u32 + 5u32;
        let m = 1_000_003u64;
        let r: BigInt = &v % BigInt::from(m);
        let expect = r.to_u64_digits().1;
        assert_eq!(residue(&v, m), expect.first().copied().unwrap_or(0));
        assert_eq!(residue(&BigInt::from(-1), 7), 6);
        assert_eq!(residue(&BigInt::from(-14), 7), 0);
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }
}

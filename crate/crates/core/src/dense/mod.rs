//! Exact linear and cyclic convolution of dense integer vectors.
//!
//! Inputs are reduced modulo as many NTT primes as the worst-case output
//! magnitude requires, transformed per prime and recombined by CRT into the
//! symmetric range. Short outputs go through the schoolbook loop instead.

pub(crate) mod ntt;

use num_traits::{Signed, Zero};

use crate::arith::{bit_length, residue};
use crate::error::{Error, Result};
use crate::field::crt::CrtBasis;
use crate::vector::{DenseVec, ExactInt};

use ntt::{primes, BITS_PER_PRIME, MAX_LOG_LEN};

/// Outputs shorter than this use the schoolbook loop.
pub const SCHOOLBOOK_CUTOVER: usize = 64;

/// Default bound on `|A|·|B|` accepted by [`conv_schoolbook`].
pub const SCHOOLBOOK_GUARD: u128 = 1 << 28;

/// The primes and transform length chosen for one exact convolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttPlan {
    pub primes: Vec<u64>,
    pub transform_len: usize,
}

impl NttPlan {
    /// Smallest plan whose prime product exceeds `2^(bound_bits + 1)`, so any
    /// value of magnitude below `2^bound_bits` is recovered exactly.
    pub fn for_bound(bound_bits: u64, transform_len: usize) -> Result<Self> {
        if !transform_len.is_power_of_two() || transform_len.trailing_zeros() > MAX_LOG_LEN {
            return Err(Error::guard("NTT length", transform_len as u64, 1u64 << MAX_LOG_LEN));
        }
        let count = ((bound_bits + 2).div_ceil(BITS_PER_PRIME)).max(1) as usize;
        let all = primes();
        if count > all.len() {
            return Err(Error::guard("NTT prime count", count as u64, all.len() as u64));
        }
        Ok(NttPlan {
            primes: all[..count].iter().map(|q| q.p).collect(),
            transform_len,
        })
    }
}

/// One summand `coeff · (inputs[a] ⋆ inputs[b])` of a bilinear output.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub a: usize,
    pub b: usize,
    pub coeff: u32,
}

pub(crate) const fn term(a: usize, b: usize, coeff: u32) -> Term {
    Term { a, b, coeff }
}

/// Magnitude summary of one input, used to size the prime plan.
struct Magnitude {
    l1_bits: u64,
    max_bits: u64,
}

impl Magnitude {
    fn of(v: &[ExactInt]) -> Self {
        let mut l1 = ExactInt::zero();
        let mut max_bits = 0;
        for x in v {
            if !x.is_zero() {
                max_bits = max_bits.max(bit_length(x));
                l1 += x.abs();
            }
        }
        Magnitude {
            l1_bits: bit_length(&l1),
            max_bits,
        }
    }
}

/// Computes `out[o] = Σ_t coeff_t · (inputs[a_t] ⋆ inputs[b_t])` exactly for
/// every output `o`, as linear convolutions or cyclic ones of length `cyclic`.
pub(crate) fn exact_bilinear(
    inputs: &[&[ExactInt]],
    outputs: &[&[Term]],
    cyclic: Option<usize>,
) -> Result<Vec<Vec<ExactInt>>> {
    let lin_len = outputs
        .iter()
        .flat_map(|ts| ts.iter())
        .map(|t| {
            let (la, lb) = (inputs[t.a].len(), inputs[t.b].len());
            if la == 0 || lb == 0 {
                0
            } else {
                la + lb - 1
            }
        })
        .max()
        .unwrap_or(0);
    let out_len = cyclic.unwrap_or(lin_len);
    if out_len == 0 {
        return Ok(outputs.iter().map(|_| Vec::new()).collect());
    }
    if lin_len == 0 {
        return Ok(outputs.iter().map(|_| vec![ExactInt::zero(); out_len]).collect());
    }
    if lin_len < SCHOOLBOOK_CUTOVER {
        return Ok(outputs
            .iter()
            .map(|ts| schoolbook_bilinear(inputs, ts, out_len, cyclic.is_some()))
            .collect());
    }

    // worst-case magnitude per output
    let mags: Vec<Magnitude> = inputs.iter().map(|v| Magnitude::of(v)).collect();
    let mut bound_bits = 0u64;
    for ts in outputs {
        let mut worst = 0u64;
        for t in ts.iter() {
            let (ma, mb) = (&mags[t.a], &mags[t.b]);
            let tight = match cyclic {
                Some(m) => inputs[t.a].len() <= m && inputs[t.b].len() <= m,
                None => true,
            };
            let bits = if tight {
                (ma.l1_bits + mb.max_bits).min(ma.max_bits + mb.l1_bits)
            } else {
                ma.l1_bits + mb.l1_bits
            };
            worst = worst.max(bits + 32 - t.coeff.leading_zeros() as u64);
        }
        let terms = ts.len().max(1) as u128;
        bound_bits = bound_bits.max(worst + crate::arith::ceil_log2(terms) as u64);
    }

    // a power-of-two cyclic length with short inputs wraps natively
    let native_cyclic = matches!(cyclic, Some(m) if m.is_power_of_two()
        && inputs.iter().all(|v| v.len() <= m));
    let transform_len = if native_cyclic {
        out_len
    } else {
        lin_len.next_power_of_two()
    };
    let plan = NttPlan::for_bound(bound_bits, transform_len)?;
    let all = primes();

    let used: Vec<bool> = (0..inputs.len())
        .map(|i| outputs.iter().any(|ts| ts.iter().any(|t| t.a == i || t.b == i)))
        .collect();

    // residues[o][prime][k]
    let mut residues: Vec<Vec<Vec<u64>>> = vec![Vec::with_capacity(plan.primes.len()); outputs.len()];
    for q in &all[..plan.primes.len()] {
        let spectra: Vec<Option<Vec<u64>>> = inputs
            .iter()
            .zip(&used)
            .map(|(v, &u)| {
                u.then(|| {
                    let mut buf = vec![0u64; transform_len];
                    for (slot, x) in buf.iter_mut().zip(v.iter()) {
                        if !x.is_zero() {
                            *slot = residue(x, q.p);
                        }
                    }
                    q.forward(&mut buf);
                    buf
                })
            })
            .collect();
        let scale = q.product_scale(transform_len);
        for (o, ts) in outputs.iter().enumerate() {
            let mut acc = vec![0u64; transform_len];
            for t in ts.iter() {
                let (fa, fb) = (spectra[t.a].as_ref().unwrap(), spectra[t.b].as_ref().unwrap());
                for ((slot, &x), &y) in acc.iter_mut().zip(fa).zip(fb) {
                    let mut prod = q.mont_mul(x, y);
                    for _ in 1..t.coeff {
                        prod = q.add(prod, q.mont_mul(x, y));
                    }
                    *slot = q.add(*slot, prod);
                }
            }
            q.inverse_unscaled(&mut acc);
            for x in acc.iter_mut() {
                *x = q.mont_mul(*x, scale);
            }
            if !native_cyclic {
                if let Some(m) = cyclic {
                    for k in m..lin_len {
                        acc[k % m] = q.add(acc[k % m], acc[k]);
                    }
                }
            }
            acc.resize(out_len, 0);
            residues[o].push(acc);
        }
    }

    let basis = CrtBasis::new(&plan.primes)?;
    let mut scratch = vec![0u64; plan.primes.len()];
    Ok(residues
        .into_iter()
        .map(|per_prime| {
            (0..out_len)
                .map(|k| {
                    let mut nonzero = false;
                    for (s, r) in scratch.iter_mut().zip(&per_prime) {
                        *s = r[k];
                        nonzero |= r[k] != 0;
                    }
                    if nonzero {
                        basis.reconstruct_signed(&scratch)
                    } else {
                        ExactInt::zero()
                    }
                })
                .collect()
        })
        .collect())
}

fn schoolbook_bilinear(inputs: &[&[ExactInt]], terms: &[Term], out_len: usize, cyclic: bool) -> Vec<ExactInt> {
    let mut out = vec![ExactInt::zero(); out_len];
    for t in terms {
        for (i, x) in inputs[t.a].iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in inputs[t.b].iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let k = if cyclic { (i + j) % out_len } else { i + j };
                out[k] += x * y * t.coeff;
            }
        }
    }
    out
}

/// Exact linear convolution; length `|A| + |B| - 1`, empty if either input is.
pub fn linear_conv_dense(a: &DenseVec, b: &DenseVec) -> Result<DenseVec> {
    let mut out = exact_bilinear(&[a.values(), b.values()], &[&[term(0, 1, 1)]], None)?;
    Ok(DenseVec::new(out.pop().unwrap()))
}

/// Exact cyclic convolution of length `m`.
pub fn cyclic_conv_dense(a: &DenseVec, b: &DenseVec, m: usize) -> Result<DenseVec> {
    if m == 0 {
        return Err(Error::Contract("cyclic length must be at least 1".into()));
    }
    let mut out = exact_bilinear(&[a.values(), b.values()], &[&[term(0, 1, 1)]], Some(m))?;
    Ok(DenseVec::new(out.pop().unwrap()))
}

/// Direct double loop; the reference for both convolutions above.
pub fn conv_schoolbook(a: &DenseVec, b: &DenseVec, m: Option<usize>, guard: u128) -> Result<DenseVec> {
    let work = a.len() as u128 * b.len() as u128;
    if work > guard {
        return Err(Error::guard("schoolbook convolution", work, guard));
    }
    let out_len = match m {
        Some(0) => return Err(Error::Contract("cyclic length must be at least 1".into())),
        Some(m) => m,
        None if a.is_empty() || b.is_empty() => 0,
        None => a.len() + b.len() - 1,
    };
    Ok(DenseVec::new(schoolbook_bilinear(
        &[a.values(), b.values()],
        &[term(0, 1, 1)],
        out_len,
        m.is_some(),
    )))
}

/// Bucket moments of a hashed product: `X = a0⋆b0`, `Y = a1⋆b0 + a0⋆b1`,
/// `Z = a2⋆b0 + 2·a1⋆b1 + a0⋆b2`, all cyclic of length `m`.
#[cfg(test)]
pub(crate) fn cyclic_moment_conv(a: [&[ExactInt]; 3], b: [&[ExactInt]; 3], m: usize) -> Result<[Vec<ExactInt>; 3]> {
    let inputs = [a[0], a[1], a[2], b[0], b[1], b[2]];
    const X: [Term; 1] = [term(0, 3, 1)];
    const Y: [Term; 2] = [term(1, 3, 1), term(0, 4, 1)];
    const Z: [Term; 3] = [term(2, 3, 1), term(1, 4, 2), term(0, 5, 1)];
    let mut out = exact_bilinear(&inputs, &[&X, &Y, &Z], Some(m))?;
    let z = out.pop().unwrap();
    let y = out.pop().unwrap();
    let x = out.pop().unwrap();
    Ok([x, y, z])
}

/// Exact linear convolution of small nonnegative word vectors whose output
/// coefficients are known to stay below `2^61`; single prime, no CRT.
pub(crate) fn conv_small_words(a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 16 {
        let mut out = vec![0u64; out_len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let q = &primes()[0];
    let mut fa = vec![0u64; n];
    fa[..a.len()].copy_from_slice(a);
    q.forward(&mut fa);
    let mut fb = vec![0u64; n];
    fb[..b.len()].copy_from_slice(b);
    q.forward(&mut fb);
    for (x, &y) in fa.iter_mut().zip(&fb) {
        *x = q.mont_mul(*x, y);
    }
    q.inverse_unscaled(&mut fa);
    let scale = q.product_scale(n);
    fa.truncate(out_len);
    for x in fa.iter_mut() {
        *x = q.mont_mul(*x, scale);
    }
    fa
}

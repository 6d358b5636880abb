//! Chinese remaindering over word-sized prime moduli (Garner's scheme).

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

use crate::arith::{inv_mod, mul_mod, sub_mod};
use crate::error::{Error, Result};

/// Precomputed data for repeated reconstruction over a fixed set of moduli.
#[derive(Debug, Clone)]
pub struct CrtBasis {
    moduli: Vec<u64>,
    // inv[i][j] = moduli[j]^-1 mod moduli[i], for j < i
    inv: Vec<Vec<u64>>,
    product: BigUint,
    half: BigUint,
}

impl CrtBasis {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::Contract("CRT basis needs at least one modulus".into()));
        }
        let mut inv = Vec::with_capacity(moduli.len());
        for (i, &mi) in moduli.iter().enumerate() {
            let mut row = Vec::with_capacity(i);
            for &mj in &moduli[..i] {
                let v = inv_mod(mj % mi, mi)
                    .ok_or_else(|| Error::Contract(format!("moduli {mj} and {mi} are not coprime")))?;
                row.push(v);
            }
            inv.push(row);
        }
        let product: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
        let half = &product >> 1u32;
        Ok(CrtBasis {
            moduli: moduli.to_vec(),
            inv,
            product,
            half,
        })
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    /// Mixed-radix digits `d` with `x = d0 + m0 (d1 + m1 (d2 + ...))`.
    fn digits(&self, residues: &[u64]) -> Vec<u64> {
        debug_assert_eq!(residues.len(), self.moduli.len());
        let mut d: Vec<u64> = Vec::with_capacity(residues.len());
        for (i, &mi) in self.moduli.iter().enumerate() {
            let mut x = residues[i] % mi;
            for j in 0..i {
                x = mul_mod(sub_mod(x, d[j] % mi, mi), self.inv[i][j], mi);
            }
            d.push(x);
        }
        d
    }

    /// The unique value in `[0, ∏ m)` with the given residues.
    pub fn reconstruct(&self, residues: &[u64]) -> BigUint {
        let d = self.digits(residues);
        if self.moduli.len() == 1 {
            return BigUint::from(d[0]);
        }
        if self.moduli.len() == 2 {
            return BigUint::from(d[0] as u128 + self.moduli[0] as u128 * d[1] as u128);
        }
        let mut acc = BigUint::zero();
        for i in (0..d.len()).rev() {
            acc = acc * self.moduli[i] + d[i];
        }
        acc
    }

    /// Reconstruction lifted into the symmetric range `(-∏m/2, ∏m/2]`.
    pub fn reconstruct_signed(&self, residues: &[u64]) -> BigInt {
        let v = self.reconstruct(residues);
        if v > self.half {
            BigInt::from(v) - BigInt::from(self.product.clone())
        } else {
            BigInt::from(v)
        }
    }
}

/// Unique value in `[0, ∏ p)` congruent to each `(residue, modulus)` pair.
pub fn crt_reconstruct(residues: &[(u64, u64)]) -> Result<BigInt> {
    if residues.is_empty() {
        return Ok(BigInt::zero());
    }
    let moduli: Vec<u64> = residues.iter().map(|&(_, m)| m).collect();
    let values: Vec<u64> = residues.iter().map(|&(r, _)| r).collect();
    let basis = CrtBasis::new(&moduli)?;
    Ok(BigInt::from(basis.reconstruct(&values)))
}

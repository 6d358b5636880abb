//! Vector representations shared by every engine.
//!
//! [`SparseVec`] is canonical at every API boundary: indices strictly
//! increasing, all below the declared length, no stored zeros. The declared
//! length survives even when the vector has no entries, because it drives the
//! size of hash families and transforms downstream.

use std::ops::Index as IndexOp;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Coordinate of a vector; one machine word.
pub type Index = u64;

/// Exact, arbitrary-precision integer used for every vector entry.
pub type ExactInt = BigInt;

/// Largest declared length accepted anywhere in the crate.
///
/// Output indices reach `2 * MAX_LENGTH - 2` and linear-hash products are
/// carried in `u128`, which fixes this bound.
pub const MAX_LENGTH: Index = 1 << 62;

/// `(‖V‖₀, ‖V‖₁, ‖V‖∞)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Norms {
    pub l0: Index,
    pub l1: ExactInt,
    pub linf: ExactInt,
}

/// A length-annotated sorted list of nonzero `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseVec {
    length: Index,
    entries: Vec<(Index, ExactInt)>,
}

impl SparseVec {
    /// The all-zero vector of the given length.
    pub fn zeros(length: Index) -> Self {
        SparseVec {
            length,
            entries: Vec::new(),
        }
    }

    /// Builds a canonical vector from pairs in any order.
    ///
    /// Duplicate indices are merged by addition and resulting zeros dropped.
    pub fn from_pairs<I, T>(length: Index, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Index, T)>,
        T: Into<ExactInt>,
    {
        if length > MAX_LENGTH {
            return Err(Error::LengthTooLarge(length as u128));
        }
        let mut raw: Vec<(Index, ExactInt)> = Vec::new();
        for (i, v) in pairs {
            if i >= length {
                return Err(Error::IndexOutOfRange { index: i, length });
            }
            raw.push((i, v.into()));
        }
        Ok(Self::from_unsorted_unchecked(length, raw))
    }

    /// Canonicalizes pairs already known to lie in `[0, length)`.
    pub(crate) fn from_unsorted_unchecked(length: Index, mut raw: Vec<(Index, ExactInt)>) -> Self {
        raw.sort_unstable_by_key(|(i, _)| *i);
        let mut entries: Vec<(Index, ExactInt)> = Vec::with_capacity(raw.len());
        for (i, v) in raw {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|(_, v)| !v.is_zero());
        debug_assert!(entries.iter().all(|(i, _)| *i < length));
        SparseVec { length, entries }
    }

    /// Wraps entries that are already canonical.
    pub(crate) fn from_canonical(length: Index, entries: Vec<(Index, ExactInt)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(i, v)| *i < length && !v.is_zero()));
        SparseVec { length, entries }
    }

    /// Declared universe size `n`.
    pub fn length(&self) -> Index {
        self.length
    }

    /// Number of stored (nonzero) entries, `‖V‖₀`.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Index, ExactInt)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(Index, ExactInt)> {
        self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, &ExactInt)> + '_ {
        self.entries.iter().map(|(i, v)| (*i, v))
    }

    pub fn support(&self) -> Vec<Index> {
        self.entries.iter().map(|(i, _)| *i).collect()
    }

    /// Value at `i`, or `None` when the coordinate is zero.
    pub fn get(&self, i: Index) -> Option<&ExactInt> {
        self.entries
            .binary_search_by_key(&i, |(j, _)| *j)
            .ok()
            .map(|pos| &self.entries[pos].1)
    }

    /// Index of the first negative entry, if any.
    pub fn first_negative(&self) -> Option<Index> {
        self.entries.iter().find(|(_, v)| v.is_negative()).map(|(i, _)| *i)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.first_negative().is_none()
    }

    /// Same entries under a new declared length.
    pub fn with_length(&self, length: Index) -> Result<Self> {
        if length > MAX_LENGTH {
            return Err(Error::LengthTooLarge(length as u128));
        }
        if let Some((i, _)) = self.entries.last() {
            if *i >= length {
                return Err(Error::IndexOutOfRange { index: *i, length });
            }
        }
        Ok(SparseVec {
            length,
            entries: self.entries.clone(),
        })
    }

    /// `∂^d V`, i.e. the entry at `i` scaled by `i^d`.
    pub fn derivative(&self, d: u32) -> SparseVec {
        let entries = self
            .entries
            .iter()
            .filter(|(i, _)| d == 0 || *i != 0)
            .map(|(i, v)| (*i, v * index_power(*i, d)))
            .collect();
        SparseVec::from_canonical(self.length, entries)
    }

    pub fn l1(&self) -> ExactInt {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn norms(&self) -> Norms {
        let mut l1 = ExactInt::zero();
        let mut linf = ExactInt::zero();
        for (_, v) in &self.entries {
            let a = v.abs();
            if a > linf {
                linf = a.clone();
            }
            l1 += a;
        }
        Norms {
            l0: self.entries.len() as Index,
            l1,
            linf,
        }
    }

    /// Folds the vector in half: `V'_i = V_i + V_{i + ⌈n/2⌉}`, length `⌈n/2⌉`.
    pub fn fold_half(&self) -> SparseVec {
        let half = self.length.div_ceil(2);
        if half == 0 {
            return self.clone();
        }
        let raw = self
            .entries
            .iter()
            .map(|(i, v)| (if *i >= half { *i - half } else { *i }, v.clone()))
            .collect();
        SparseVec::from_unsorted_unchecked(half, raw)
    }

    /// Dense copy; refused when the length exceeds `guard`.
    pub fn to_dense(&self, guard: Index) -> Result<DenseVec> {
        if self.length > guard {
            return Err(Error::guard("dense vector", self.length, guard));
        }
        let mut values = vec![ExactInt::zero(); self.length as usize];
        for (i, v) in &self.entries {
            values[*i as usize] = v.clone();
        }
        Ok(DenseVec::new(values))
    }

    /// Sparse view of a dense vector, dropping zeros. `n` must cover the dense length.
    pub fn from_dense(dense: &DenseVec, n: Index) -> Result<SparseVec> {
        if (dense.len() as u128) > n as u128 {
            // trailing zeros beyond n are tolerated, anything else is out of range
            if let Some(pos) = dense.values()[n as usize..].iter().position(|v| !v.is_zero()) {
                return Err(Error::IndexOutOfRange {
                    index: n + pos as Index,
                    length: n,
                });
            }
        }
        let entries = dense
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (i as Index, v.clone()))
            .collect();
        Ok(SparseVec::from_canonical(n, entries))
    }
}

/// `i^d` as an exact integer.
pub(crate) fn index_power(i: Index, d: u32) -> ExactInt {
    match d {
        0 => ExactInt::from(1u8),
        1 => ExactInt::from(i),
        2 => ExactInt::from(i as u128 * i as u128),
        _ => num_traits::pow(ExactInt::from(i), d as usize),
    }
}

/// Fixed-length sequence of exact integers; zeros allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DenseVec {
    values: Vec<ExactInt>,
}

impl DenseVec {
    pub fn new(values: Vec<ExactInt>) -> Self {
        DenseVec { values }
    }

    pub fn zeros(len: usize) -> Self {
        DenseVec {
            values: vec![ExactInt::zero(); len],
        }
    }

    pub fn from_i64s(values: &[i64]) -> Self {
        DenseVec {
            values: values.iter().map(|&v| ExactInt::from(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[ExactInt] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [ExactInt] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<ExactInt> {
        self.values
    }

    pub fn l1(&self) -> ExactInt {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> ExactInt {
        self.values.iter().map(|v| v.abs()).max().unwrap_or_default()
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }
}

impl IndexOp<usize> for DenseVec {
    type Output = ExactInt;

    fn index(&self, i: usize) -> &ExactInt {
        &self.values[i]
    }
}

impl From<Vec<ExactInt>> for DenseVec {
    fn from(values: Vec<ExactInt>) -> Self {
        DenseVec { values }
    }
}

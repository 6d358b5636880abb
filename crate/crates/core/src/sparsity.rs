//! Bucket moments and the exact 1-sparsity test.
//!
//! For a nonnegative `V`, Cauchy–Schwarz gives `‖∂V‖₁² ≤ ‖V‖₁·‖∂²V‖₁` with
//! equality exactly when `‖V‖₀ ≤ 1`; the position of a lone entry is then
//! `‖∂V‖₁ / ‖V‖₁`.

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::vector::{index_power, ExactInt, Index, SparseVec};

/// `(‖V‖₁, ‖∂V‖₁, ‖∂²V‖₁)` of one bucket.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BucketMoments {
    pub x: ExactInt,
    pub y: ExactInt,
    pub z: ExactInt,
}

impl BucketMoments {
    pub fn new(x: impl Into<ExactInt>, y: impl Into<ExactInt>, z: impl Into<ExactInt>) -> Self {
        BucketMoments {
            x: x.into(),
            y: y.into(),
            z: z.into(),
        }
    }
}

/// Outcome of the 1-sparsity test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SparsityVerdict {
    Zero,
    One { position: Index, value: ExactInt },
    Many,
}

/// Exact moments of a nonnegative vector.
pub fn moments(v: &SparseVec) -> BucketMoments {
    let mut m = BucketMoments::default();
    for (i, val) in v.iter() {
        m.x += val;
        m.y += val * index_power(i, 1);
        m.z += val * index_power(i, 2);
    }
    m
}

/// Decides whether the bucket behind `m` holds at most one entry.
///
/// A passing test whose quotient is not an exact index below `max_index`
/// is reported as `Many`; genuine moments never take that branch.
pub fn classify(m: &BucketMoments, max_index: Index) -> SparsityVerdict {
    if m.x.is_zero() {
        return SparsityVerdict::Zero;
    }
    if m.x.is_negative() || m.y.is_negative() || m.z.is_negative() {
        return SparsityVerdict::Many;
    }
    if &m.y * &m.y != &m.x * &m.z {
        return SparsityVerdict::Many;
    }
    let (q, r) = m.y.div_rem(&m.x);
    match q.to_u64() {
        Some(position) if r.is_zero() && position < max_index => SparsityVerdict::One {
            position,
            value: m.x.clone(),
        },
        _ => SparsityVerdict::Many,
    }
}

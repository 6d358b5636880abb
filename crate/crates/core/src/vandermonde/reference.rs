//! Textbook versions: explicit powers for products, Gaussian elimination for
//! solves. Cubic time; meant for cross-checking the production paths.

use crate::error::{Error, Result};
use crate::field::{ExtElem, ExtFieldCtx};

/// `out_j = Σ_i a_i^j x_i`, every power computed from scratch.
pub fn tv_mul(ctx: &ExtFieldCtx, points: &[ExtElem], x: &[ExtElem]) -> Vec<ExtElem> {
    (0..points.len() as u64)
        .map(|j| {
            points
                .iter()
                .zip(x)
                .fold(ctx.zero(), |acc, (a, xi)| ctx.add(&acc, &ctx.mul(&ctx.pow_u64(a, j), xi)))
        })
        .collect()
}

/// Solves the transposed Vandermonde system by Gauss–Jordan elimination.
pub fn tv_solve(ctx: &ExtFieldCtx, points: &[ExtElem], b: &[ExtElem]) -> Result<Vec<ExtElem>> {
    let t = points.len();
    if t != b.len() {
        return Err(Error::Contract("points and right-hand side differ in length".into()));
    }
    let mut rows: Vec<Vec<ExtElem>> = (0..t)
        .map(|j| {
            let mut row: Vec<ExtElem> = points.iter().map(|a| ctx.pow_u64(a, j as u64)).collect();
            row.push(b[j].clone());
            row
        })
        .collect();
    for col in 0..t {
        let pivot = (col..t)
            .find(|&r| !rows[r][col].is_zero())
            .ok_or_else(|| Error::Domain("transposed Vandermonde matrix is singular".into()))?;
        rows.swap(col, pivot);
        let inv = ctx.inv(&rows[col][col])?;
        for v in rows[col].iter_mut() {
            *v = ctx.mul(v, &inv);
        }
        let pivot_row = rows[col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = ctx.sub(v, &ctx.mul(&factor, pv));
            }
        }
    }
    Ok(rows.into_iter().map(|mut row| row.pop().unwrap()).collect())
}

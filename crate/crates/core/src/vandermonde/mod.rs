//! Transposed Vandermonde products and solves over `F_{p^{p-1}}`, and the
//! sparse evaluation, interpolation and convolution built on them.
//!
//! Row `j` of the matrix for points `a_i` is `(a_0^j, …, a_{t-1}^j)`. Two
//! production paths exist: a quadratic one and a quasi-linear one based on
//! rational summation and subproduct trees. `reference` holds the textbook
//! Horner and Gaussian-elimination versions used as test oracles.

mod poly;
pub mod reference;

use crate::error::{Error, Result};
use crate::field::{ExtElem, ExtFieldCtx};
use crate::vector::Index;

pub(crate) use poly::{Fq, Poly};

/// Systems with more rows than this use the quasi-linear path.
pub const FAST_CUTOVER: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Path {
    /// Quadratic up to `FAST_CUTOVER`, quasi-linear above.
    #[default]
    Auto,
    Quadratic,
    Fast,
}

impl Path {
    fn fast(self, size: usize) -> bool {
        match self {
            Path::Auto => size > FAST_CUTOVER,
            Path::Quadratic => false,
            Path::Fast => true,
        }
    }
}

fn check_elems(ctx: &ExtFieldCtx, what: &str, v: &[ExtElem]) -> Result<()> {
    let p = ctx.p() as u32;
    if v.iter().any(|e| e.coeffs().len() != ctx.degree() || e.coeffs().iter().any(|&c| c >= p)) {
        return Err(Error::Contract(format!("{what}: element not from this field")));
    }
    Ok(())
}

/// `out_j = Σ_i a_i^j x_i` for `j < t`, where `t = |points| = |x|`.
pub fn tv_mul(ctx: &ExtFieldCtx, points: &[ExtElem], x: &[ExtElem]) -> Result<Vec<ExtElem>> {
    tv_mul_with(ctx, points, x, Path::Auto)
}

pub fn tv_mul_with(ctx: &ExtFieldCtx, points: &[ExtElem], x: &[ExtElem], path: Path) -> Result<Vec<ExtElem>> {
    if points.is_empty() || points.len() != x.len() {
        return Err(Error::Contract(format!(
            "tv_mul needs equal nonzero sizes, got {} points and {} values",
            points.len(),
            x.len()
        )));
    }
    check_elems(ctx, "tv_mul", points)?;
    check_elems(ctx, "tv_mul", x)?;
    let f = Fq::new(ctx);
    let d = f.d;
    let out = tv_mul_rect(ctx, &Poly::from_elems(d, points), &Poly::from_elems(d, x), points.len(), path)?;
    Ok(out.to_elems())
}

/// The unique `x` with `tv_mul(points, x) = b`.
pub fn tv_solve(ctx: &ExtFieldCtx, points: &[ExtElem], b: &[ExtElem]) -> Result<Vec<ExtElem>> {
    tv_solve_with(ctx, points, b, Path::Auto)
}

pub fn tv_solve_with(ctx: &ExtFieldCtx, points: &[ExtElem], b: &[ExtElem], path: Path) -> Result<Vec<ExtElem>> {
    if points.is_empty() || points.len() != b.len() {
        return Err(Error::Contract(format!(
            "tv_solve needs equal nonzero sizes, got {} points and {} values",
            points.len(),
            b.len()
        )));
    }
    check_elems(ctx, "tv_solve", points)?;
    check_elems(ctx, "tv_solve", b)?;
    let d = ctx.degree();
    let out = tv_solve_flat(ctx, &Poly::from_elems(d, points), &Poly::from_elems(d, b), path)?;
    Ok(out.to_elems())
}

/// First `rows` entries of `Σ_i a_i^j x_i`, for any number of points.
pub(crate) fn tv_mul_rect(ctx: &ExtFieldCtx, points: &Poly, x: &Poly, rows: usize, path: Path) -> Result<Poly> {
    let f = Fq::new(ctx);
    if points.len() == 0 || rows == 0 {
        return Ok(Poly::zero(f.d, rows));
    }
    if !path.fast(rows.max(points.len())) {
        return Ok(tv_mul_quadratic(&f, points, x, rows));
    }
    let (num, den) = poly::rational_sum(&f, points, x);
    let inv = poly::inverse_series(&f, ctx, &den, rows)?;
    Ok(poly::mul_trunc(&f, &num, &inv, rows))
}

fn tv_mul_quadratic(f: &Fq, points: &Poly, x: &Poly, rows: usize) -> Poly {
    let d = f.d;
    let mut out = Poly::zero(d, rows);
    let mut acc = Vec::new();
    let mut cur = vec![0u32; d];
    let mut next = vec![0u32; d];
    for i in 0..points.len() {
        let a = points.coeff(i);
        cur.copy_from_slice(x.coeff(i));
        for j in 0..rows {
            f.add_assign(out.coeff_mut(j), &cur);
            if j + 1 < rows {
                f.mul(&cur, a, &mut next, &mut acc);
                std::mem::swap(&mut cur, &mut next);
            }
        }
    }
    out
}

pub(crate) fn tv_solve_flat(ctx: &ExtFieldCtx, points: &Poly, b: &Poly, path: Path) -> Result<Poly> {
    let f = Fq::new(ctx);
    let t = points.len();
    let (mut num_vals, mut den_vals) = if path.fast(t) {
        solve_values_fast(&f, ctx, points, b)?
    } else {
        solve_values_quadratic(&f, points, b)
    };
    // x_i = Ñ(a_i) / P'(a_i) with P = Π (Y - a_i) and Ñ the reversal of (b · rev P) mod Y^t
    if let Err(i) = f.batch_invert(ctx, &mut den_vals) {
        return Err(Error::Domain(format!("transposed Vandermonde system is singular at point {i}")));
    }
    let mut acc = Vec::new();
    let mut tmp = vec![0u32; f.d];
    for i in 0..t {
        f.mul(num_vals.coeff(i), den_vals.coeff(i), &mut tmp, &mut acc);
        num_vals.coeff_mut(i).copy_from_slice(&tmp);
    }
    Ok(num_vals)
}

/// `(Ñ(a_i), P'(a_i))` by building `P` factor by factor and Horner evaluation.
fn solve_values_quadratic(f: &Fq, points: &Poly, b: &Poly) -> (Poly, Poly) {
    let d = f.d;
    let t = points.len();
    let mut acc = Vec::new();
    let mut tmp = vec![0u32; d];
    // rev P = Π (1 - a_i Y), grown one factor at a time
    let mut rev_p = Poly::zero(d, t + 1);
    rev_p.c[0] = 1;
    for i in 0..t {
        let a = points.coeff(i);
        for k in (1..=i + 1).rev() {
            f.mul(rev_p.coeff(k - 1), a, &mut tmp, &mut acc);
            f.sub_assign(rev_p.coeff_mut(k), &tmp);
        }
    }
    let mut num = Poly::zero(d, t);
    let mut wide = vec![0u64; 2 * d - 1];
    for k in 0..t {
        wide.fill(0);
        for i in 0..=k {
            f.mul_acc(&mut wide, b.coeff(i), rev_p.coeff(k - i));
        }
        f.reduce(&wide, num.coeff_mut(k));
    }
    // Ñ(Y) = Σ_k num_k Y^(t-1-k) and P(Y) = Σ_k rev_p_k Y^(t-k)
    let p_poly = rev_p.reversed(t + 1);
    let dp = poly::derivative(f, &p_poly);
    let tilde = num.reversed(t);
    let mut nv = Poly::zero(d, t);
    let mut dv = Poly::zero(d, t);
    for i in 0..t {
        let a = points.coeff(i);
        horner(f, &tilde, a, nv.coeff_mut(i), &mut acc);
        horner(f, &dp, a, dv.coeff_mut(i), &mut acc);
    }
    (nv, dv)
}

fn horner(f: &Fq, q: &Poly, a: &[u32], out: &mut [u32], acc: &mut Vec<u64>) {
    out.fill(0);
    let mut tmp = vec![0u32; f.d];
    for k in (0..q.len()).rev() {
        f.mul(out, a, &mut tmp, acc);
        f.add_assign(&mut tmp, q.coeff(k));
        out.copy_from_slice(&tmp);
    }
}

/// `(Ñ(a_i), P'(a_i))` through one subproduct tree.
fn solve_values_fast(f: &Fq, ctx: &ExtFieldCtx, points: &Poly, b: &Poly) -> Result<(Poly, Poly)> {
    let t = points.len();
    let tree = poly::Tree::build(f, points);
    let rev_p = tree.poly.reversed(t + 1);
    // Ñ / P expands in 1/Y with coefficients exactly b
    let mut nv = Poly::zero(f.d, 0);
    tree.descend(f, b, &mut nv);
    let inv = poly::inverse_series(f, ctx, &rev_p, t)?;
    let dp_rev = poly::derivative(f, &tree.poly).reversed(t);
    let u = poly::mul_trunc(f, &dp_rev, &inv, t);
    let mut dv = Poly::zero(f.d, 0);
    tree.descend(f, &u, &mut dv);
    Ok((nv, dv))
}

/// A polynomial over the extension field with strictly increasing exponents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparsePoly {
    terms: Vec<(Index, ExtElem)>,
}

impl SparsePoly {
    pub fn new(terms: Vec<(Index, ExtElem)>) -> Result<Self> {
        if terms.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Contract("sparse polynomial exponents must strictly increase".into()));
        }
        Ok(SparsePoly { terms })
    }

    /// Polynomial with constant coefficients from the prime field.
    pub fn from_constants(ctx: &ExtFieldCtx, terms: impl IntoIterator<Item = (Index, u64)>) -> Result<Self> {
        SparsePoly::new(
            terms
                .into_iter()
                .filter(|&(_, v)| v % ctx.p() != 0)
                .map(|(i, v)| (i, ctx.constant(v)))
                .collect(),
        )
    }

    pub fn terms(&self) -> &[(Index, ExtElem)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> Vec<Index> {
        self.terms.iter().map(|(i, _)| *i).collect()
    }
}

/// `ω^e`, through the context's power table when `ω = X + 1`.
fn omega_powers(ctx: &ExtFieldCtx, omega: &ExtElem, exps: impl Iterator<Item = Index>) -> Poly {
    let d = ctx.degree();
    let standard = *omega == ctx.omega();
    let mut out = Poly::zero(d, 0);
    for e in exps {
        let w = if standard { ctx.omega_pow(e) } else { ctx.pow_u64(omega, e) };
        out.push(w.coeffs());
    }
    out
}

fn check_exponents(terms: impl Iterator<Item = Index>, n: Index) -> Result<()> {
    for e in terms {
        if e >= n {
            return Err(Error::IndexOutOfRange { index: e, length: n });
        }
    }
    Ok(())
}

/// `(A(ω^0), …, A(ω^{t-1}))`; `ω` must have order at least `n`.
pub fn sparse_evaluate(ctx: &ExtFieldCtx, a: &SparsePoly, omega: &ExtElem, t: Index, n: Index) -> Result<Vec<ExtElem>> {
    check_elems(ctx, "sparse_evaluate", std::slice::from_ref(omega))?;
    check_exponents(a.terms.iter().map(|(e, _)| *e), n)?;
    if a.len() as Index > t {
        return Err(Error::Contract(format!("{} terms exceed {t} evaluation points", a.len())));
    }
    let rows = usize::try_from(t).map_err(|_| Error::LengthTooLarge(t as u128))?;
    Ok(evaluate_flat(ctx, a, omega, rows, Path::Auto)?.to_elems())
}

fn evaluate_flat(ctx: &ExtFieldCtx, a: &SparsePoly, omega: &ExtElem, rows: usize, path: Path) -> Result<Poly> {
    let d = ctx.degree();
    let points = omega_powers(ctx, omega, a.terms.iter().map(|(e, _)| *e));
    let mut x = Poly::zero(d, 0);
    for (_, v) in &a.terms {
        x.push(v.coeffs());
    }
    tv_mul_rect(ctx, &points, &x, rows, path)
}

/// The polynomial supported on `support` with `A(ω^i) = values_i`; zero
/// coefficients are dropped. The order of `support` does not matter.
pub fn sparse_interpolate(
    ctx: &ExtFieldCtx,
    values: &[ExtElem],
    support: &[Index],
    omega: &ExtElem,
    n: Index,
) -> Result<SparsePoly> {
    check_elems(ctx, "sparse_interpolate", values)?;
    check_elems(ctx, "sparse_interpolate", std::slice::from_ref(omega))?;
    if values.len() != support.len() {
        return Err(Error::Contract(format!(
            "{} values for {} support positions",
            values.len(),
            support.len()
        )));
    }
    let support = canonical_support(support, n)?;
    interpolate_flat(ctx, &Poly::from_elems(ctx.degree(), values), &support, omega, Path::Auto)
}

fn canonical_support(support: &[Index], n: Index) -> Result<Vec<Index>> {
    check_exponents(support.iter().copied(), n)?;
    let mut s = support.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("support lists an exponent twice".into()));
    }
    Ok(s)
}

fn interpolate_flat(ctx: &ExtFieldCtx, values: &Poly, support: &[Index], omega: &ExtElem, path: Path) -> Result<SparsePoly> {
    if support.is_empty() {
        return Ok(SparsePoly::default());
    }
    let points = omega_powers(ctx, omega, support.iter().copied());
    let coeffs = tv_solve_flat(ctx, &points, values, path)?;
    let terms = support
        .iter()
        .zip(coeffs.c.chunks(ctx.degree()))
        .filter(|(_, c)| c.iter().any(|&v| v != 0))
        .map(|(&e, c)| (e, ExtElem::from_raw(c.to_vec())))
        .collect();
    Ok(SparsePoly { terms })
}

/// `A ⋆ B` over the field, given a superset `support` of its support and an
/// `ω` whose order is at least the output length.
pub fn field_sparse_conv(
    ctx: &ExtFieldCtx,
    a: &SparsePoly,
    b: &SparsePoly,
    support: &[Index],
    omega: &ExtElem,
) -> Result<SparsePoly> {
    field_sparse_conv_with(ctx, a, b, support, omega, Path::Auto)
}

pub fn field_sparse_conv_with(
    ctx: &ExtFieldCtx,
    a: &SparsePoly,
    b: &SparsePoly,
    support: &[Index],
    omega: &ExtElem,
    path: Path,
) -> Result<SparsePoly> {
    check_elems(ctx, "field_sparse_conv", std::slice::from_ref(omega))?;
    let support = canonical_support(support, Index::MAX)?;
    if a.is_empty() || b.is_empty() || support.is_empty() {
        return Ok(SparsePoly::default());
    }
    // |supp(A ⋆ B)| ≤ |support| rows determine the product
    let rows = support.len();
    let va = evaluate_flat(ctx, a, omega, rows, path)?;
    let vb = evaluate_flat(ctx, b, omega, rows, path)?;
    let f = Fq::new(ctx);
    let mut vc = Poly::zero(f.d, rows);
    let mut acc = Vec::new();
    for j in 0..rows {
        f.mul(va.coeff(j), vb.coeff(j), vc.coeff_mut(j), &mut acc);
    }
    interpolate_flat(ctx, &vc, &support, omega, path)
}

/// Residues of `A ⋆ B` at each position of the sorted, duplicate-free
/// `support`, for inputs whose coefficients lie in the prime field. A result
/// coefficient outside the prime field means `support` missed an index.
pub(crate) fn prime_field_conv(
    ctx: &ExtFieldCtx,
    a: &[(Index, u64)],
    b: &[(Index, u64)],
    support: &[Index],
) -> Result<Vec<u64>> {
    let f = Fq::new(ctx);
    let rows = support.len();
    if a.is_empty() || b.is_empty() || rows == 0 {
        return Ok(vec![0; rows]);
    }
    let omega = ctx.omega();
    let eval = |v: &[(Index, u64)]| {
        let points = omega_powers(ctx, &omega, v.iter().map(|(e, _)| *e));
        let mut x = Poly::zero(f.d, v.len());
        for (k, (_, c)) in v.iter().enumerate() {
            x.coeff_mut(k)[0] = (c % ctx.p()) as u32;
        }
        tv_mul_rect(ctx, &points, &x, rows, Path::Auto)
    };
    let va = eval(a)?;
    let vb = eval(b)?;
    let mut vc = Poly::zero(f.d, rows);
    let mut acc = Vec::new();
    for j in 0..rows {
        f.mul(va.coeff(j), vb.coeff(j), vc.coeff_mut(j), &mut acc);
    }
    let points = omega_powers(ctx, &omega, support.iter().copied());
    let coeffs = tv_solve_flat(ctx, &points, &vc, Path::Auto)?;
    coeffs
        .c
        .chunks(f.d)
        .zip(support)
        .map(|(c, &e)| {
            if c[1..].iter().any(|&v| v != 0) {
                return Err(Error::Contract(format!(
                    "support superset misses part of the product near index {e}"
                )));
            }
            Ok(c[0] as u64)
        })
        .collect()
}

//! Dense polynomials over `F_p[X]/(X^d - β)` with flat coefficient storage.
//!
//! Coefficient `k` of a polynomial occupies `c[k*d .. (k+1)*d]`. Products go
//! through Kronecker substitution: each field coefficient becomes a block of
//! `2d - 1` integer slots, so one integer convolution carries the whole
//! product before the blocks are reduced by `X^d = β`.

use crate::dense::conv_small_words;
use crate::error::{Error, Result};
use crate::field::{ExtElem, ExtFieldCtx};

/// Below this many coefficients on the shorter side, products are schoolbook.
const SCHOOLBOOK_LEN: usize = 6;

/// Flat element arithmetic for one extension field.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fq {
    pub p: u32,
    pub d: usize,
    beta: u64,
    // ⌊(2^64 - 1) / p⌋
    barrett: u64,
}

/// Widest `2d - 1` handled by the stack-buffer element product.
const STACK_SLOTS: usize = 255;

impl Fq {
    pub fn new(ctx: &ExtFieldCtx) -> Self {
        Fq {
            p: ctx.p() as u32,
            d: ctx.degree(),
            beta: ctx.beta(),
            barrett: u64::MAX / ctx.p(),
        }
    }

    #[inline]
    fn rem(&self, x: u64) -> u64 {
        let p = self.p as u64;
        let q = ((x as u128 * self.barrett as u128) >> 64) as u64;
        let r = x - q * p;
        if r >= p {
            r - p
        } else {
            r
        }
    }

    /// `acc += a·b` as polynomials in `X`, unreduced; `acc` has `2d - 1` slots.
    #[inline]
    pub fn mul_acc(&self, acc: &mut [u64], a: &[u32], b: &[u32]) {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2
            return unsafe { kernels::acc64_avx2(acc, a, b) };
        }
        kernels::acc64(acc, a, b)
    }

    /// Reduces `2d - 1` slots (zero-padded if shorter) into `out`.
    #[inline]
    pub fn reduce(&self, acc: &[u64], out: &mut [u32]) {
        let d = self.d;
        for (k, o) in out.iter_mut().enumerate() {
            let lo = acc.get(k).map_or(0, |&v| self.rem(v));
            let hi = acc.get(k + d).map_or(0, |&v| self.rem(v));
            *o = self.rem(lo + self.beta * hi) as u32;
        }
    }

    pub fn mul(&self, a: &[u32], b: &[u32], out: &mut [u32], acc: &mut Vec<u64>) {
        let d = self.d;
        let p = self.p as u64;
        if 2 * d - 1 <= STACK_SLOTS && d as u64 * (p - 1) * (p - 1) < 1 << 32 {
            let mut buf = [0u32; STACK_SLOTS];
            #[cfg(target_arch = "x86_64")]
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2
                unsafe { kernels::acc32_avx2(&mut buf, a, b) }
            } else {
                kernels::acc32(&mut buf, a, b)
            }
            #[cfg(not(target_arch = "x86_64"))]
            kernels::acc32(&mut buf, a, b);
            for (k, o) in out.iter_mut().enumerate() {
                let v = self.rem(buf[k] as u64) + self.beta * self.rem(buf[k + d] as u64);
                *o = self.rem(v) as u32;
            }
            return;
        }
        acc.clear();
        acc.resize(2 * d - 1, 0);
        self.mul_acc(acc, a, b);
        self.reduce(acc, out);
    }

    #[inline]
    pub fn add_assign(&self, a: &mut [u32], b: &[u32]) {
        let p = self.p;
        for (x, &y) in a.iter_mut().zip(b) {
            let s = *x + y;
            *x = if s >= p { s - p } else { s };
        }
    }

    #[inline]
    pub fn sub_assign(&self, a: &mut [u32], b: &[u32]) {
        let p = self.p;
        for (x, &y) in a.iter_mut().zip(b) {
            *x = if *x >= y { *x - y } else { *x + p - y };
        }
    }

    pub fn neg_assign(&self, a: &mut [u32]) {
        let p = self.p;
        for x in a.iter_mut() {
            if *x != 0 {
                *x = p - *x;
            }
        }
    }

    pub fn scale_assign(&self, a: &mut [u32], c: u64) {
        let p = self.p as u64;
        let c = c % p;
        for x in a.iter_mut() {
            *x = (*x as u64 * c % p) as u32;
        }
    }

    /// Replaces every element by its inverse using one field inversion.
    /// Fails on a zero element and reports its position.
    pub fn batch_invert(&self, ctx: &ExtFieldCtx, v: &mut Poly) -> std::result::Result<(), usize> {
        let d = self.d;
        let n = v.len();
        if n == 0 {
            return Ok(());
        }
        if let Some(i) = (0..n).find(|&i| v.coeff(i).iter().all(|&c| c == 0)) {
            return Err(i);
        }
        let mut acc = Vec::new();
        // prefix[i] = v_0 ⋯ v_{i-1}
        let mut prefix = Poly::zero(d, n);
        prefix.c[0] = 1;
        for i in 1..n {
            let (head, tail) = prefix.c.split_at_mut(i * d);
            self.mul(&head[(i - 1) * d..], v.coeff(i - 1), &mut tail[..d], &mut acc);
        }
        let mut total = vec![0u32; d];
        self.mul(prefix.coeff(n - 1), v.coeff(n - 1), &mut total, &mut acc);
        let mut running = ctx
            .inv(&ExtElem::from_raw(total))
            .expect("product of nonzero elements")
            .coeffs()
            .to_vec();
        let mut tmp = vec![0u32; d];
        for i in (0..n).rev() {
            let vi = v.coeff(i).to_vec();
            self.mul(&running, prefix.coeff(i), v.coeff_mut(i), &mut acc);
            self.mul(&running, &vi, &mut tmp, &mut acc);
            running.copy_from_slice(&tmp);
        }
        Ok(())
    }
}

/// Schoolbook element products as polynomials in `X`, left unreduced. The
/// AVX2 copies share the loop bodies and only widen the vector units.
mod kernels {
    #[inline(always)]
    pub fn acc32(buf: &mut [u32], a: &[u32], b: &[u32]) {
        let d = b.len();
        for (i, &x) in a.iter().enumerate() {
            for (slot, &y) in buf[i..i + d].iter_mut().zip(b) {
                *slot += x * y;
            }
        }
    }

    #[inline(always)]
    pub fn acc64(acc: &mut [u64], a: &[u32], b: &[u32]) {
        let d = b.len();
        for (i, &x) in a.iter().enumerate() {
            let x = x as u64;
            for (slot, &y) in acc[i..i + d].iter_mut().zip(b) {
                *slot += x * y as u64;
            }
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    pub unsafe fn acc32_avx2(buf: &mut [u32], a: &[u32], b: &[u32]) {
        acc32(buf, a, b)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    pub unsafe fn acc64_avx2(acc: &mut [u64], a: &[u32], b: &[u32]) {
        acc64(acc, a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Poly {
    pub d: usize,
    pub c: Vec<u32>,
}

impl Poly {
    pub fn zero(d: usize, len: usize) -> Self {
        Poly { d, c: vec![0; d * len] }
    }

    pub fn from_elems(d: usize, elems: &[ExtElem]) -> Self {
        let mut c = Vec::with_capacity(d * elems.len());
        for e in elems {
            c.extend_from_slice(e.coeffs());
        }
        Poly { d, c }
    }

    pub fn to_elems(&self) -> Vec<ExtElem> {
        self.c.chunks(self.d).map(|ch| ExtElem::from_raw(ch.to_vec())).collect()
    }

    pub fn len(&self) -> usize {
        self.c.len() / self.d
    }

    pub fn coeff(&self, i: usize) -> &[u32] {
        &self.c[i * self.d..(i + 1) * self.d]
    }

    pub fn coeff_mut(&mut self, i: usize) -> &mut [u32] {
        &mut self.c[i * self.d..(i + 1) * self.d]
    }

    pub fn push(&mut self, e: &[u32]) {
        self.c.extend_from_slice(e);
    }

    /// Pads with zeros or truncates to `len` coefficients.
    pub fn resize(&mut self, len: usize) {
        self.c.resize(len * self.d, 0);
    }

    pub fn slice(&self, lo: usize, hi: usize) -> Poly {
        Poly {
            d: self.d,
            c: self.c[lo * self.d..hi * self.d].to_vec(),
        }
    }

    /// Coefficients reversed after padding or truncating to `len`.
    pub fn reversed(&self, len: usize) -> Poly {
        let mut out = self.clone();
        out.resize(len);
        let d = self.d;
        let mut c = Vec::with_capacity(out.c.len());
        for ch in out.c.chunks(d).rev() {
            c.extend_from_slice(ch);
        }
        out.c = c;
        out
    }
}

/// Product of two polynomials.
pub(crate) fn mul(f: &Fq, a: &Poly, b: &Poly) -> Poly {
    let (la, lb) = (a.len(), b.len());
    let d = f.d;
    if la == 0 || lb == 0 {
        return Poly::zero(d, 0);
    }
    let out_len = la + lb - 1;
    let mut out = Poly::zero(d, out_len);
    if la.min(lb) <= SCHOOLBOOK_LEN {
        let mut acc = vec![0u64; 2 * d - 1];
        for k in 0..out_len {
            acc.fill(0);
            let lo = k.saturating_sub(lb - 1);
            let hi = k.min(la - 1);
            for i in lo..=hi {
                f.mul_acc(&mut acc, a.coeff(i), b.coeff(k - i));
            }
            f.reduce(&acc, out.coeff_mut(k));
        }
        return out;
    }
    let block = 2 * d - 1;
    let spread = |x: &Poly| {
        let n = x.len();
        let mut w = vec![0u64; (n - 1) * block + d];
        for (i, ch) in x.c.chunks(d).enumerate() {
            for (slot, &v) in w[i * block..i * block + d].iter_mut().zip(ch) {
                *slot = v as u64;
            }
        }
        w
    };
    let prod = conv_small_words(&spread(a), &spread(b));
    for k in 0..out_len {
        f.reduce(&prod[k * block..k * block + block], out.coeff_mut(k));
    }
    out
}

/// First `len` coefficients of the product.
pub(crate) fn mul_trunc(f: &Fq, a: &Poly, b: &Poly, len: usize) -> Poly {
    let a = if a.len() > len { a.slice(0, len) } else { a.clone() };
    let b = if b.len() > len { b.slice(0, len) } else { b.clone() };
    let mut out = mul(f, &a, &b);
    out.resize(len);
    out
}

/// `a + b`, padded to the longer length.
pub(crate) fn add(f: &Fq, a: &Poly, b: &Poly) -> Poly {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = long.clone();
    f.add_assign(&mut out.c[..short.c.len()], &short.c);
    out
}

/// Power series inverse of `a` modulo `Y^len` by Newton iteration.
pub(crate) fn inverse_series(f: &Fq, ctx: &ExtFieldCtx, a: &Poly, len: usize) -> Result<Poly> {
    let d = f.d;
    if a.len() == 0 || a.coeff(0).iter().all(|&c| c == 0) {
        return Err(Error::Domain("series with zero constant term is not invertible".into()));
    }
    let mut g = Poly::from_elems(d, &[ctx.inv(&ExtElem::from_raw(a.coeff(0).to_vec()))?]);
    while g.len() < len {
        let cur = g.len();
        let next = (2 * cur).min(len);
        // a·g ≡ 1 (mod Y^cur); its next block is the error term
        let e = mul_trunc(f, a, &g, next).slice(cur, next);
        let mut corr = mul_trunc(f, &g, &e, next - cur);
        f.neg_assign(&mut corr.c);
        g.c.extend_from_slice(&corr.c);
    }
    g.resize(len);
    Ok(g)
}

/// Formal derivative.
pub(crate) fn derivative(f: &Fq, a: &Poly) -> Poly {
    let n = a.len();
    let mut out = Poly::zero(f.d, n.saturating_sub(1));
    for i in 1..n {
        let o = out.coeff_mut(i - 1);
        o.copy_from_slice(a.coeff(i));
        f.scale_assign(o, i as u64);
    }
    out
}

/// `Σ_i x_i / (1 - a_i Y)` as a fraction `N / D` with `D(0) = 1`.
pub(crate) fn rational_sum(f: &Fq, points: &Poly, x: &Poly) -> (Poly, Poly) {
    let d = f.d;
    let mut level: Vec<(Poly, Poly)> = (0..points.len())
        .map(|i| {
            let mut den = Poly::zero(d, 2);
            den.c[0] = 1;
            den.coeff_mut(1).copy_from_slice(points.coeff(i));
            f.neg_assign(den.coeff_mut(1));
            (x.slice(i, i + 1), den)
        })
        .collect();
    if level.is_empty() {
        let mut one = Poly::zero(d, 1);
        one.c[0] = 1;
        return (Poly::zero(d, 0), one);
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some((n1, d1)) = it.next() {
            match it.next() {
                Some((n2, d2)) => {
                    let num = add(f, &mul(f, &n1, &d2), &mul(f, &n2, &d1));
                    next.push((num, mul(f, &d1, &d2)));
                }
                None => next.push((n1, d1)),
            }
        }
        level = next;
    }
    level.pop().unwrap()
}

/// Subproduct tree over the linear factors `Y - a_i`.
pub(crate) struct Tree {
    pub poly: Poly,
    kids: Option<Box<(Tree, Tree)>>,
}

impl Tree {
    pub fn build(f: &Fq, points: &Poly) -> Tree {
        let n = points.len();
        assert!(n > 0);
        if n == 1 {
            let mut poly = Poly::zero(f.d, 2);
            poly.coeff_mut(0).copy_from_slice(points.coeff(0));
            f.neg_assign(poly.coeff_mut(0));
            poly.c[f.d] = 1;
            return Tree { poly, kids: None };
        }
        let mid = n / 2;
        let left = Tree::build(f, &points.slice(0, mid));
        let right = Tree::build(f, &points.slice(mid, n));
        Tree {
            poly: mul(f, &left.poly, &right.poly),
            kids: Some(Box::new((left, right))),
        }
    }

    fn degree(&self) -> usize {
        self.poly.len() - 1
    }

    /// Values `Q(a_i)` in point order, given `u` = the first `deg` coefficients
    /// of `Q / M` expanded in `1/Y` (starting at `Y^-1`).
    pub fn descend(&self, f: &Fq, u: &Poly, out: &mut Poly) {
        match &self.kids {
            None => out.push(u.coeff(0)),
            Some(kids) => {
                let (left, right) = &**kids;
                let ur = u.reversed(self.degree());
                left.descend(f, &middle(f, &ur, &right.poly, left.degree()), out);
                right.descend(f, &middle(f, &ur, &left.poly, right.degree()), out);
            }
        }
    }
}

/// `v_i = Σ_j m_j u_{i+j}` for `i < len`, with `ur` the reversal of `u`.
fn middle(f: &Fq, ur: &Poly, m: &Poly, len: usize) -> Poly {
    let total = ur.len();
    let prod = mul(f, m, ur);
    let mut out = Poly::zero(f.d, len);
    for i in 0..len {
        out.coeff_mut(i).copy_from_slice(prod.coeff(total - 1 - i));
    }
    out
}

//! Invariant suites run by `sparseconv selftest`.

use std::collections::BTreeSet;
use std::io::Write;

use clap::ValueEnum;
use num_bigint::BigUint;
use rand::Rng;

use crate::field::{irreducible_by_trial, multiplicative_order, ExtElem, ExtFieldCtx, Order};
use crate::hashing::{sample_linear, sample_prime_hash, BucketHash};
use crate::oracle::oracle_conv;
use crate::rng::SeededRng;
use crate::sparsity::{classify, moments, SparsityVerdict};
use crate::vandermonde::{reference, tv_mul_with, tv_solve_with, Path};
use crate::vector::{Index, SparseVec};

use super::gen::InstanceShape;
use super::{run_algo, Algo, Guards, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: u64,
    pub failed: u64,
    /// First failure, if any.
    pub first_failure: Option<String>,
}

#[derive(Default)]
struct Tally {
    passed: u64,
    failed: u64,
    first_failure: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn finish(self, name: &'static str) -> SuiteOutcome {
        SuiteOutcome {
            name,
            passed: self.passed,
            failed: self.failed,
            first_failure: self.first_failure,
        }
    }
}

/// Every nonnegative vector of length `len` with entries at most `max`.
pub fn sparsity_exhaustive(len: u32, max: u64) -> SuiteOutcome {
    let mut tally = Tally::default();
    let count = (max + 1).pow(len);
    for code in 0..count {
        let mut c = code;
        let mut pairs = Vec::new();
        for i in 0..len as Index {
            let v = c % (max + 1);
            c /= max + 1;
            pairs.push((i, v));
        }
        let v = SparseVec::from_pairs(len as Index, pairs).unwrap();
        let verdict = classify(&moments(&v), len as Index);
        let expect = match v.entries() {
            [] => SparsityVerdict::Zero,
            [(i, x)] => SparsityVerdict::One {
                position: *i,
                value: x.clone(),
            },
            _ => SparsityVerdict::Many,
        };
        tally.check(verdict == expect, || format!("{v:?} classified as {verdict:?}"));
    }
    tally.finish("sparsity-exhaustive")
}

/// `(h(x) + h(y) − h(x + y)) mod m ∈ Φ` for random hashes and keys.
pub fn hashing_additivity(rng: &mut SeededRng, samples: u64) -> SuiteOutcome {
    let mut tally = Tally::default();
    let per_hash = 100;
    for _ in 0..samples.div_ceil(per_hash) {
        let n = 1u64 << rng.gen_range(1..=40);
        let n = rng.gen_range(n / 2 + 1..=n);
        let m = rng.gen_range(1..=n.min(1 << 20));
        let h = sample_linear(n, m, rng).unwrap();
        for _ in 0..per_hash {
            let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let off = (h.eval(x) + h.eval(y) + m - h.eval(x + y) % m) % m;
            tally.check(h.phi_offsets().contains(&off), || format!("n={n} m={m} x={x} y={y} offset {off}"));
        }
    }
    tally.finish("hashing-additivity")
}

/// Fixed key pairs: a few structured ones and a few random ones.
pub fn key_pairs(rng: &mut SeededRng, n: Index) -> Vec<(Index, Index)> {
    let mut pairs = vec![(1, 0), (n - 1, 0), (n / 2, 0), (n - 1, n - 2)];
    for _ in 0..4 {
        let x = rng.gen_range(0..n);
        let mut y = rng.gen_range(0..n);
        while y == x {
            y = rng.gen_range(0..n);
        }
        pairs.push((x, y));
    }
    pairs
}

/// Largest empirical `Pr[h(x) − h(y) ≡ q (mod m)]` over `q`, for linear hashes.
pub fn max_difference_frequency(rng: &mut SeededRng, n: Index, m: Index, x: Index, y: Index, samples: u64) -> f64 {
    let mut counts = vec![0u64; m as usize];
    for _ in 0..samples {
        let h = sample_linear(n, m, rng).unwrap();
        counts[((h.eval(x) + m - h.eval(y)) % m) as usize] += 1;
    }
    *counts.iter().max().unwrap() as f64 / samples as f64
}

/// Empirical `Pr[x ≡ y (mod p)]` for random primes `p ∈ [m, 2m]`.
pub fn prime_collision_frequency(rng: &mut SeededRng, m: Index, x: Index, y: Index, samples: u64) -> f64 {
    let mut hits = 0u64;
    for _ in 0..samples {
        let h = sample_prime_hash(m, rng).unwrap();
        hits += (h.eval(x) == h.eval(y)) as u64;
    }
    hits as f64 / samples as f64
}

/// Both frequency bounds with slack 8 at each `(n, m)`.
pub fn hashing_statistics(rng: &mut SeededRng, sizes: &[(Index, Index)], samples: u64) -> SuiteOutcome {
    let mut tally = Tally::default();
    for &(n, m) in sizes {
        for (x, y) in key_pairs(rng, n) {
            let f = max_difference_frequency(rng, n, m, x, y, samples);
            let bound = 8.0 / m as f64;
            tally.check(f <= bound, || format!("linear n={n} m={m} x={x} y={y}: {f} > {bound}"));
            let f = prime_collision_frequency(rng, m, x, y, samples);
            let bound = 8.0 * (n as f64).log2() / m as f64;
            tally.check(f <= bound, || format!("prime n={n} m={m} x={x} y={y}: {f} > {bound}"));
        }
    }
    tally.finish("hashing-statistics")
}

fn field_axioms_in(ctx: &ExtFieldCtx, rng: &mut SeededRng, samples: usize, tally: &mut Tally) {
    let p = ctx.p();
    for _ in 0..samples {
        let [a, b, c]: [ExtElem; 3] = std::array::from_fn(|_| ctx.random(rng));
        let ok = ctx.mul(&ctx.mul(&a, &b), &c) == ctx.mul(&a, &ctx.mul(&b, &c))
            && ctx.mul(&a, &b) == ctx.mul(&b, &a)
            && ctx.mul(&a, &ctx.add(&b, &c)) == ctx.add(&ctx.mul(&a, &b), &ctx.mul(&a, &c))
            && ctx.add(&ctx.sub(&a, &b), &b) == a
            && ctx.square(&a) == ctx.mul(&a, &a)
            && (a.is_zero() || ctx.mul(&a, &ctx.inv(&a).unwrap()) == ctx.one());
        tally.check(ok, || format!("axioms fail in F_{p}^{} for {a:?}, {b:?}, {c:?}", ctx.degree()));
    }
}

/// Ring axioms and inverses, irreducibility of the modulus and the order of `X + 1`.
pub fn field_checks(rng: &mut SeededRng, samples: usize) -> SuiteOutcome {
    let mut tally = Tally::default();
    for p in [3u64, 5, 7, 11, 13] {
        let ctx = ExtFieldCtx::new(p).unwrap();
        field_axioms_in(&ctx, rng, samples, &mut tally);
        if p <= 7 {
            let mut modulus = vec![0u64; p as usize];
            modulus[0] = (p - ctx.beta()) % p;
            modulus[p as usize - 1] = 1;
            tally.check(irreducible_by_trial(&modulus, p), || format!("X^{} - {} reducible mod {p}", p - 1, ctx.beta()));
        }
        // ω = X + 1 has order at least 2^p
        let cap = BigUint::from(1u64 << p);
        let order = multiplicative_order(&ctx, &ctx.omega(), &cap).unwrap();
        let ok = match &order {
            Order::Exact(o) => *o >= cap,
            Order::AtLeast(o) => *o >= cap,
        };
        tally.check(ok, || format!("order of X + 1 in F_{p}^{} is {order:?}", p - 1));
    }
    let f9 = ExtFieldCtx::new(3).unwrap();
    let order = multiplicative_order(&f9, &f9.omega(), &BigUint::from(100u32)).unwrap();
    tally.check(order == Order::Exact(8u32.into()), || format!("order of X + 1 in F_9 is {order:?}"));
    tally.finish("field")
}

/// Fast and quadratic Vandermonde paths against the Gaussian reference.
pub fn vandermonde_checks(rng: &mut SeededRng, sizes: &[usize], per_size: usize) -> SuiteOutcome {
    let mut tally = Tally::default();
    let ctx = ExtFieldCtx::new(7).unwrap();
    for &t in sizes {
        for _ in 0..per_size {
            let mut seen = BTreeSet::new();
            while seen.len() < t {
                seen.insert(ctx.random(rng));
            }
            let points: Vec<ExtElem> = seen.into_iter().collect();
            let x: Vec<ExtElem> = (0..t).map(|_| ctx.random(rng)).collect();
            let fast = tv_mul_with(&ctx, &points, &x, Path::Fast).unwrap();
            let quad = tv_mul_with(&ctx, &points, &x, Path::Quadratic).unwrap();
            let mut ok = fast == quad && tv_solve_with(&ctx, &points, &fast, Path::Fast).unwrap() == x;
            ok &= tv_solve_with(&ctx, &points, &quad, Path::Quadratic).unwrap() == x;
            if t <= 64 {
                ok &= reference::tv_mul(&ctx, &points, &x) == quad;
            }
            if t <= 17 {
                ok &= reference::tv_solve(&ctx, &points, &quad).unwrap() == x;
            }
            tally.check(ok, || format!("Vandermonde paths disagree at t = {t}"));
        }
    }
    tally.finish("vandermonde")
}

/// Every engine against the oracle; Las Vegas engines run with `0 ≤ C ≤ A⋆B` monitored.
pub fn oracle_equivalence(rng: &mut SeededRng, instances: usize, inject_fault: bool) -> SuiteOutcome {
    let mut tally = Tally::default();
    let shape = InstanceShape {
        max_length: 1 << 16,
        max_nnz: 24,
        max_value: 1 << 16,
        max_pairs: 64,
    };
    for _ in 0..instances {
        let (a, b) = shape.sample(rng);
        let truth = oracle_conv(&a, &b).unwrap();
        for algo in Algo::ALL {
            let opts = RunOptions {
                seed: rng.gen(),
                threads: 1,
                // ample for these sizes; a corrupted engine that never balances its mass stops here
                guards: Guards {
                    buckets: 1 << 14,
                    ..Guards::default()
                },
                monitor: algo.is_las_vegas().then(|| truth.clone()),
                inject_fault,
                ..RunOptions::default()
            };
            let got = run_algo(algo, &a, &b, &opts);
            let ok = matches!(&got, Ok(r) if r.product == truth);
            tally.check(ok, || match got {
                Ok(_) => format!("{algo} disagrees with the oracle on n = {}", a.length()),
                Err(e) => format!("{algo} failed on n = {}: {e}", a.length()),
            });
        }
    }
    tally.finish("oracle-equivalence")
}

/// A corrupted engine must be caught by the monitor.
pub fn fault_detection(rng: &mut SeededRng, instances: usize) -> SuiteOutcome {
    let mut tally = Tally::default();
    for _ in 0..instances {
        let n = rng.gen_range(64..4096);
        let a = super::gen::random_vector(rng, n, 6, 50);
        let b = super::gen::random_vector(rng, n, 6, 50);
        let truth = oracle_conv(&a, &b).unwrap();
        for algo in [Algo::LvSimple, Algo::LvFast] {
            let opts = RunOptions {
                seed: rng.gen(),
                monitor: Some(truth.clone()),
                inject_fault: true,
                ..RunOptions::default()
            };
            let caught = match run_algo(algo, &a, &b, &opts) {
                Err(e) => e.kind() == "invariant",
                Ok(r) => r.product != truth,
            };
            tally.check(caught, || format!("{algo}: injected fault went unnoticed"));
        }
    }
    tally.finish("fault-detection")
}

pub fn run_selftest(level: Level, inject_fault: bool, seed: u64, out: &mut dyn Write) -> Vec<SuiteOutcome> {
    let mut rng = SeededRng::new(seed);
    let full = level == Level::Full;
    let mut outcomes = Vec::new();
    let mut record = |o: SuiteOutcome, out: &mut dyn Write| {
        let _ = writeln!(out, "suite {}: {} passed, {} failed", o.name, o.passed, o.failed);
        if let Some(f) = &o.first_failure {
            let _ = writeln!(out, "  first failure: {f}");
        }
        outcomes.push(o);
    };
    record(if full { sparsity_exhaustive(6, 3) } else { sparsity_exhaustive(4, 3) }, out);
    record(hashing_additivity(&mut rng, if full { 1_000_000 } else { 20_000 }), out);
    let sizes: &[(Index, Index)] = if full { &[(1 << 16, 251), (1 << 20, 1021)] } else { &[(1 << 16, 251)] };
    record(hashing_statistics(&mut rng, sizes, if full { 100_000 } else { 5_000 }), out);
    record(field_checks(&mut rng, if full { 2000 } else { 200 }), out);
    let vsizes: &[usize] = if full { &[1, 2, 3, 17, 64, 257] } else { &[1, 2, 3, 17, 64] };
    record(vandermonde_checks(&mut rng, vsizes, if full { 20 } else { 3 }), out);
    record(oracle_equivalence(&mut rng, if full { 100 } else { 10 }, inject_fault), out);
    if full {
        record(fault_detection(&mut rng, 10), out);
    }
    outcomes
}

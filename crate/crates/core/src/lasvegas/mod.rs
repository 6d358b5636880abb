//! Las Vegas sparse convolution of nonnegative vectors.
//!
//! Every engine grows an under-approximation `C ≤ A⋆B` from hashed bucket
//! moments and stops once `‖C‖₁ = ‖A‖₁·‖B‖₁`. The answer is therefore
//! always exact; only the running time is random.

mod moments;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_traits::Zero;

use crate::dense::linear_conv_dense;
use crate::error::{Error, Result};
use crate::hashing::{hash_sparse, sample_linear, sample_prime_hash, BucketHash};
use crate::rng::SeededRng;
use crate::sparsity::{BucketMoments, SparsityVerdict};
use crate::vector::{ExactInt, Index, SparseVec, MAX_LENGTH};

use moments::{hashed_bucket_moments, moment_bound_bits, prime_count, Moments, Prepared};

/// Default cap on the number of buckets of one hashed vector.
pub const DEFAULT_MEMORY_GUARD: Index = 1 << 22;

/// Approximate working memory per bucket, used to turn a byte budget into a guard.
pub const BYTES_PER_BUCKET: u64 = 256;

/// Tunables shared by all engines.
#[derive(Debug, Clone, PartialEq)]
pub struct LvConfig {
    /// Exponent slack of the high-probability engine.
    pub epsilon: f64,
    /// Largest bucket count any hashed vector may have.
    pub memory_guard: Index,
    pub seed: u64,
}

impl Default for LvConfig {
    fn default() -> Self {
        LvConfig {
            epsilon: 0.5,
            memory_guard: DEFAULT_MEMORY_GUARD,
            seed: 0,
        }
    }
}

/// Counters gathered while an engine runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineReport {
    pub algorithm: &'static str,
    pub seed: u64,
    /// Outer bucket counts in the order they were visited.
    pub m_values: Vec<Index>,
    pub approx_calls: u64,
    pub residual_calls: u64,
    pub approx_time: Duration,
    pub residual_time: Duration,
    pub output_nnz: usize,
    pub elapsed: Duration,
}

impl EngineReport {
    pub fn max_m(&self) -> Index {
        self.m_values.iter().copied().max().unwrap_or(0)
    }
}

/// The running approximation `C`, kept as a map with its total mass.
#[derive(Debug, Clone, Default)]
pub struct Approximation {
    map: HashMap<Index, ExactInt>,
    mass: ExactInt,
    changed: Vec<Index>,
}

impl Approximation {
    pub fn mass(&self) -> &ExactInt {
        &self.mass
    }

    pub fn nnz(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, &ExactInt)> + '_ {
        self.map.iter().map(|(i, v)| (*i, v))
    }

    pub fn get(&self, z: Index) -> Option<&ExactInt> {
        self.map.get(&z)
    }

    /// Positions written since the previous checkpoint.
    pub fn changed(&self) -> &[Index] {
        &self.changed
    }

    fn merge_max(&mut self, r: &SparseVec) {
        for (z, v) in r.iter() {
            let cur = self.map.entry(z).or_default();
            if v > cur {
                self.mass += v - &*cur;
                *cur = v.clone();
                self.changed.push(z);
            }
        }
    }

    fn add(&mut self, r: &SparseVec) {
        for (z, v) in r.iter() {
            self.mass += v;
            self.changed.push(z);
            let cur = self.map.entry(z).or_default();
            *cur += v;
            if cur.is_zero() {
                self.map.remove(&z);
            }
        }
    }

    fn to_sparse(&self, length: Index) -> SparseVec {
        let raw = self.map.iter().filter(|(_, v)| !v.is_zero()).map(|(i, v)| (*i, v.clone())).collect();
        SparseVec::from_unsorted_unchecked(length, raw)
    }
}

/// Observer called whenever `C` changes; `c.changed()` lists the positions
/// written since the previous call.
pub trait Monitor {
    fn check(&mut self, stage: &'static str, c: &Approximation) -> Result<()>;
}

/// Checks `0 ≤ C ≤ A⋆B` against a known product.
#[derive(Debug, Clone)]
pub struct OracleMonitor {
    truth: HashMap<Index, ExactInt>,
    checks: u64,
}

impl OracleMonitor {
    pub fn new(truth: &SparseVec) -> Self {
        OracleMonitor {
            truth: truth.iter().map(|(i, v)| (i, v.clone())).collect(),
            checks: 0,
        }
    }

    pub fn checks(&self) -> u64 {
        self.checks
    }
}

impl Monitor for OracleMonitor {
    fn check(&mut self, stage: &'static str, c: &Approximation) -> Result<()> {
        self.checks += 1;
        let zero = ExactInt::zero();
        for &z in c.changed() {
            let v = c.get(z).unwrap_or(&zero);
            let bound = self.truth.get(&z).unwrap_or(&zero);
            if v.sign() == num_bigint::Sign::Minus || v > bound {
                return Err(Error::Invariant(format!(
                    "{stage}: C[{z}] = {v} is outside [0, {bound}]"
                )));
            }
        }
        Ok(())
    }
}

/// Per-call state: inputs, derived bounds, and the cached result for `m ≤ 2`,
/// where every hash sends everything to one bucket.
struct Problem<'a> {
    a: &'a SparseVec,
    b: &'a SparseVec,
    out_len: Index,
    target: ExactInt,
    bound_bits: u64,
    single_bucket: Option<SparseVec>,
    prepared: Option<(Prepared, Prepared)>,
}

impl<'a> Problem<'a> {
    fn new(a: &'a SparseVec, b: &'a SparseVec) -> Result<Self> {
        for v in [a, b] {
            if let Some(i) = v.first_negative() {
                return Err(Error::NegativeEntry(i));
            }
        }
        let out_len = if a.length() == 0 || b.length() == 0 {
            0
        } else {
            a.length() + b.length() - 1
        };
        Ok(Problem {
            a,
            b,
            out_len,
            target: a.l1() * b.l1(),
            bound_bits: moment_bound_bits(a, b, out_len.max(1)),
            single_bucket: None,
            prepared: None,
        })
    }

    /// Residues of both inputs, enough for residual moments too.
    fn prepared(&mut self) -> Result<&(Prepared, Prepared)> {
        if self.prepared.is_none() {
            let count = prime_count(self.bound_bits + 1)?;
            self.prepared = Some((Prepared::new(self.a, count), Prepared::new(self.b, count)));
        }
        Ok(self.prepared.as_ref().unwrap())
    }

    fn trivial(&self) -> bool {
        self.a.is_zero() || self.b.is_zero()
    }

    /// `log₂ max(n', 4)`.
    fn log_n(&self) -> f64 {
        (self.out_len.max(4) as f64).log2()
    }
}

fn ceil_pos(x: f64) -> u64 {
    (x.ceil() as u64).max(1)
}

/// `⌈2·log₂ m⌉`, at least one.
fn simple_reps(m: Index) -> u64 {
    ceil_pos(2.0 * (m as f64).log2())
}

/// Runs the engines with one RNG, one configuration and optional checks.
pub struct Session {
    cfg: LvConfig,
    rng: SeededRng,
    report: EngineReport,
    monitor: Option<Box<dyn Monitor>>,
    fault: bool,
}

impl Session {
    pub fn new(cfg: LvConfig) -> Self {
        let rng = SeededRng::new(cfg.seed);
        Session::with_rng(cfg, rng)
    }

    pub fn with_rng(cfg: LvConfig, rng: SeededRng) -> Self {
        let report = EngineReport {
            seed: rng.seed(),
            ..Default::default()
        };
        Session {
            cfg,
            rng,
            report,
            monitor: None,
            fault: false,
        }
    }

    pub fn config(&self) -> &LvConfig {
        &self.cfg
    }

    pub fn report(&self) -> &EngineReport {
        &self.report
    }

    pub fn set_monitor(&mut self, monitor: Box<dyn Monitor>) {
        self.monitor = Some(monitor);
    }

    pub fn take_monitor(&mut self) -> Option<Box<dyn Monitor>> {
        self.monitor.take()
    }

    /// Debug hook: the first entry recovered by each hashing step is reported
    /// at a neighbouring index (with doubled value when the output has length 1).
    pub fn inject_fault(&mut self, on: bool) {
        self.fault = on;
    }

    fn checkpoint(&mut self, stage: &'static str, c: &mut Approximation) -> Result<()> {
        let outcome = match self.monitor.as_mut() {
            Some(m) => m.check(stage, c),
            None => Ok(()),
        };
        c.changed.clear();
        outcome
    }

    fn check_guard(&self, what: &'static str, m: Index) -> Result<()> {
        if m > self.cfg.memory_guard {
            return Err(Error::guard(what, m, self.cfg.memory_guard));
        }
        Ok(())
    }

    fn start(&mut self, algorithm: &'static str) {
        self.report = EngineReport {
            algorithm,
            seed: self.rng.seed(),
            ..Default::default()
        };
    }

    fn finish(&mut self, out: SparseVec, started: Instant) -> SparseVec {
        self.report.output_nnz = out.nnz();
        self.report.elapsed = started.elapsed();
        out
    }

    /// Entries recovered from isolated buckets, summed per position.
    fn recover(&self, buckets: Vec<(usize, Moments)>, out_len: Index) -> SparseVec {
        let mut raw = Vec::new();
        let mut faulted = false;
        for (_, mut mom) in buckets {
            if self.fault && !faulted {
                if let SparsityVerdict::One { position, .. } = mom.classify(out_len) {
                    // the moments of the same entry moved one step, staying in range
                    let mut big = mom.big();
                    if position + 1 < out_len {
                        big.z += &big.y * 2u32 + &big.x;
                        big.y += &big.x;
                    } else if position > 0 {
                        big.z += &big.x;
                        big.z -= &big.y * 2u32;
                        big.y -= &big.x;
                    } else {
                        big.x *= 2u32;
                    }
                    mom = Moments::Big(big);
                    faulted = true;
                }
            }
            if let SparsityVerdict::One { position, value } = mom.classify(out_len) {
                raw.push((position, value));
            }
        }
        SparseVec::from_unsorted_unchecked(out_len, raw)
    }

    fn exact_dense(&self, p: &Problem) -> Result<SparseVec> {
        let guard = self.cfg.memory_guard;
        let prod = linear_conv_dense(&p.a.to_dense(guard)?, &p.b.to_dense(guard)?)?;
        SparseVec::from_dense(&prod, p.out_len)
    }

    fn approx(&mut self, p: &mut Problem, m: Index) -> Result<SparseVec> {
        if m == 0 {
            return Err(Error::Contract("bucket count must be at least 1".into()));
        }
        self.check_guard("hashed vector", m)?;
        let t0 = Instant::now();
        let r = if p.trivial() {
            SparseVec::zeros(p.out_len)
        } else if m >= p.out_len {
            self.exact_dense(p)?
        } else if m <= 2 && p.single_bucket.is_some() {
            p.single_bucket.clone().unwrap()
        } else {
            let h = sample_linear(p.out_len, m, &mut self.rng)?;
            let bits = p.bound_bits;
            let (pa, pb) = p.prepared()?;
            let buckets = hashed_bucket_moments(&h, pa, pb, None, bits)?;
            let r = self.recover(buckets, p.out_len);
            if m <= 2 {
                p.single_bucket = Some(r.clone());
            }
            r
        };
        self.report.approx_calls += 1;
        self.report.approx_time += t0.elapsed();
        Ok(r)
    }

    fn residual(&mut self, p: &mut Problem, c: &SparseVec, m: Index) -> Result<SparseVec> {
        if m < 2 {
            return Err(Error::Contract(format!("residual recovery needs m ≥ 2, got {m}")));
        }
        let t0 = Instant::now();
        let h = sample_prime_hash(m, &mut self.rng)?;
        self.check_guard("hashed vector", h.buckets())?;
        let bits = p.bound_bits + 1;
        let (pa, pb) = p.prepared()?;
        let buckets = hashed_bucket_moments(&h, pa, pb, Some(c), bits)?;
        let r = self.recover(buckets, p.out_len);
        self.report.residual_calls += 1;
        self.report.residual_time += t0.elapsed();
        Ok(r)
    }

    /// One hashed approximation `R ≤ A⋆B` with `m` buckets.
    pub fn approx_conv_linear(&mut self, a: &SparseVec, b: &SparseVec, m: Index) -> Result<SparseVec> {
        let mut p = Problem::new(a, b)?;
        self.approx(&mut p, m)
    }

    /// Entries of `A⋆B - C` isolated by a random prime hash into `[m, 2m]` buckets.
    pub fn residual_recover(&mut self, a: &SparseVec, b: &SparseVec, c: &SparseVec, m: Index) -> Result<SparseVec> {
        let mut p = Problem::new(a, b)?;
        self.residual(&mut p, c, m)
    }

    /// Doubles `m`; at each size keeps the coordinate-wise maximum of
    /// `⌈2 log₂ m⌉` approximations.
    pub fn simple(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        let started = Instant::now();
        self.start("lv-simple");
        let mut p = Problem::new(a, b)?;
        let mut m: Index = 1;
        loop {
            self.report.m_values.push(m);
            let mut c = Approximation::default();
            for _ in 0..simple_reps(m) {
                let r = self.approx(&mut p, m)?;
                c.merge_max(&r);
                self.checkpoint("lv-simple", &mut c)?;
            }
            if c.mass == p.target {
                return Ok(self.finish(c.to_sparse(p.out_len), started));
            }
            m = m.checked_mul(2).ok_or(Error::LengthTooLarge(2 * m as u128))?;
        }
    }

    /// Sweeps `m = 2^{μ-ν}` with `⌈μ·2^{ν/(1+ε)}⌉` repetitions, keeping one
    /// running maximum and checking the mass after every repetition.
    pub fn high_prob(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        let eps = self.cfg.epsilon;
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Contract(format!("epsilon must be positive, got {eps}")));
        }
        let started = Instant::now();
        self.start("lv-hp");
        let mut p = Problem::new(a, b)?;
        let mut c = Approximation::default();
        for mu in 0u32..63 {
            self.report.m_values.push(1 << mu);
            for nu in 0..=mu {
                let m: Index = 1 << (mu - nu);
                let reps = ceil_pos(mu as f64 * (nu as f64 / (1.0 + eps)).exp2());
                for _ in 0..reps {
                    let r = self.approx(&mut p, m)?;
                    c.merge_max(&r);
                    self.checkpoint("lv-hp", &mut c)?;
                    if c.mass == p.target {
                        return Ok(self.finish(c.to_sparse(p.out_len), started));
                    }
                }
            }
        }
        Err(Error::LengthTooLarge(1 << 63))
    }

    /// Approximation rounds followed by residual recovery with fewer buckets.
    pub fn fast(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        let started = Instant::now();
        self.start("lv-fast");
        let out = self.fast_inner(a, b)?;
        Ok(self.finish(out, started))
    }

    fn fast_inner(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        let mut p = Problem::new(a, b)?;
        let log_n = p.log_n();
        let rounds = ceil_pos(3.0 * log_n.log2());
        let mut c = Approximation::default();
        let mut m: Index = 1;
        loop {
            self.report.m_values.push(m);
            for _ in 0..rounds {
                let r = self.approx(&mut p, m)?;
                c.merge_max(&r);
                self.checkpoint("lv-fast approximation", &mut c)?;
            }
            let m2 = ((m as f64 / log_n).ceil() as Index).max(2);
            for _ in 0..simple_reps(m) {
                if c.mass == p.target {
                    break;
                }
                let current = c.to_sparse(p.out_len);
                let r = self.residual(&mut p, &current, m2)?;
                c.add(&r);
                self.checkpoint("lv-fast residual", &mut c)?;
            }
            if c.mass == p.target {
                return Ok(c.to_sparse(p.out_len));
            }
            m = m.checked_mul(2).ok_or(Error::LengthTooLarge(2 * m as u128))?;
        }
    }

    /// Hashes the universe down to `‖A‖₀³·‖B‖₀³` and runs the fast engine on
    /// the six hashed products, so the cost no longer depends on the length.
    pub fn full(&mut self, a: &SparseVec, b: &SparseVec) -> Result<SparseVec> {
        let started = Instant::now();
        self.start("lv-full");
        let p = Problem::new(a, b)?;
        if p.trivial() {
            return Ok(self.finish(SparseVec::zeros(p.out_len), started));
        }
        let ka = a.nnz() as u128;
        let kb = b.nnz() as u128;
        let m = ka.pow(3) * kb.pow(3);
        if m >= p.out_len as u128 {
            let out = self.fast_inner(a, b)?;
            return Ok(self.finish(out, started));
        }
        if m > MAX_LENGTH as u128 {
            return Err(Error::LengthTooLarge(m));
        }
        let m = m as Index;
        let mut c = Approximation::default();
        loop {
            self.report.m_values.push(m);
            let h = sample_linear(p.out_len, m, &mut self.rng)?;
            let ha: Vec<SparseVec> = (0..3).map(|d| hash_sparse(&h, &a.derivative(d))).collect();
            let hb: Vec<SparseVec> = (0..3).map(|d| hash_sparse(&h, &b.derivative(d))).collect();
            // inner engines see different inputs; the outer monitor and fault do not apply
            let monitor = self.monitor.take();
            let fault = std::mem::replace(&mut self.fault, false);
            let mut prod = |i: usize, j: usize| self.fast_inner(&ha[i], &hb[j]);
            let terms = (|| -> Result<_> {
                Ok([
                    prod(0, 0)?,
                    prod(1, 0)?,
                    prod(0, 1)?,
                    prod(2, 0)?,
                    prod(1, 1)?,
                    prod(0, 2)?,
                ])
            })();
            self.monitor = monitor;
            self.fault = fault;
            let terms = terms?;
            let mut buckets: HashMap<Index, BucketMoments> = HashMap::new();
            let weights: [(usize, u32); 6] = [(0, 1), (1, 1), (1, 1), (2, 1), (2, 2), (2, 1)];
            for (t, (d, w)) in terms.iter().zip(weights) {
                for (k, v) in t.iter() {
                    let e = buckets.entry(k % m).or_default();
                    let slot = match d {
                        0 => &mut e.x,
                        1 => &mut e.y,
                        _ => &mut e.z,
                    };
                    *slot += v * w;
                }
            }
            let mut sorted: Vec<(Index, BucketMoments)> = buckets.into_iter().collect();
            sorted.sort_unstable_by_key(|(k, _)| *k);
            let r = self.recover(sorted.into_iter().map(|(k, v)| (k as usize, Moments::Big(v))).collect(), p.out_len);
            c.merge_max(&r);
            self.checkpoint("lv-full", &mut c)?;
            if c.mass == p.target {
                return Ok(self.finish(c.to_sparse(p.out_len), started));
            }
        }
    }
}

/// One approximation with `m` buckets, drawing from `rng`.
pub fn approx_conv_linear(a: &SparseVec, b: &SparseVec, m: Index, rng: &mut SeededRng) -> Result<SparseVec> {
    Session::with_rng(LvConfig::default(), rng.fork()).approx_conv_linear(a, b, m)
}

pub fn residual_recover(a: &SparseVec, b: &SparseVec, c: &SparseVec, m: Index, rng: &mut SeededRng) -> Result<SparseVec> {
    Session::with_rng(LvConfig::default(), rng.fork()).residual_recover(a, b, c, m)
}

pub fn simple_las_vegas(a: &SparseVec, b: &SparseVec, rng: &mut SeededRng) -> Result<SparseVec> {
    Session::with_rng(LvConfig::default(), rng.fork()).simple(a, b)
}

pub fn high_prob_las_vegas(a: &SparseVec, b: &SparseVec, epsilon: f64, rng: &mut SeededRng) -> Result<SparseVec> {
    let cfg = LvConfig {
        epsilon,
        ..LvConfig::default()
    };
    Session::with_rng(cfg, rng.fork()).high_prob(a, b)
}

pub fn fast_las_vegas(a: &SparseVec, b: &SparseVec, rng: &mut SeededRng) -> Result<SparseVec> {
    Session::with_rng(LvConfig::default(), rng.fork()).fast(a, b)
}

/// The length-independent engine.
pub fn sparse_conv(a: &SparseVec, b: &SparseVec, rng: &mut SeededRng) -> Result<SparseVec> {
    Session::with_rng(LvConfig::default(), rng.fork()).full(a, b)
}

#[cfg(test)]
mod tests;

//! Timing runs over a geometric range of output sizes.

use std::io::{self, Write};
use std::time::Duration;

use crate::error::Error;
use crate::oracle::oracle_conv_guarded;
use crate::rng::SeededRng;
use crate::vector::{Index, SparseVec};

use super::gen::random_vector;
use super::{run_algo, Algo, CliError, Guards, RunOptions};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: Index,
    pub t_min: u64,
    pub t_max: u64,
    pub steps: usize,
    pub algos: Vec<Algo>,
    pub reps: usize,
    pub seed: u64,
    pub max_value: u64,
    pub guards: Guards,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub algorithm: Algo,
    pub n: Index,
    pub nnz_a: usize,
    pub nnz_b: usize,
    /// `‖A ⋆ B‖₀`.
    pub t: usize,
    /// Engine seed; `None` for engines that draw no randomness.
    pub seed: Option<u64>,
    pub wall: Duration,
    pub max_m: Index,
    pub verified: bool,
}

/// Target sizes `t_min·r^i`, `i < steps`, ending at `t_max`.
pub fn targets(t_min: u64, t_max: u64, steps: usize) -> Vec<u64> {
    if steps <= 1 || t_max <= t_min {
        return vec![t_min];
    }
    let ratio = (t_max as f64 / t_min as f64).powf(1.0 / (steps - 1) as f64);
    let mut out: Vec<u64> = (0..steps).map(|i| (t_min as f64 * ratio.powi(i as i32)).round() as u64).collect();
    out.dedup();
    out
}

/// Checks `c` against the oracle when affordable, else by total mass.
pub fn verify(a: &SparseVec, b: &SparseVec, c: &SparseVec, guards: &Guards) -> Result<bool, Error> {
    match oracle_conv_guarded(a, b, guards.oracle_pairs) {
        Ok(expect) => Ok(&expect == c),
        Err(Error::Guard { .. }) => Ok(c.is_nonnegative() && c.l1() == a.l1() * b.l1()),
        Err(e) => Err(e),
    }
}

/// Inputs with `⌈√t⌉` entries each, so that `‖A ⋆ B‖₀ ≈ t` when `n ≫ t`.
pub fn instance(rng: &mut SeededRng, n: Index, t: u64, max_value: u64) -> (SparseVec, SparseVec) {
    let k = (t as f64).sqrt().ceil() as usize;
    (random_vector(rng, n, k, max_value), random_vector(rng, n, k, max_value))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, CliError> {
    let mut rng = SeededRng::new(cfg.seed);
    let mut records = Vec::new();
    for target in targets(cfg.t_min, cfg.t_max, cfg.steps) {
        let (a, b) = instance(&mut rng, cfg.n, target, cfg.max_value);
        for &algo in &cfg.algos {
            for rep in 0..cfg.reps.max(1) {
                let seed = cfg.seed.wrapping_add(rep as u64);
                let opts = RunOptions {
                    seed,
                    guards: cfg.guards,
                    ..RunOptions::default()
                };
                let run = run_algo(algo, &a, &b, &opts)?;
                if !verify(&a, &b, &run.product, &cfg.guards)? {
                    return Err(Error::Invariant(format!("{algo} returned a wrong product at t ≈ {target}")).into());
                }
                records.push(BenchRecord {
                    algorithm: algo,
                    n: cfg.n,
                    nnz_a: a.nnz(),
                    nnz_b: b.nnz(),
                    t: run.product.nnz(),
                    seed: algo.is_las_vegas().then_some(seed),
                    wall: run.elapsed,
                    max_m: run.max_m,
                    verified: true,
                });
            }
        }
    }
    Ok(records)
}

pub const TABLE_HEADER: &str = "algorithm\tn\tnnz_a\tnnz_b\tt\tseed\twall_s\tmax_m\tverified";

pub fn write_table<W: Write>(records: &[BenchRecord], w: &mut W) -> io::Result<()> {
    writeln!(w, "{TABLE_HEADER}")?;
    for r in records {
        let seed = r.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
            r.algorithm,
            r.n,
            r.nnz_a,
            r.nnz_b,
            r.t,
            seed,
            r.wall.as_secs_f64(),
            r.max_m,
            r.verified
        )?;
    }
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope of `log₂(median wall)` against `log₂ t` over the rows of one engine,
/// grouping the repetitions of each instance.
pub fn slope(records: &[BenchRecord], algo: Algo) -> Option<f64> {
    let mut groups: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == algo) {
        match groups.iter_mut().find(|g| (g.0, g.1, g.2) == (r.nnz_a, r.nnz_b, r.t)) {
            Some(g) => g.3.push(r.wall.as_secs_f64()),
            None => groups.push((r.nnz_a, r.nnz_b, r.t, vec![r.wall.as_secs_f64()])),
        }
    }
    let points: Vec<(f64, f64)> = groups
        .iter_mut()
        .filter(|g| g.2 > 0)
        .map(|g| ((g.2 as f64).log2(), median(&mut g.3).max(1e-9).log2()))
        .collect();
    least_squares_slope(&points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_targets() {
        assert_eq!(targets(256, 65536, 5), vec![256, 1024, 4096, 16384, 65536]);
        assert_eq!(targets(8, 8, 3), vec![8]);
        assert_eq!(targets(4, 16, 1), vec![4]);
    }

    #[test]
    fn slopes() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 + 1.5 * i as f64)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    #[test]
    fn small_bench_rows_are_verified() {
        let cfg = BenchConfig {
            n: 1 << 16,
            t_min: 4,
            t_max: 64,
            steps: 3,
            algos: vec![Algo::LvFast, Algo::Det],
            reps: 2,
            seed: 5,
            max_value: 100,
            guards: Guards::default(),
        };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 2);
        assert!(rows.iter().all(|r| r.verified));
        assert!(rows.iter().filter(|r| r.algorithm == Algo::Det).all(|r| r.seed.is_none()));
        let mut out = Vec::new();
        write_table(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.lines().skip(1).all(|l| l.split('\t').count() == 9 && l.ends_with("true")));
        assert!(slope(&rows, Algo::LvFast).is_some());
    }
}

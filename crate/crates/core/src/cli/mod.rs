//! Command-line front end: vector files, `multiply`, `selftest` and `bench`.
//!
//! Exit codes: 0 success, 2 parse, 3 guard, 4 contract violation (including
//! negative or out-of-range input), 5 internal invariant. Failures print one
//! line `error kind=<kind>: <message>` to stderr.

pub mod bench;
pub mod format;
pub mod gen;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::deterministic::Deterministic;
use crate::dense::linear_conv_dense;
use crate::error::Error;
use crate::lasvegas::{LvConfig, OracleMonitor, Session, BYTES_PER_BUCKET};
use crate::oracle::{oracle_conv_guarded, ORACLE_GUARD};
use crate::vector::{Index, SparseVec};

pub use format::{parse_vector, read_vector, write_vector, ParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_CONTRACT: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;

/// Memory budget when `--guard-mem` is not given.
pub const DEFAULT_GUARD_BYTES: u64 = 1 << 30;

/// Working memory per entry of a densely multiplied vector.
pub const DENSE_BYTES_PER_ENTRY: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("{0}")]
    Engine(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Io(..) => "io",
            CliError::Usage(_) => "usage",
            CliError::Engine(e) => match e {
                Error::Guard { .. } | Error::LengthTooLarge(_) => "guard",
                Error::NegativeEntry(_) => "negative-entry",
                Error::IndexOutOfRange { .. } => "index-out-of-range",
                Error::Domain(_) | Error::Contract(_) => "contract",
                Error::Invariant(_) => "invariant",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(..) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Engine(e) => match e {
                Error::Guard { .. } | Error::LengthTooLarge(_) => EXIT_GUARD,
                Error::Invariant(_) => EXIT_INVARIANT,
                _ => EXIT_CONTRACT,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Algo {
    Det,
    LvSimple,
    LvHp,
    LvFast,
    LvFull,
    Dense,
    Oracle,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::Det,
        Algo::LvSimple,
        Algo::LvHp,
        Algo::LvFast,
        Algo::LvFull,
        Algo::Dense,
        Algo::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Det => "det",
            Algo::LvSimple => "lv-simple",
            Algo::LvHp => "lv-hp",
            Algo::LvFast => "lv-fast",
            Algo::LvFull => "lv-full",
            Algo::Dense => "dense",
            Algo::Oracle => "oracle",
        }
    }

    pub fn is_las_vegas(self) -> bool {
        matches!(self, Algo::LvSimple | Algo::LvHp | Algo::LvFast | Algo::LvFull)
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Size limits derived from a memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guards {
    /// Largest bucket count of a hashed vector.
    pub buckets: Index,
    /// Largest length the dense engine materializes.
    pub dense_length: Index,
    /// Largest `‖A‖₀·‖B‖₀` the oracle enumerates.
    pub oracle_pairs: u128,
}

impl Guards {
    pub fn from_bytes(bytes: u64) -> Self {
        Guards {
            buckets: (bytes / BYTES_PER_BUCKET).max(1),
            dense_length: (bytes / DENSE_BYTES_PER_ENTRY).max(1),
            oracle_pairs: ORACLE_GUARD,
        }
    }
}

impl Default for Guards {
    fn default() -> Self {
        Guards::from_bytes(DEFAULT_GUARD_BYTES)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub epsilon: f64,
    pub guards: Guards,
    pub threads: usize,
    /// Known product checked against every intermediate of the Las Vegas engines.
    pub monitor: Option<SparseVec>,
    pub inject_fault: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            epsilon: LvConfig::default().epsilon,
            guards: Guards::default(),
            threads: crate::deterministic::threads_from_env(),
            monitor: None,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub product: SparseVec,
    pub elapsed: Duration,
    /// Largest outer bucket count for the Las Vegas engines, largest
    /// superset for the deterministic one, 0 otherwise.
    pub max_m: Index,
    /// `key=value` fields describing the run.
    pub summary: String,
}

/// Runs one engine on nonnegative inputs.
pub fn run_algo(algo: Algo, a: &SparseVec, b: &SparseVec, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    for v in [a, b] {
        if let Some(i) = v.first_negative() {
            return Err(Error::NegativeEntry(i).into());
        }
    }
    let started = Instant::now();
    let (product, max_m, extra) = match algo {
        Algo::Det => {
            let mut det = Deterministic::new(opts.threads)?;
            let c = det.conv(a, b)?;
            let r = det.report();
            let max_t = r.superset_sizes.iter().copied().max().unwrap_or(0) as Index;
            let primes = r.plans.last().map_or(0, |p| p.primes.len());
            let extra = format!(
                "threads={} depth={} dense_calls={} max_superset={max_t} top_primes={primes}",
                opts.threads, r.max_depth, r.dense_calls
            );
            (c, max_t, extra)
        }
        Algo::Dense => {
            let n = a.length().max(b.length());
            let out_len = if a.length() == 0 || b.length() == 0 { 0 } else { a.length() + b.length() - 1 };
            let guard = opts.guards.dense_length;
            if n > guard {
                return Err(Error::guard("dense length", n, guard).into());
            }
            let c = linear_conv_dense(&a.to_dense(guard)?, &b.to_dense(guard)?)?;
            (SparseVec::from_dense(&c, out_len)?, 0, String::new())
        }
        Algo::Oracle => (oracle_conv_guarded(a, b, opts.guards.oracle_pairs)?, 0, String::new()),
        _ => {
            let cfg = LvConfig {
                epsilon: opts.epsilon,
                memory_guard: opts.guards.buckets,
                seed: opts.seed,
            };
            let mut s = Session::new(cfg);
            if let Some(truth) = &opts.monitor {
                s.set_monitor(Box::new(OracleMonitor::new(truth)));
            }
            s.inject_fault(opts.inject_fault);
            let c = match algo {
                Algo::LvSimple => s.simple(a, b),
                Algo::LvHp => s.high_prob(a, b),
                Algo::LvFast => s.fast(a, b),
                _ => s.full(a, b),
            }?;
            let r = s.report();
            let extra = format!(
                "seed={} max_m={} approx_calls={} residual_calls={}",
                r.seed,
                r.max_m(),
                r.approx_calls,
                r.residual_calls
            );
            (c, r.max_m(), extra)
        }
    };
    let elapsed = started.elapsed();
    let mut summary = format!(
        "algo={} n={} nnz_a={} nnz_b={} t={}",
        algo,
        a.length().max(b.length()),
        a.nnz(),
        b.nnz(),
        product.nnz()
    );
    if !extra.is_empty() {
        summary.push(' ');
        summary.push_str(&extra);
    }
    summary.push_str(&format!(" elapsed_ms={:.3}", elapsed.as_secs_f64() * 1e3));
    Ok(RunOutcome {
        product,
        elapsed,
        max_m,
        summary,
    })
}

/// A seed given as a number or `random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedArg {
    Fixed(u64),
    Random,
}

impl SeedArg {
    pub fn resolve(self) -> u64 {
        match self {
            SeedArg::Fixed(s) => s,
            SeedArg::Random => rand::thread_rng().gen(),
        }
    }
}

impl std::str::FromStr for SeedArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(SeedArg::Random);
        }
        s.parse().map(SeedArg::Fixed).map_err(|_| format!("seed must be an integer or `random`, got `{s}`"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparseconv", version, about = "Output-sensitive convolution of sparse nonnegative integer vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convolve two vector files.
    Multiply {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::LvFull)]
        algo: Algo,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Integer seed or `random`.
        #[arg(long, default_value = "0")]
        seed: SeedArg,
        /// Exponent slack of lv-hp.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Memory budget in bytes for hashed and dense vectors.
        #[arg(long, value_name = "BYTES")]
        guard_mem: Option<u64>,
    },
    /// Run the built-in invariant suites.
    Selftest {
        #[arg(value_enum, default_value_t = selftest::Level::Quick)]
        level: selftest::Level,
        /// Corrupt the Las Vegas engines; the run must then fail.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long, default_value = "0")]
        seed: SeedArg,
    },
    /// Time engines over a range of output sizes and print a TSV table.
    Bench {
        #[arg(long, default_value_t = 1 << 24)]
        n: Index,
        #[arg(long, default_value_t = 256)]
        t_min: u64,
        #[arg(long, default_value_t = 65536)]
        t_max: u64,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "lv-fast")]
        algos: Vec<Algo>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value = "0")]
        seed: SeedArg,
        /// Largest input value.
        #[arg(long, default_value_t = 1 << 16)]
        max_value: u64,
        /// Table file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_name = "BYTES")]
        guard_mem: Option<u64>,
    },
}

fn report_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let _ = writeln!(err, "error kind={}: {e}", e.kind());
    e.exit_code()
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => report_error(err, &e),
    }
}

fn run(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Multiply {
            a,
            b,
            algo,
            out: out_path,
            seed,
            epsilon,
            guard_mem,
        } => {
            let va = read_vector(&a)?;
            let vb = read_vector(&b)?;
            let opts = RunOptions {
                seed: seed.resolve(),
                epsilon,
                guards: guard_mem.map(Guards::from_bytes).unwrap_or_default(),
                ..RunOptions::default()
            };
            let outcome = run_algo(algo, &va, &vb, &opts)?;
            match out_path {
                Some(p) => {
                    write_vector(&p, &outcome.product)?;
                    let _ = writeln!(out, "{}", outcome.summary);
                }
                None => {
                    let text = format::format_vector(&outcome.product)?;
                    let _ = write!(out, "{text}");
                    let _ = writeln!(err, "{}", outcome.summary);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Selftest {
            level,
            inject_fault,
            seed,
        } => {
            let outcomes = selftest::run_selftest(level, inject_fault, seed.resolve(), out);
            let failed: u64 = outcomes.iter().map(|o| o.failed).sum();
            let _ = writeln!(
                out,
                "selftest {}: {} suites, {failed} failures",
                if failed == 0 { "passed" } else { "FAILED" },
                outcomes.len()
            );
            Ok(if failed == 0 { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::Bench {
            n,
            t_min,
            t_max,
            steps,
            algos,
            reps,
            seed,
            max_value,
            out: out_path,
            guard_mem,
        } => {
            let cfg = bench::BenchConfig {
                n,
                t_min,
                t_max,
                steps,
                algos,
                reps,
                seed: seed.resolve(),
                max_value,
                guards: guard_mem.map(Guards::from_bytes).unwrap_or_default(),
            };
            let records = bench::run_bench(&cfg)?;
            let mut table = Vec::new();
            bench::write_table(&records, &mut table).map_err(|e| CliError::Io("table".into(), e.to_string()))?;
            match out_path {
                Some(p) => std::fs::write(&p, &table).map_err(|e| CliError::Io(p.display().to_string(), e.to_string()))?,
                None => {
                    let _ = out.write_all(&table);
                }
            }
            for algo in &cfg.algos {
                if let Some(s) = bench::slope(&records, *algo) {
                    let _ = writeln!(err, "slope algo={algo} log2(median time)/log2(t)={s:.3}");
                }
            }
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let parse = CliError::Parse(ParseError {
            file: None,
            line: 1,
            msg: String::new(),
        });
        assert_eq!(parse.exit_code(), EXIT_PARSE);
        assert_eq!(CliError::from(Error::guard("x", 2u8, 1u8)).exit_code(), EXIT_GUARD);
        assert_eq!(CliError::from(Error::NegativeEntry(3)).exit_code(), EXIT_CONTRACT);
        assert_eq!(CliError::from(Error::Contract("x".into())).exit_code(), EXIT_CONTRACT);
        assert_eq!(CliError::from(Error::Invariant("x".into())).exit_code(), EXIT_INVARIANT);
    }

    #[test]
    fn seeds() {
        assert_eq!("17".parse::<SeedArg>(), Ok(SeedArg::Fixed(17)));
        assert_eq!("random".parse::<SeedArg>(), Ok(SeedArg::Random));
        assert!("x".parse::<SeedArg>().is_err());
    }

    #[test]
    fn every_engine_agrees_on_a_small_instance() {
        let a = SparseVec::from_pairs(40, [(0u64, 3u64), (7, 1), (39, 2)]).unwrap();
        let b = SparseVec::from_pairs(40, [(1u64, 5u64), (30, 4)]).unwrap();
        let opts = RunOptions::default();
        let expect = run_algo(Algo::Oracle, &a, &b, &opts).unwrap().product;
        for algo in Algo::ALL {
            let got = run_algo(algo, &a, &b, &opts).unwrap();
            assert_eq!(got.product, expect, "{algo}");
            assert!(got.summary.starts_with(&format!("algo={algo} ")));
        }
    }

    #[test]
    fn dense_guard() {
        let a = SparseVec::from_pairs(1000, [(999u64, 1u64)]).unwrap();
        let opts = RunOptions {
            guards: Guards::from_bytes(64 * 100),
            ..RunOptions::default()
        };
        let e = run_algo(Algo::Dense, &a, &a, &opts).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_GUARD);
    }
}

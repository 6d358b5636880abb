use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::*;
use crate::hashing::PrimeHash;

/// Double loop over entry pairs.
fn pair_oracle(a: &SparseVec, b: &SparseVec) -> SparseVec {
    let mut acc: BTreeMap<Index, ExactInt> = BTreeMap::new();
    for (i, x) in a.iter() {
        for (j, y) in b.iter() {
            *acc.entry(i + j).or_default() += x * y;
        }
    }
    let len = if a.length() == 0 || b.length() == 0 { 0 } else { a.length() + b.length() - 1 };
    SparseVec::from_pairs(len, acc).unwrap()
}

fn random_vec_in(rng: &mut SeededRng, n: Index, k: std::ops::Range<usize>) -> SparseVec {
    let k = rng.gen_range(k);
    random_vec(rng, n, k)
}

fn random_vec(rng: &mut SeededRng, n: Index, k: usize) -> SparseVec {
    let pairs: Vec<(Index, u64)> = (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(1..=1 << 16))).collect();
    SparseVec::from_pairs(n, pairs).unwrap()
}

fn sv(n: Index, pairs: &[(Index, i64)]) -> SparseVec {
    SparseVec::from_pairs(n, pairs.iter().copied()).unwrap()
}

fn le(r: &SparseVec, truth: &SparseVec) -> bool {
    r.iter().all(|(z, v)| v.sign() != num_bigint::Sign::Minus && truth.get(z).is_some_and(|t| v <= t))
}

type Engine = fn(&mut Session, &SparseVec, &SparseVec) -> Result<SparseVec>;

const ENGINES: [(&str, Engine); 4] = [
    ("simple", Session::simple),
    ("high_prob", Session::high_prob),
    ("fast", Session::fast),
    ("full", Session::full),
];

#[test]
fn approximation_examples() {
    let mut rng = SeededRng::new(1);
    let empty = SparseVec::zeros(0);
    assert_eq!(approx_conv_linear(&empty, &empty, 4, &mut rng).unwrap(), SparseVec::zeros(0));
    let one = sv(1 << 10, &[(0, 1)]);
    for m in [1, 2, 3, 8, 100] {
        let r = approx_conv_linear(&one, &one, m, &mut rng).unwrap();
        assert_eq!(r.entries(), sv(2047, &[(0, 1)]).entries());
    }
}

#[test]
fn approximation_is_bounded_by_product() {
    let mut rng = SeededRng::new(2);
    for _ in 0..200 {
        let n = 1 << rng.gen_range(3..16);
        let a = random_vec_in(&mut rng, n, 1..50);
        let b = random_vec_in(&mut rng, n, 1..50);
        let truth = pair_oracle(&a, &b);
        let m = rng.gen_range(1..4 * n);
        let r = approx_conv_linear(&a, &b, m, &mut rng).unwrap();
        assert!(le(&r, &truth));
        assert!(r.l1() <= a.l1() * b.l1());
    }
}

#[test]
fn approximation_recovers_most_entries_with_slack() {
    let mut rng = SeededRng::new(3);
    let (mut missed, mut total) = (0usize, 0usize);
    for _ in 0..50 {
        let a = random_vec(&mut rng, 1 << 20, 40);
        let b = random_vec(&mut rng, 1 << 20, 40);
        let truth = pair_oracle(&a, &b);
        let m = 8 * truth.nnz() as Index;
        let r = approx_conv_linear(&a, &b, m, &mut rng).unwrap();
        total += truth.nnz();
        missed += truth.iter().filter(|(z, v)| r.get(*z) != Some(*v)).count();
    }
    // each entry is lost with probability at most about 3/8 under this slack
    assert!((missed as f64) < 0.375 * total as f64, "{missed} of {total}");
}

#[test]
fn residual_examples() {
    let a = sv(4, &[(0, 1), (3, 1)]);
    let b = sv(1, &[(0, 1)]);
    let c = sv(4, &[(0, 1)]);
    let mut p = Problem::new(&a, &b).unwrap();
    let h = PrimeHash::with_prime(2, 3);
    let session = Session::new(LvConfig::default());
    let bits = p.bound_bits + 1;
    let (pa, pb) = p.prepared().unwrap();
    let buckets = hashed_bucket_moments(&h, pa, pb, Some(&c), bits).unwrap();
    assert_eq!(session.recover(buckets, p.out_len).entries(), sv(4, &[(3, 1)]).entries());

    let mut rng = SeededRng::new(4);
    for _ in 0..100 {
        let a = random_vec(&mut rng, 1 << 12, 20);
        let b = random_vec(&mut rng, 1 << 12, 20);
        let truth = pair_oracle(&a, &b);
        let m = rng.gen_range(2..1000);
        assert!(residual_recover(&a, &b, &truth, m, &mut rng).unwrap().is_zero());
        let r = residual_recover(&a, &b, &SparseVec::zeros(truth.length()), m, &mut rng).unwrap();
        assert!(le(&r, &truth));
    }
}

#[test]
fn engines_match_oracle() {
    let mut rng = SeededRng::new(5);
    for trial in 0..40 {
        let n = 1 << rng.gen_range(1..20);
        let a = random_vec_in(&mut rng, n, 0..40);
        let b = random_vec_in(&mut rng, n, 0..40);
        let truth = pair_oracle(&a, &b);
        for (name, engine) in ENGINES {
            let cfg = LvConfig {
                seed: trial,
                epsilon: [0.25, 0.5, 1.0][trial as usize % 3],
                ..LvConfig::default()
            };
            let mut s = Session::new(cfg);
            s.set_monitor(Box::new(OracleMonitor::new(&truth)));
            assert_eq!(engine(&mut s, &a, &b).unwrap(), truth, "{name} trial {trial}");
            assert_eq!(s.report().output_nnz, truth.nnz());
        }
    }
}

#[test]
fn identity_empty_and_single_cases() {
    let mut rng = SeededRng::new(6);
    let b = random_vec(&mut rng, 1000, 30);
    let e0 = sv(1, &[(0, 1)]);
    let single = sv(100, &[(17, 3)]);
    let other = sv(50, &[(20, 5)]);
    for (name, engine) in ENGINES {
        let mut s = Session::new(LvConfig::default());
        assert_eq!(engine(&mut s, &e0, &b).unwrap(), b, "{name}");
        let empty = SparseVec::zeros(0);
        assert_eq!(engine(&mut s, &empty, &empty).unwrap(), empty, "{name}");
        let zero = SparseVec::zeros(64);
        assert_eq!(engine(&mut s, &zero, &b).unwrap(), SparseVec::zeros(1063), "{name}");
        assert_eq!(engine(&mut s, &single, &other).unwrap(), sv(149, &[(37, 15)]), "{name}");
    }
    let mut s = Session::new(LvConfig::default());
    s.simple(&SparseVec::zeros(0), &SparseVec::zeros(0)).unwrap();
    assert_eq!(s.report().m_values, vec![1]);
}

#[test]
fn negative_inputs_are_refused() {
    let a = sv(10, &[(2, 1), (4, -1)]);
    let b = sv(10, &[(0, 1)]);
    for (_, engine) in ENGINES {
        let mut s = Session::new(LvConfig::default());
        assert!(matches!(engine(&mut s, &a, &b), Err(Error::NegativeEntry(4))));
    }
}

#[test]
fn outputs_do_not_depend_on_seed() {
    let mut rng = SeededRng::new(7);
    let a = random_vec(&mut rng, 1 << 18, 60);
    let b = random_vec(&mut rng, 1 << 18, 60);
    let first = Session::new(LvConfig { seed: 1, ..LvConfig::default() }).high_prob(&a, &b).unwrap();
    let second = Session::new(LvConfig { seed: 99, ..LvConfig::default() }).high_prob(&a, &b).unwrap();
    assert_eq!(first, second);
}

#[test]
fn memory_guard_is_enforced() {
    let mut rng = SeededRng::new(8);
    let a = random_vec(&mut rng, 1 << 20, 100);
    let b = random_vec(&mut rng, 1 << 20, 100);
    let cfg = LvConfig {
        memory_guard: 64,
        ..LvConfig::default()
    };
    assert!(matches!(Session::new(cfg.clone()).simple(&a, &b), Err(Error::Guard { .. })));
    assert!(matches!(Session::new(cfg).fast(&a, &b), Err(Error::Guard { .. })));
}

/// Records whether any coordinate of `C` ever went down during residual steps.
struct Trace {
    last: BTreeMap<Index, ExactInt>,
    decreased: Arc<Mutex<bool>>,
}

impl Monitor for Trace {
    fn check(&mut self, stage: &'static str, c: &Approximation) -> Result<()> {
        let now: BTreeMap<Index, ExactInt> = c.iter().map(|(i, v)| (i, v.clone())).collect();
        if stage == "lv-fast residual" {
            let zero = ExactInt::zero();
            if self.last.iter().any(|(i, v)| now.get(i).unwrap_or(&zero) < v) {
                *self.decreased.lock().unwrap() = true;
            }
        }
        self.last = now;
        Ok(())
    }
}

#[test]
fn residual_phase_never_lowers_coordinates() {
    let mut rng = SeededRng::new(9);
    let decreased = Arc::new(Mutex::new(false));
    for seed in 0..20 {
        let a = random_vec(&mut rng, 1 << 16, 50);
        let b = random_vec(&mut rng, 1 << 16, 50);
        let mut s = Session::new(LvConfig { seed, ..LvConfig::default() });
        s.set_monitor(Box::new(Trace {
            last: BTreeMap::new(),
            decreased: decreased.clone(),
        }));
        assert_eq!(s.fast(&a, &b).unwrap(), pair_oracle(&a, &b));
        assert!(s.report().residual_calls > 0);
    }
    assert!(!*decreased.lock().unwrap());
}

#[test]
fn injected_fault_is_caught_by_monitor() {
    let mut rng = SeededRng::new(10);
    let a = random_vec(&mut rng, 1 << 16, 30);
    let b = random_vec(&mut rng, 1 << 16, 30);
    let truth = pair_oracle(&a, &b);
    for (name, engine) in ENGINES {
        let mut s = Session::new(LvConfig::default());
        s.set_monitor(Box::new(OracleMonitor::new(&truth)));
        s.inject_fault(true);
        let outcome = engine(&mut s, &a, &b);
        assert!(matches!(outcome, Err(Error::Invariant(_))), "{name}: {outcome:?}");
    }
}

#[test]
fn full_engine_refuses_oversized_hash_range() {
    // 1300^6 lies between 2^62 and the product length 2^63 - 1
    let n = 1u64 << 62;
    let a = SparseVec::from_pairs(n, (0..1300u64).map(|i| (i * 1_000_003, 1u32))).unwrap();
    let b = a.clone();
    assert!(matches!(
        Session::new(LvConfig::default()).full(&a, &b),
        Err(Error::LengthTooLarge(_))
    ));
}

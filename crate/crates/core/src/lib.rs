pub mod error;
pub mod vector;
pub mod rng;
pub(crate) mod arith;
pub mod dense;
pub mod field;
pub mod hashing;
pub mod sparsity;
pub mod lasvegas;
pub mod vandermonde;
pub mod deterministic;
pub mod oracle;
pub mod cli;

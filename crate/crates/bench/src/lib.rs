//! Shared setup for the Criterion benchmarks; the kernels and their inputs
//! live in `incbeam_core::harness::bench`.

pub use incbeam_core::harness::bench::{prepare, BenchOp, Prepared};

/// Seed used for every benchmark input.
pub const SEED: u64 = 7;

//! Benchmark-only crate; see the `benches/` targets.

pub use checkout_core as core;

//! Criterion benchmarks for `treesample-core`; see `benches/chain.rs`.

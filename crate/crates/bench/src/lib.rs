//! Criterion benchmarks for the core pipeline stages; see `benches/pipeline.rs`.

//! Criterion benchmarks for the checker; see `benches/`.

//! Criterion benchmarks for the adsum hot paths; see `benches/`.

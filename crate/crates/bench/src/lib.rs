//! Criterion benchmarks for retrowpt live in `benches/`.

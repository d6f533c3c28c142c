//! Criterion benchmarks for causalnet live in `benches/`.

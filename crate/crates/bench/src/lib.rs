//! Criterion benchmarks for the nlkg kernels live in `benches/`.

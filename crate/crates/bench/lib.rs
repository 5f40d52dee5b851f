//! Criterion benchmarks for the dense kernels live in `benches/`.

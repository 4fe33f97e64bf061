//! Criterion benchmarks for the prwlab kernels; see `benches/`.

//! Criterion benchmarks for the kernels in `vessel-core`; see `benches/`.

//! Criterion benchmarks for abspose-core live in `benches/`.

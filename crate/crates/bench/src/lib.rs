//! Criterion benchmarks for windbid; see `benches/`.

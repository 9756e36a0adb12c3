//! Benchmarks for the reconstruction pipeline live in `benches/`.

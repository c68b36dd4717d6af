//! Benchmarks for the dialtrack pipeline live in `benches/`.

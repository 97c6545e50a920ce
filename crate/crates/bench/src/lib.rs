//! Benchmark harness for the toptrack crate; see `benches/`.

//! Benchmark-only crate; see `benches/warp.rs`.

//! Criterion benchmarks for the rank test, completion and exhaustive
//! coverage checks; see `benches/`. Run with `cargo bench -p completability-bench`.

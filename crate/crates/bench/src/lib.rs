//! Criterion benchmarks for the simulator kernels. Run with
//! `cargo bench -p jamnull-bench`.
